pub type BlockId = u32;
pub type NodeId = u32;

pub const GENESIS: BlockId = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub id: BlockId,
    /// `None` only for genesis.
    pub parent: Option<BlockId>,
    pub height: u32,
    pub miner: Option<NodeId>,
    pub mined_at: f64,
    pub pool_origin: bool,
    /// Time the block left its owner; `None` while withheld.
    pub published_at: Option<f64>,
}

impl Block {
    pub fn genesis() -> Self {
        Self {
            id: GENESIS,
            parent: None,
            height: 0,
            miner: None,
            mined_at: 0.0,
            pool_origin: false,
            published_at: Some(0.0),
        }
    }
}

/// Walks parent links from `tip` back to genesis; the result starts at
/// genesis.
pub fn chain_to(blocks: &[Block], tip: BlockId) -> Vec<BlockId> {
    let mut chain = Vec::with_capacity(blocks[tip as usize].height as usize + 1);
    let mut cur = Some(tip);
    while let Some(id) = cur {
        chain.push(id);
        cur = blocks[id as usize].parent;
    }
    chain.reverse();
    chain
}
