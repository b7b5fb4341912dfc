use std::collections::HashMap;

use smallvec::{smallvec, SmallVec};

use super::block::{Block, BlockId, GENESIS};
use super::SimError;

const UNKNOWN: u8 = 0;
const ATTACHED: u8 = 1;
const DETACHED: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachOutcome {
    Duplicate,
    ExtendedMain,
    SideBranch,
    /// The new block's branch overtook the main branch; `depth` blocks of the
    /// old main branch were rolled back.
    Reorg {
        depth: u32,
    },
    /// Parent unknown; stored until the parent attaches.
    Detached,
}

impl AttachOutcome {
    pub fn is_attached(self) -> bool {
        matches!(
            self,
            AttachOutcome::ExtendedMain | AttachOutcome::SideBranch | AttachOutcome::Reorg { .. }
        )
    }
}

/// One block's result from [`BlockTree::attach`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attached {
    pub block: BlockId,
    pub outcome: AttachOutcome,
    /// A second leaf appeared at the node's maximum height.
    pub split: bool,
}

pub type AttachBatch = SmallVec<[Attached; 2]>;

/// One node's view of the block tree. Block contents live in a shared table
/// indexed by id; the tree only tracks which of them it holds.
#[derive(Debug, Clone)]
pub struct BlockTree {
    state: Vec<u8>,
    waiting: HashMap<BlockId, SmallVec<[BlockId; 2]>>,
    tip: BlockId,
    tip_height: u32,
    rival: bool,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        Self {
            state: vec![ATTACHED],
            waiting: HashMap::new(),
            tip: GENESIS,
            tip_height: 0,
            rival: false,
        }
    }

    pub fn main_tip(&self) -> BlockId {
        self.tip
    }

    pub fn tip_height(&self) -> u32 {
        self.tip_height
    }

    /// Another leaf sits at the main tip's height.
    pub fn has_rival(&self) -> bool {
        self.rival
    }

    fn get(&self, id: BlockId) -> u8 {
        self.state.get(id as usize).copied().unwrap_or(UNKNOWN)
    }

    fn set(&mut self, id: BlockId, s: u8) {
        let i = id as usize;
        if i >= self.state.len() {
            self.state.resize(i + 1, UNKNOWN);
        }
        self.state[i] = s;
    }

    pub fn is_attached(&self, id: BlockId) -> bool {
        self.get(id) == ATTACHED
    }

    pub fn is_detached(&self, id: BlockId) -> bool {
        self.get(id) == DETACHED
    }

    pub fn detached_count(&self) -> usize {
        self.waiting.values().map(|v| v.len()).sum()
    }

    /// Applies the update rules to a received block: duplicates are rejected,
    /// orphans wait for their parent, and once attached a block either
    /// extends the main branch, joins a side branch or triggers a reorg.
    /// Waiting children attach recursively, in arrival order.
    pub fn attach(&mut self, blocks: &[Block], id: BlockId) -> Result<AttachBatch, SimError> {
        if self.get(id) != UNKNOWN {
            return Ok(smallvec![Attached {
                block: id,
                outcome: AttachOutcome::Duplicate,
                split: false,
            }]);
        }
        let block = blocks
            .get(id as usize)
            .ok_or_else(|| SimError::Malformed(format!("unknown block {id}")))?;
        let parent = block
            .parent
            .ok_or_else(|| SimError::Malformed(format!("block {id} has no parent")))?;
        if self.get(parent) != ATTACHED {
            self.set(id, DETACHED);
            self.waiting.entry(parent).or_default().push(id);
            return Ok(smallvec![Attached {
                block: id,
                outcome: AttachOutcome::Detached,
                split: false,
            }]);
        }
        let mut out = AttachBatch::new();
        let mut queue = std::collections::VecDeque::from([id]);
        while let Some(next) = queue.pop_front() {
            out.push(self.attach_one(blocks, next)?);
            if let Some(children) = self.waiting.remove(&next) {
                queue.extend(children);
            }
        }
        Ok(out)
    }

    fn attach_one(&mut self, blocks: &[Block], id: BlockId) -> Result<Attached, SimError> {
        let block = &blocks[id as usize];
        let parent = &blocks[block.parent.expect("checked by caller") as usize];
        if block.height != parent.height + 1 {
            return Err(SimError::Malformed(format!(
                "block {id} has height {} but its parent {} has height {}",
                block.height, parent.id, parent.height
            )));
        }
        self.set(id, ATTACHED);
        let (outcome, split) = if block.height > self.tip_height {
            let outcome = if parent.id == self.tip {
                AttachOutcome::ExtendedMain
            } else {
                AttachOutcome::Reorg {
                    depth: self.tip_height - fork_height(blocks, self.tip, parent.id),
                }
            };
            self.tip = id;
            self.tip_height = block.height;
            self.rival = false;
            (outcome, false)
        } else {
            let split = block.height == self.tip_height;
            self.rival |= split;
            (AttachOutcome::SideBranch, split)
        };
        Ok(Attached {
            block: id,
            outcome,
            split,
        })
    }

    /// Structural check used by tests: parents of attached blocks are
    /// attached, heights are consistent and the tip is of maximal height.
    pub fn check(&self, blocks: &[Block]) -> Result<(), String> {
        if !self.is_attached(self.tip) {
            return Err(format!("tip {} is not attached", self.tip));
        }
        for (i, &s) in self.state.iter().enumerate() {
            let b = &blocks[i];
            match s {
                ATTACHED => {
                    if b.height > self.tip_height {
                        return Err(format!("block {i} is higher than the tip"));
                    }
                    if let Some(p) = b.parent {
                        if !self.is_attached(p) {
                            return Err(format!("attached block {i} has unattached parent {p}"));
                        }
                        if blocks[p as usize].height + 1 != b.height {
                            return Err(format!("block {i} height mismatch"));
                        }
                    }
                }
                DETACHED => {
                    let p = b.parent.ok_or("detached genesis")?;
                    if self.is_attached(p) {
                        return Err(format!(
                            "block {i} detached although parent {p} is attached"
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Height of the last common ancestor of two blocks.
fn fork_height(blocks: &[Block], a: BlockId, b: BlockId) -> u32 {
    let (mut a, mut b) = (&blocks[a as usize], &blocks[b as usize]);
    while a.id != b.id {
        if a.height >= b.height {
            a = &blocks[a.parent.expect("walk stops at genesis") as usize];
        } else {
            b = &blocks[b.parent.expect("walk stops at genesis") as usize];
        }
    }
    a.height
}
