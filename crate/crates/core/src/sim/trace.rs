use std::fmt;
use std::io::{self, Write};

use super::block::{chain_to, Block, BlockId, NodeId};
use super::SimConfig;

/// One race: the pool published `pool_block` in answer to the community's
/// `honest_block` at the same height.
#[derive(Debug, Clone, PartialEq)]
pub struct RaceEpisode {
    pub pool_block: BlockId,
    pub honest_block: BlockId,
    pub opened_at: f64,
    /// Honest nodes (other than the miner of `honest_block`) that attached
    /// `pool_block` before `honest_block`.
    pub chose_pool: u32,
    pub eligible: u32,
    /// Whether the first block mined on either contender extends
    /// `pool_block`; `None` if no such block was mined.
    pub next_extends_pool: Option<bool>,
}

impl RaceEpisode {
    pub fn pool_share(&self) -> Option<f64> {
        (self.eligible > 0).then(|| f64::from(self.chose_pool) / f64::from(self.eligible))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    Mine,
    Extend,
    Side,
    Reorg,
    Detached,
    Duplicate,
    Publish,
    Race,
    SyncLost,
    SyncRestored,
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogKind::Mine => "mine",
            LogKind::Extend => "extend",
            LogKind::Side => "side",
            LogKind::Reorg => "reorg",
            LogKind::Detached => "detached",
            LogKind::Duplicate => "duplicate",
            LogKind::Publish => "publish",
            LogKind::Race => "race",
            LogKind::SyncLost => "sync_lost",
            LogKind::SyncRestored => "sync_restored",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub time: f64,
    pub kind: LogKind,
    pub node: Option<NodeId>,
    pub block: Option<BlockId>,
    pub parent: Option<BlockId>,
}

/// Everything a run leaves behind for the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub config: SimConfig,
    pub replication: u64,
    pub blocks: Vec<Block>,
    pub pool_members: Vec<NodeId>,
    pub splits_per_node: Vec<u32>,
    /// Closed intervals during which the network was out of sync.
    pub dwell_intervals: Vec<(f64, f64)>,
    pub races: Vec<RaceEpisode>,
    /// Main tip of every node after the drain.
    pub final_tips: Vec<BlockId>,
    /// Main branch of the lowest-numbered honest node, genesis first.
    pub final_main: Vec<BlockId>,
    /// Pool blocks that were never published.
    pub unpublished: Vec<BlockId>,
    pub mining_end: f64,
    pub end_time: f64,
    pub events: Option<Vec<LogRecord>>,
}

impl RawTrace {
    pub fn main_branch_of(&self, node: NodeId) -> Vec<BlockId> {
        chain_to(&self.blocks, self.final_tips[node as usize])
    }

    pub fn is_pool(&self, node: NodeId) -> bool {
        self.pool_members.binary_search(&node).is_ok()
    }
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Writes the event log, one tab-separated record per line:
/// `time kind node block parent`, with `-` for absent fields and time in
/// seconds with microsecond resolution.
pub fn write_event_log<W: Write>(records: &[LogRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "time\tkind\tnode\tblock\tparent")?;
    for r in records {
        writeln!(
            out,
            "{:.6}\t{}\t{}\t{}\t{}",
            r.time,
            r.kind,
            opt(r.node),
            opt(r.block),
            opt(r.parent)
        )?;
    }
    Ok(())
}
