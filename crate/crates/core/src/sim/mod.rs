//! Discrete-event simulation of miners on a square with normally distributed,
//! distance-proportional propagation delays. Honest nodes follow the
//! longest-chain rule; pool members run selfish-mine as one logical entity.

mod block;
mod engine;
mod pool;
mod trace;
mod tree;

pub use block::{chain_to, Block, BlockId, NodeId, GENESIS};
pub use engine::{run, run_replication, run_with, sample_delay, RunOptions};
pub use pool::{PoolState, PublicResponse, Release};
pub use trace::{write_event_log, LogKind, LogRecord, RaceEpisode, RawTrace};
pub use tree::{AttachBatch, AttachOutcome, Attached, BlockTree};

use thiserror::Error;

/// Mean distance between two uniform points of the unit square.
pub const UNIT_SQUARE_MEAN_DISTANCE: f64 = 0.521_405_433_164_720_7;

/// Smallest delay a transmission can take when delays are positive.
pub const MIN_DELAY: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("malformed block: {0}")]
    Malformed(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_nodes: usize,
    /// Fraction of nodes that belong to the pool.
    pub pool_fraction: f64,
    pub area_side: f64,
    /// Blocks per hour over the whole network.
    pub block_rate: f64,
    /// Number of mining events before the drain phase.
    pub n_blocks: u32,
    /// Mean delay in seconds between two uniformly chosen nodes.
    pub mean_delay_target: f64,
    /// Coefficient of variation of every delay sample.
    pub cv: f64,
    pub seed: u64,
    pub runaway_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 1000,
            pool_fraction: 0.0,
            area_side: 1000.0,
            block_rate: 6.0,
            n_blocks: 10_000,
            mean_delay_target: 10.0,
            cv: 0.0,
            seed: 1,
            runaway_cap: 5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_nodes < 2 {
            return fail(format!("n_nodes must be at least 2, got {}", self.n_nodes));
        }
        if !(0.0..=0.5).contains(&self.pool_fraction) {
            return fail(format!(
                "pool_fraction must lie in [0, 0.5], got {}",
                self.pool_fraction
            ));
        }
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return fail(format!(
                "area_side must be positive, got {}",
                self.area_side
            ));
        }
        if !(self.block_rate.is_finite() && self.block_rate > 0.0) {
            return fail(format!(
                "block_rate must be positive, got {}",
                self.block_rate
            ));
        }
        if self.n_blocks == 0 {
            return fail("n_blocks must be positive".into());
        }
        if !(self.mean_delay_target.is_finite() && self.mean_delay_target >= 0.0) {
            return fail(format!(
                "mean_delay_target must be nonnegative, got {}",
                self.mean_delay_target
            ));
        }
        if !(self.cv.is_finite() && self.cv >= 0.0) {
            return fail(format!("cv must be nonnegative, got {}", self.cv));
        }
        Ok(())
    }

    pub fn pool_size(&self) -> usize {
        (self.pool_fraction * self.n_nodes as f64).floor() as usize
    }

    /// Seconds of delay per unit distance.
    pub fn delay_slope(&self) -> f64 {
        self.mean_delay_target / (UNIT_SQUARE_MEAN_DISTANCE * self.area_side)
    }

    /// Expected duration of the mining phase in hours.
    pub fn nominal_hours(&self) -> f64 {
        f64::from(self.n_blocks) / self.block_rate
    }
}
