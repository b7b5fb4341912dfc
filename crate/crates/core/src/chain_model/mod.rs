//! Two-branch fork model.
//!
//! The state `(k, l)` counts the blocks the pool (`k`) and the rest of the
//! community (`l`) have built past the last block both sides agree on.
//! Mining moves the state north or east; a completed pool/community
//! communication collapses it back to `(0, 0)`.

mod attack;
mod closed_form;
mod generator;
mod paths;
mod stationary;

pub use attack::{attacker_success_probability, selfish_threshold, AttackParams};
pub use closed_form::{closed_form_pi, normalized_closed_form};
pub use generator::{build_generator, ChainRates, ForkState, Generator, Variant};
pub use paths::{
    binomial, count_lattice_paths, grand_dyck_count, welsh_count, PathCountError, PathTable,
    MAX_PATH_LENGTH,
};
pub use stationary::{
    orphan_rate, solve_stationary, solve_stationary_ordered, StationaryDistribution,
};

use thiserror::Error;

/// Default truncation used when reproducing the printed stationary tables.
pub const TABLE_TRUNCATION: u32 = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainModelError {
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("truncation must be at least 2, got {0}")]
    Truncation(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("truncated chain is reducible: state {0} cannot reach or be reached from (0,0)")]
    Reducible(ForkState),
    #[error("linear system for the stationary distribution is singular")]
    Singular,
}
