//! Fork dynamics of a proof-of-work blockchain under propagation delay.
//!
//! Three engines share this crate:
//!
//! * [`chain_model`]: the two-branch fork Markov chain for an honest or a
//!   selfish pool, lattice-path counts behind its closed form, and the
//!   double-spend / selfish-threshold formulas.
//! * [`spatial_gamma`]: the probability that a pool relay beats direct
//!   transmission when pool nodes form a planar Poisson process.
//! * [`sim`] and [`metrics`]: a deterministic discrete-event simulator of
//!   miners on a plane with distance-proportional delays, plus replication
//!   and summary statistics.

pub mod chain_model;
pub mod metrics;
pub mod quad;
pub mod sim;
pub mod spatial_gamma;
