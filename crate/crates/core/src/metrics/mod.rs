//! Per-run summaries, replicated confidence intervals and power-law fits.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::sim::{run_replication, RawTrace, SimConfig, SimError};

/// Block reward in bitcoins credited per main-branch block.
pub const BLOCK_REWARD: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least 2 replications, got {0}")]
    TooFewReplications(usize),
    #[error("replication {index} failed: {source}")]
    Replication { index: u64, source: SimError },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRates {
    pub pool: f64,
    pub honest: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinerRevenue {
    pub pool: f64,
    pub honest: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Splits per node per 24 hours.
    pub splits_per_day: f64,
    /// Mean length in seconds of the out-of-sync intervals.
    pub mean_dwell_s: f64,
    /// Mean over races of the honest share that first saw the pool's block.
    pub gamma_hat: Option<f64>,
    /// Share of races whose next block extended the pool's block.
    pub big_gamma_hat: Option<f64>,
    pub relative_pool_revenue: f64,
    pub blocks_per_hour: BlockRates,
    /// Bitcoins per miner per hour.
    pub revenue_per_miner_hour: MinerRevenue,
    pub n_races: u32,
}

/// Reduces one trace to its report. Rates use the nominal mining horizon
/// `n_blocks / block_rate`.
pub fn summarize(trace: &RawTrace, config: &SimConfig) -> MetricsReport {
    let hours = config.nominal_hours();
    let days = hours / 24.0;
    let n_nodes = config.n_nodes as f64;
    let total_splits: u64 = trace.splits_per_node.iter().map(|&s| u64::from(s)).sum();

    let mean_dwell_s = if trace.dwell_intervals.is_empty() {
        0.0
    } else {
        trace
            .dwell_intervals
            .iter()
            .map(|(a, b)| b - a)
            .sum::<f64>()
            / trace.dwell_intervals.len() as f64
    };

    let shares: Vec<f64> = trace.races.iter().filter_map(|r| r.pool_share()).collect();
    let gamma_hat = mean(&shares);
    let next: Vec<f64> = trace
        .races
        .iter()
        .filter_map(|r| r.next_extends_pool)
        .map(|p| if p { 1.0 } else { 0.0 })
        .collect();
    let big_gamma_hat = mean(&next);

    let (mut n_pool, mut n_honest) = (0u64, 0u64);
    for &id in &trace.final_main[1..] {
        if trace.blocks[id as usize].pool_origin {
            n_pool += 1;
        } else {
            n_honest += 1;
        }
    }
    let on_main = n_pool + n_honest;
    let relative_pool_revenue = if on_main == 0 {
        0.0
    } else {
        n_pool as f64 / on_main as f64
    };
    let pool_miners = trace.pool_members.len() as f64;
    let honest_miners = n_nodes - pool_miners;
    let per_miner = |blocks: u64, miners: f64| {
        if miners > 0.0 {
            BLOCK_REWARD * blocks as f64 / (miners * hours)
        } else {
            0.0
        }
    };

    MetricsReport {
        splits_per_day: total_splits as f64 / n_nodes / days,
        mean_dwell_s,
        gamma_hat,
        big_gamma_hat,
        relative_pool_revenue,
        blocks_per_hour: BlockRates {
            pool: n_pool as f64 / hours,
            honest: n_honest as f64 / hours,
            total: on_main as f64 / hours,
        },
        revenue_per_miner_hour: MinerRevenue {
            pool: per_miner(n_pool, pool_miners),
            honest: per_miner(n_honest, honest_miners),
        },
        n_races: trace.races.len() as u32,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Two-sided 95% Student-t quantile on `df` degrees of freedom.
pub fn t_multiplier(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Sample mean with the half-width of its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl Interval {
    /// `None` for fewer than two samples.
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 2 {
            return None;
        }
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        Some(Self {
            mean: m,
            half_width: t_multiplier(n - 1) * (var / n as f64).sqrt(),
            n,
        })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedSummary {
    pub n_reps: usize,
    pub reports: Vec<MetricsReport>,
    pub splits_per_day: Interval,
    pub mean_dwell_s: Interval,
    /// Over replications that had at least one race.
    pub gamma_hat: Option<Interval>,
    pub big_gamma_hat: Option<Interval>,
    pub relative_pool_revenue: Interval,
    pub pool_blocks_per_hour: Interval,
    pub honest_blocks_per_hour: Interval,
    pub total_blocks_per_hour: Interval,
    pub pool_revenue_per_miner_hour: Interval,
    pub honest_revenue_per_miner_hour: Interval,
    pub n_races: Interval,
}

impl ReplicatedSummary {
    pub fn from_reports(reports: Vec<MetricsReport>) -> Result<Self, MetricsError> {
        let n = reports.len();
        if n < 2 {
            return Err(MetricsError::TooFewReplications(n));
        }
        let col = |f: &dyn Fn(&MetricsReport) -> f64| {
            let xs: Vec<f64> = reports.iter().map(f).collect();
            Interval::from_samples(&xs).expect("n >= 2")
        };
        let opt = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
            let xs: Vec<f64> = reports.iter().filter_map(f).collect();
            Interval::from_samples(&xs)
        };
        Ok(Self {
            n_reps: n,
            splits_per_day: col(&|r| r.splits_per_day),
            mean_dwell_s: col(&|r| r.mean_dwell_s),
            gamma_hat: opt(&|r| r.gamma_hat),
            big_gamma_hat: opt(&|r| r.big_gamma_hat),
            relative_pool_revenue: col(&|r| r.relative_pool_revenue),
            pool_blocks_per_hour: col(&|r| r.blocks_per_hour.pool),
            honest_blocks_per_hour: col(&|r| r.blocks_per_hour.honest),
            total_blocks_per_hour: col(&|r| r.blocks_per_hour.total),
            pool_revenue_per_miner_hour: col(&|r| r.revenue_per_miner_hour.pool),
            honest_revenue_per_miner_hour: col(&|r| r.revenue_per_miner_hour.honest),
            n_races: col(&|r| f64::from(r.n_races)),
            reports,
        })
    }
}

/// Runs replications `0..n_reps` of `config` concurrently on the current
/// rayon pool and summarises them.
pub fn replicate(config: &SimConfig, n_reps: usize) -> Result<ReplicatedSummary, MetricsError> {
    if n_reps < 2 {
        return Err(MetricsError::TooFewReplications(n_reps));
    }
    let reports = (0..n_reps as u64)
        .into_par_iter()
        .map(|index| {
            run_replication(config, index)
                .map(|trace| summarize(&trace, config))
                .map_err(|source| MetricsError::Replication { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ReplicatedSummary::from_reports(reports)
}

/// `rate = coefficient * delay^exponent` fitted by least squares in log-log
/// space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub coefficient: f64,
    pub exponent: f64,
    pub r_squared: f64,
    /// Residual standard deviation in log space.
    pub residual_sd: f64,
}

pub fn loglog_fit(points: &[(f64, f64)]) -> Result<PowerLawFit, MetricsError> {
    if points.len() < 3 {
        return Err(MetricsError::Degenerate(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(MetricsError::Degenerate(format!(
            "non-positive point {p:?}"
        )));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = logs.iter().map(|(_, y)| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(MetricsError::Degenerate("all delays are equal".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = logs.iter().map(|(x, y)| (y - a - b * x).powi(2)).sum();
    Ok(PowerLawFit {
        coefficient: a.exp(),
        exponent: b,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        residual_sd: (sse / (n - 2.0)).sqrt(),
    })
}
