//! Named experiments. Every preset fixes all parameters and the seed.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use forkdyn::chain_model::{Variant, TABLE_TRUNCATION};
use forkdyn::sim::SimConfig;
use forkdyn::spatial_gamma::{RelayMode, DEFAULT_K_OVER_SIGMA};

pub const PRESET_SEED: u64 = 1;
pub const PAPER_REPS: usize = 12;
pub const SMALL_REPS: usize = 4;
pub const SMALL_NODES: usize = 200;
pub const SMALL_BLOCKS: u32 = 2000;

pub const TABLE_RATES: (f64, f64, f64) = (0.6, 5.4, 285.0);
/// Rows and columns shown in the printed stationary tables.
pub const TABLE_GRID: u32 = 3;

pub const GAMMA_D12: [f64; 4] = [1.0, 4.0, 8.0, 12.0];
pub const GAMMA_NU: [f64; 4] = [0.4, 0.8, 1.2, 1.6];

pub const DELAY_GRID: [f64; 5] = [1.0, 3.16, 10.0, 31.6, 100.0];
pub const RACE_ALPHAS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const RACE_CVS: [f64; 4] = [0.0, 0.001, 0.01, 0.1];
pub const SELFISH_CV: f64 = 0.001;
pub const NODE_GRID: [usize; 5] = [100, 250, 500, 750, 1000];
pub const SMALL_NODE_GRID: [usize; 2] = [100, 200];

/// α from 0 to 0.5 in steps of 0.05.
pub fn alpha_sweep() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetName {
    Table1,
    Table2,
    Table3,
    Table4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
    Fig12,
    Fig13,
}

impl PresetName {
    pub const ALL: [PresetName; 13] = [
        PresetName::Table1,
        PresetName::Table2,
        PresetName::Table3,
        PresetName::Table4,
        PresetName::Fig5,
        PresetName::Fig6,
        PresetName::Fig7,
        PresetName::Fig8,
        PresetName::Fig9,
        PresetName::Fig10,
        PresetName::Fig11,
        PresetName::Fig12,
        PresetName::Fig13,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Table1 => "table1",
            PresetName::Table2 => "table2",
            PresetName::Table3 => "table3",
            PresetName::Table4 => "table4",
            PresetName::Fig5 => "fig5",
            PresetName::Fig6 => "fig6",
            PresetName::Fig7 => "fig7",
            PresetName::Fig8 => "fig8",
            PresetName::Fig9 => "fig9",
            PresetName::Fig10 => "fig10",
            PresetName::Fig11 => "fig11",
            PresetName::Fig12 => "fig12",
            PresetName::Fig13 => "fig13",
        }
    }

    pub fn is_simulation(self) -> bool {
        !matches!(
            self,
            PresetName::Table1 | PresetName::Table2 | PresetName::Table3 | PresetName::Table4
        )
    }
}

/// A preset name with an optional `-small` suffix. The suffix only changes
/// simulation presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Preset {
    pub name: PresetName,
    pub small: bool,
}

impl Preset {
    pub const fn full(name: PresetName) -> Self {
        Self { name, small: false }
    }

    pub const fn small(name: PresetName) -> Self {
        Self { name, small: true }
    }

    /// All full and small presets.
    pub fn all() -> Vec<Preset> {
        PresetName::ALL
            .iter()
            .flat_map(|&n| [Preset::full(n), Preset::small(n)])
            .collect()
    }

    pub fn experiment(&self, seed: u64) -> Experiment {
        use PresetName::*;
        let (a, b, m) = TABLE_RATES;
        match self.name {
            Table1 | Table2 => Experiment::Markov(MarkovSpec {
                lambda1: a,
                lambda2: b,
                mu: m,
                variant: if self.name == Table1 {
                    Variant::Honest
                } else {
                    Variant::Selfish
                },
                truncation: TABLE_TRUNCATION,
                grid: Some(TABLE_GRID),
            }),
            Table3 | Table4 => Experiment::Gamma(GammaSpec {
                cells: gamma_grid(),
                k_slope: DEFAULT_K_OVER_SIGMA,
                sigma: 1.0,
                relay: if self.name == Table3 {
                    RelayMode::Nearest
                } else {
                    RelayMode::All
                },
                method: GammaMethod::Quadrature,
            }),
            _ => Experiment::Sweep(self.sweep(seed)),
        }
    }

    fn sweep(&self, seed: u64) -> SweepSpec {
        use PresetName::*;
        let base = SimConfig {
            seed,
            ..if self.small {
                SimConfig {
                    n_nodes: SMALL_NODES,
                    n_blocks: SMALL_BLOCKS,
                    ..SimConfig::default()
                }
            } else {
                SimConfig::default()
            }
        };
        let n_reps = if self.small { SMALL_REPS } else { PAPER_REPS };
        let selfish = SimConfig {
            cv: SELFISH_CV,
            ..base
        };
        let (figure, configs): (Figure, Vec<SimConfig>) = match self.name {
            Fig5 | Fig6 => (
                if self.name == Fig5 {
                    Figure::Splits
                } else {
                    Figure::Dwell
                },
                DELAY_GRID
                    .iter()
                    .map(|&d| SimConfig {
                        mean_delay_target: d,
                        ..base
                    })
                    .collect(),
            ),
            Fig7 | Fig8 => (
                if self.name == Fig7 {
                    Figure::Gamma
                } else {
                    Figure::BigGamma
                },
                RACE_CVS
                    .iter()
                    .flat_map(|&cv| {
                        RACE_ALPHAS.iter().map(move |&a| SimConfig {
                            cv,
                            pool_fraction: a,
                            ..base
                        })
                    })
                    .collect(),
            ),
            Fig9 => {
                let nodes: &[usize] = if self.small {
                    &SMALL_NODE_GRID
                } else {
                    &NODE_GRID
                };
                (
                    Figure::RevenueByNodes,
                    nodes
                        .iter()
                        .flat_map(|&n| {
                            RACE_ALPHAS.iter().map(move |&a| SimConfig {
                                n_nodes: n,
                                pool_fraction: a,
                                ..selfish
                            })
                        })
                        .collect(),
                )
            }
            Fig10 | Fig11 | Fig12 | Fig13 => (
                match self.name {
                    Fig10 => Figure::SplitsByAlpha,
                    Fig11 => Figure::MinerRevenue,
                    Fig12 => Figure::Revenue,
                    _ => Figure::BlockRates,
                },
                alpha_sweep()
                    .into_iter()
                    .map(|a| SimConfig {
                        pool_fraction: a,
                        ..selfish
                    })
                    .collect(),
            ),
            Table1 | Table2 | Table3 | Table4 => unreachable!("not a simulation preset"),
        };
        SweepSpec {
            figure,
            configs,
            n_reps,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name.as_str())?;
        if self.small {
            f.write_str("-small")?;
        }
        Ok(())
    }
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, small) = match s.strip_suffix("-small") {
            Some(b) => (b, true),
            None => (s, false),
        };
        match PresetName::ALL.iter().find(|n| n.as_str() == base) {
            Some(&name) => Ok(Preset { name, small }),
            None => bail!(
                "unknown preset {s:?}; expected one of table1..table4, fig5..fig13, optionally with -small"
            ),
        }
    }
}

pub fn gamma_grid() -> Vec<(f64, f64)> {
    GAMMA_D12
        .iter()
        .flat_map(|&d| GAMMA_NU.iter().map(move |&nu| (d, nu)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Markov(MarkovSpec),
    Gamma(GammaSpec),
    Sweep(SweepSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovSpec {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub variant: Variant,
    pub truncation: u32,
    /// Only emit states with `k, l <= grid`; all states when `None`.
    pub grid: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    Quadrature,
    MonteCarlo { n_samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSpec {
    pub cells: Vec<(f64, f64)>,
    pub k_slope: f64,
    pub sigma: f64,
    pub relay: RelayMode,
    pub method: GammaMethod,
}

/// Which metric a simulation figure reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Splits,
    Dwell,
    Gamma,
    BigGamma,
    RevenueByNodes,
    SplitsByAlpha,
    MinerRevenue,
    Revenue,
    BlockRates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub figure: Figure,
    pub configs: Vec<SimConfig>,
    pub n_reps: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::all() {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!("fig14".parse::<Preset>().is_err());
        assert!("table1-big".parse::<Preset>().is_err());
    }

    #[test]
    fn small_variants_shrink_simulations() {
        let Experiment::Sweep(s) = Preset::small(PresetName::Fig12).experiment(7) else {
            panic!("fig12 is a sweep");
        };
        assert_eq!(s.n_reps, SMALL_REPS);
        assert_eq!(s.configs.len(), 11);
        for c in &s.configs {
            assert_eq!(
                (c.n_nodes, c.n_blocks, c.seed, c.cv),
                (200, 2000, 7, SELFISH_CV)
            );
        }
        assert_eq!(
            Preset::small(PresetName::Table3).experiment(1),
            Preset::full(PresetName::Table3).experiment(1)
        );
    }

    #[test]
    fn alpha_sweep_endpoints() {
        let a = alpha_sweep();
        assert_eq!(a.first(), Some(&0.0));
        assert_eq!(a.last(), Some(&0.5));
        assert_eq!(a.len(), 11);
    }
}
