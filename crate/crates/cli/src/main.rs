use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use forkdyn::chain_model::{Variant, TABLE_TRUNCATION};
use forkdyn::sim::SimConfig;
use forkdyn::spatial_gamma::{RelayMode, DEFAULT_K_OVER_SIGMA};
use forkdyn_cli::output::write_file;
use forkdyn_cli::presets::{GammaMethod, GammaSpec, MarkovSpec, Preset, PRESET_SEED};
use forkdyn_cli::{gamma_table, markov_table, reproduce, simulate};

/// Fork dynamics of a blockchain under honest and selfish mining.
///
/// Set FORKDYN_THREADS to cap the number of replications run in parallel.
#[derive(Parser, Debug)]
#[command(name = "forkdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stationary distribution of the two-branch fork chain.
    Markov(MarkovArgs),
    /// Probability that the pool block wins a race at the honest miner.
    Gamma(GammaArgs),
    /// Replicated discrete-event simulation.
    Simulate(SimulateArgs),
    /// Regenerate a named table or figure.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Honest,
    Selfish,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RelayArg {
    /// Only the relay with the shortest detour.
    Nearest,
    /// Every pool relay.
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Quadrature,
    Mc,
}

#[derive(clap::Args, Debug)]
struct MarkovArgs {
    /// Pool mining rate, blocks per hour.
    #[arg(long, default_value_t = 0.6)]
    lambda1: f64,
    /// Community mining rate, blocks per hour; must exceed lambda1.
    #[arg(long, default_value_t = 5.4)]
    lambda2: f64,
    /// Communication rate between the pool and the community, per hour.
    #[arg(long, default_value_t = 285.0)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Honest)]
    variant: VariantArg,
    /// Keep states with k + l <= N.
    #[arg(long, default_value_t = TABLE_TRUNCATION)]
    truncation: u32,
    /// Only print states with k, l <= G.
    #[arg(long)]
    grid: Option<u32>,
    /// Output CSV; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct GammaArgs {
    /// Distance between the two competing miners.
    #[arg(long, required = true, num_args = 1..)]
    d12: Vec<f64>,
    /// Pool node density.
    #[arg(long, required = true, num_args = 1..)]
    nu: Vec<f64>,
    /// Delay per unit distance.
    #[arg(long, default_value_t = DEFAULT_K_OVER_SIGMA)]
    k: f64,
    /// Standard deviation of each transmission delay.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = RelayArg::Nearest)]
    relay: RelayArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Quadrature)]
    method: MethodArg,
    /// Monte-Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Monte-Carlo seed.
    #[arg(long, default_value_t = PRESET_SEED)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    /// Fraction of nodes in the selfish pool, in [0, 0.5].
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Side of the square the nodes are placed on.
    #[arg(long, default_value_t = 1000.0)]
    area_side: f64,
    /// Network-wide blocks per hour.
    #[arg(long, default_value_t = 6.0)]
    block_rate: f64,
    /// Mining events per replication.
    #[arg(long, default_value_t = 10_000)]
    blocks: u32,
    /// Mean delay in seconds between two random nodes.
    #[arg(long, default_value_t = 10.0)]
    delay: f64,
    /// Coefficient of variation of each delay.
    #[arg(long, default_value_t = 0.0)]
    cv: f64,
    #[arg(long, default_value_t = PRESET_SEED)]
    seed: u64,
    /// Largest secret lead before the pool starts publishing.
    #[arg(long, default_value_t = 5)]
    runaway_cap: usize,
    #[arg(long, default_value_t = 12)]
    reps: usize,
    #[arg(short, long, default_value = "out")]
    out_dir: PathBuf,
    /// Also write the event log of replication 0 to this file.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ReproduceArgs {
    /// table1..table4 or fig5..fig13, optionally suffixed with -small.
    preset: Preset,
    #[arg(long, default_value_t = PRESET_SEED)]
    seed: u64,
    #[arg(short, long, default_value = "out")]
    out_dir: PathBuf,
}

fn emit(csv: &str, output: Option<PathBuf>) -> Result<()> {
    match output {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
            let name = path.file_name().context("output path has no file name")?;
            write_file(
                dir.unwrap_or_else(|| ".".as_ref()),
                &name.to_string_lossy(),
                csv,
            )?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FORKDYN_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("FORKDYN_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("FORKDYN_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    match cli.command {
        Command::Markov(a) => {
            let spec = MarkovSpec {
                lambda1: a.lambda1,
                lambda2: a.lambda2,
                mu: a.mu,
                variant: match a.variant {
                    VariantArg::Honest => Variant::Honest,
                    VariantArg::Selfish => Variant::Selfish,
                },
                truncation: a.truncation,
                grid: a.grid,
            };
            emit(&markov_table(&spec)?.to_csv()?, a.output)
        }
        Command::Gamma(a) => {
            let spec = GammaSpec {
                cells: a
                    .d12
                    .iter()
                    .flat_map(|&d| a.nu.iter().map(move |&nu| (d, nu)))
                    .collect(),
                k_slope: a.k,
                sigma: a.sigma,
                relay: match a.relay {
                    RelayArg::Nearest => RelayMode::Nearest,
                    RelayArg::All => RelayMode::All,
                },
                method: match a.method {
                    MethodArg::Quadrature => GammaMethod::Quadrature,
                    MethodArg::Mc => GammaMethod::MonteCarlo {
                        n_samples: a.samples,
                        seed: a.seed,
                    },
                },
            };
            emit(&gamma_table(&spec)?.to_csv()?, a.output)
        }
        Command::Simulate(a) => {
            let config = SimConfig {
                n_nodes: a.nodes,
                pool_fraction: a.alpha,
                area_side: a.area_side,
                block_rate: a.block_rate,
                n_blocks: a.blocks,
                mean_delay_target: a.delay,
                cv: a.cv,
                seed: a.seed,
                runaway_cap: a.runaway_cap,
            };
            config.validate()?;
            let (_, written) = simulate(&config, a.reps, &a.out_dir, a.event_log.as_deref())?;
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Reproduce(a) => {
            for p in reproduce(a.preset, a.seed, &a.out_dir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}
