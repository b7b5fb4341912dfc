//! Library side of the `forkdyn` command: builds the output tables for the
//! Markov, gamma and simulation engines and for every named preset.

pub mod output;
pub mod presets;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use forkdyn::chain_model::{build_generator, orphan_rate, solve_stationary, ChainRates};
use forkdyn::metrics::{
    loglog_fit, replicate, summarize, Interval, MetricsReport, PowerLawFit, ReplicatedSummary,
};
use forkdyn::sim::{run_with, write_event_log, RunOptions, SimConfig};
use forkdyn::spatial_gamma::{
    gamma_all_relays, gamma_tilde, monte_carlo_gamma, RelayMode, SpatialParams,
};

use output::{num, opt_num, write_file, Table};
use presets::{Experiment, Figure, GammaMethod, GammaSpec, MarkovSpec, Preset, SweepSpec};

/// `k,l,pi` rows followed by an `orphan_rate,,value` footer.
pub fn markov_table(spec: &MarkovSpec) -> Result<Table> {
    let rates = ChainRates::new(spec.lambda1, spec.lambda2, spec.mu)?;
    let gen = build_generator(rates, spec.variant, spec.truncation)?;
    let pi = solve_stationary(&gen)?;
    let mut t = Table::new(["k", "l", "pi"]);
    for (s, p) in &pi.probabilities {
        if spec.grid.is_none_or(|g| s.k <= g && s.l <= g) {
            t.push(vec![s.k.to_string(), s.l.to_string(), num(*p)]);
        }
    }
    t.push(vec![
        "orphan_rate".into(),
        String::new(),
        num(orphan_rate(&pi, &rates)),
    ]);
    Ok(t)
}

/// One `d12,nu,value,method,error` row per cell. `error` is the quadrature
/// error estimate or the Monte-Carlo standard error.
pub fn gamma_table(spec: &GammaSpec) -> Result<Table> {
    let mut t = Table::new(["d12", "nu", "value", "method", "error"]);
    for &(d12, nu) in &spec.cells {
        let params = SpatialParams::new(d12, nu, spec.k_slope, spec.sigma)?;
        let (value, method, error) = match spec.method {
            GammaMethod::Quadrature => {
                let est = match spec.relay {
                    RelayMode::Nearest => gamma_tilde(&params),
                    RelayMode::All => gamma_all_relays(&params),
                }
                .with_context(|| format!("gamma at d12={d12}, nu={nu}"))?;
                (est.value, "quadrature", est.abs_error)
            }
            GammaMethod::MonteCarlo { n_samples, seed } => {
                let est = monte_carlo_gamma(&params, spec.relay, n_samples, None, seed)?;
                (est.estimate, "mc", est.stderr)
            }
        };
        t.push(vec![
            num(d12),
            num(nu),
            num(value),
            method.into(),
            num(error),
        ]);
    }
    Ok(t)
}

/// Rows of the per-replication CSV.
pub fn replications_table(reports: &[MetricsReport]) -> Table {
    let mut t = Table::new([
        "replication",
        "splits_per_day",
        "mean_dwell_s",
        "gamma_hat",
        "big_gamma_hat",
        "relative_pool_revenue",
        "pool_blocks_per_hour",
        "honest_blocks_per_hour",
        "total_blocks_per_hour",
        "pool_revenue_per_miner_hour",
        "honest_revenue_per_miner_hour",
        "n_races",
    ]);
    for (i, r) in reports.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            num(r.splits_per_day),
            num(r.mean_dwell_s),
            opt_num(r.gamma_hat),
            opt_num(r.big_gamma_hat),
            num(r.relative_pool_revenue),
            num(r.blocks_per_hour.pool),
            num(r.blocks_per_hour.honest),
            num(r.blocks_per_hour.total),
            num(r.revenue_per_miner_hour.pool),
            num(r.revenue_per_miner_hour.honest),
            r.n_races.to_string(),
        ]);
    }
    t
}

/// `metric,mean,half_width,n`; metrics undefined in every replication get
/// empty cells and `n = 0`.
pub fn summary_table(s: &ReplicatedSummary) -> Table {
    let mut t = Table::new(["metric", "mean", "half_width", "n"]);
    let rows: [(&str, Option<Interval>); 11] = [
        ("splits_per_day", Some(s.splits_per_day)),
        ("mean_dwell_s", Some(s.mean_dwell_s)),
        ("gamma_hat", s.gamma_hat),
        ("big_gamma_hat", s.big_gamma_hat),
        ("relative_pool_revenue", Some(s.relative_pool_revenue)),
        ("pool_blocks_per_hour", Some(s.pool_blocks_per_hour)),
        ("honest_blocks_per_hour", Some(s.honest_blocks_per_hour)),
        ("total_blocks_per_hour", Some(s.total_blocks_per_hour)),
        (
            "pool_revenue_per_miner_hour",
            Some(s.pool_revenue_per_miner_hour),
        ),
        (
            "honest_revenue_per_miner_hour",
            Some(s.honest_revenue_per_miner_hour),
        ),
        ("n_races", Some(s.n_races)),
    ];
    for (name, iv) in rows {
        t.push(vec![
            name.into(),
            opt_num(iv.map(|i| i.mean)),
            opt_num(iv.map(|i| i.half_width)),
            iv.map_or(0, |i| i.n).to_string(),
        ]);
    }
    t
}

/// Runs `n_reps` replications and writes `replications.csv` and
/// `summary.csv` to `out_dir`; with `event_log`, also the event log of
/// replication 0.
pub fn simulate(
    config: &SimConfig,
    n_reps: usize,
    out_dir: &Path,
    event_log: Option<&Path>,
) -> Result<(ReplicatedSummary, Vec<PathBuf>)> {
    let summary = replicate(config, n_reps)?;
    let mut written = vec![
        write_file(
            out_dir,
            "replications.csv",
            &replications_table(&summary.reports).to_csv()?,
        )?,
        write_file(out_dir, "summary.csv", &summary_table(&summary).to_csv()?)?,
    ];
    if let Some(path) = event_log {
        let options = RunOptions {
            record_events: true,
            ..RunOptions::default()
        };
        let trace = run_with(config, 0, options)?;
        debug_assert_eq!(summarize(&trace, config), summary.reports[0]);
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_event_log(
            trace.events.as_deref().unwrap_or_default(),
            BufWriter::new(file),
        )?;
        written.push(path.to_path_buf());
    }
    Ok((summary, written))
}

/// Replicated summaries for every point of a sweep, in order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<(SimConfig, ReplicatedSummary)>> {
    spec.configs
        .iter()
        .map(|c| {
            replicate(c, spec.n_reps)
                .map(|s| (*c, s))
                .with_context(|| format!("simulating {c:?}"))
        })
        .collect()
}

fn mean_hw(iv: Option<Interval>) -> [String; 2] {
    [
        opt_num(iv.map(|i| i.mean)),
        opt_num(iv.map(|i| i.half_width)),
    ]
}

/// The plot table of a simulation figure.
pub fn figure_table(figure: Figure, points: &[(SimConfig, ReplicatedSummary)]) -> Table {
    let header: &[&str] = match figure {
        Figure::Splits => &["delay_s", "splits_per_day", "half_width", "n_reps"],
        Figure::Dwell => &["delay_s", "mean_dwell_s", "half_width", "n_reps"],
        Figure::Gamma => &["cv", "alpha", "gamma_hat", "half_width", "n_reps"],
        Figure::BigGamma => &[
            "cv",
            "alpha",
            "big_gamma_hat",
            "half_width",
            "theory",
            "n_reps",
        ],
        Figure::RevenueByNodes => &["n_nodes", "alpha", "R", "half_width", "n_reps"],
        Figure::SplitsByAlpha => &["alpha", "splits_per_day", "half_width", "n_reps"],
        Figure::MinerRevenue => &[
            "alpha",
            "pool_revenue",
            "pool_half_width",
            "honest_revenue",
            "honest_half_width",
            "n_reps",
        ],
        Figure::Revenue => &["alpha", "R", "half_width", "honest_R", "n_reps"],
        Figure::BlockRates => &[
            "alpha",
            "pool_rate",
            "pool_half_width",
            "honest_rate",
            "honest_half_width",
            "total_rate",
            "total_half_width",
            "n_reps",
        ],
    };
    let mut t = Table::new(header.iter().copied());
    for (c, s) in points {
        let alpha = num(c.pool_fraction);
        let reps = s.n_reps.to_string();
        let row: Vec<String> = match figure {
            Figure::Splits => [num(c.mean_delay_target)]
                .into_iter()
                .chain(mean_hw(Some(s.splits_per_day)))
                .chain([reps])
                .collect(),
            Figure::Dwell => [num(c.mean_delay_target)]
                .into_iter()
                .chain(mean_hw(Some(s.mean_dwell_s)))
                .chain([reps])
                .collect(),
            Figure::Gamma => [num(c.cv), alpha]
                .into_iter()
                .chain(mean_hw(s.gamma_hat))
                .chain([reps])
                .collect(),
            Figure::BigGamma => {
                let theory = s
                    .gamma_hat
                    .map(|g| c.pool_fraction + (1.0 - c.pool_fraction) * g.mean);
                [num(c.cv), alpha]
                    .into_iter()
                    .chain(mean_hw(s.big_gamma_hat))
                    .chain([opt_num(theory), reps])
                    .collect()
            }
            Figure::RevenueByNodes => [c.n_nodes.to_string(), alpha]
                .into_iter()
                .chain(mean_hw(Some(s.relative_pool_revenue)))
                .chain([reps])
                .collect(),
            Figure::SplitsByAlpha => [alpha]
                .into_iter()
                .chain(mean_hw(Some(s.splits_per_day)))
                .chain([reps])
                .collect(),
            Figure::MinerRevenue => [alpha]
                .into_iter()
                .chain(mean_hw(Some(s.pool_revenue_per_miner_hour)))
                .chain(mean_hw(Some(s.honest_revenue_per_miner_hour)))
                .chain([reps])
                .collect(),
            Figure::Revenue => [alpha]
                .into_iter()
                .chain(mean_hw(Some(s.relative_pool_revenue)))
                .chain([num(1.0 - s.relative_pool_revenue.mean), reps])
                .collect(),
            Figure::BlockRates => [alpha]
                .into_iter()
                .chain(mean_hw(Some(s.pool_blocks_per_hour)))
                .chain(mean_hw(Some(s.honest_blocks_per_hour)))
                .chain(mean_hw(Some(s.total_blocks_per_hour)))
                .chain([reps])
                .collect(),
        };
        t.push(row);
    }
    t
}

/// Power-law fit of splits per day against delay.
pub fn split_rate_fit(points: &[(SimConfig, ReplicatedSummary)]) -> Result<PowerLawFit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|(c, s)| (c.mean_delay_target, s.splits_per_day.mean))
        .collect();
    Ok(loglog_fit(&xy)?)
}

pub fn fit_table(fit: &PowerLawFit) -> Table {
    let mut t = Table::new(["coefficient", "exponent", "r_squared", "residual_sd"]);
    t.push(vec![
        num(fit.coefficient),
        num(fit.exponent),
        num(fit.r_squared),
        num(fit.residual_sd),
    ]);
    t
}

/// Runs a preset and writes its files into `out_dir`, named after the
/// preset: `<name>.csv` always, `<name>.dat` for gamma tables and figures,
/// and `<name>_fit.csv` for the split-rate figure.
pub fn reproduce(preset: Preset, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let name = preset.to_string();
    let mut written = Vec::new();
    match preset.experiment(seed) {
        Experiment::Markov(spec) => {
            written.push(write_file(
                out_dir,
                &format!("{name}.csv"),
                &markov_table(&spec)?.to_csv()?,
            )?);
        }
        Experiment::Gamma(spec) => {
            let t = gamma_table(&spec)?;
            written.push(write_file(out_dir, &format!("{name}.csv"), &t.to_csv()?)?);
            written.push(write_file(out_dir, &format!("{name}.dat"), &t.to_dat())?);
        }
        Experiment::Sweep(spec) => {
            let points = run_sweep(&spec)?;
            let t = figure_table(spec.figure, &points);
            written.push(write_file(out_dir, &format!("{name}.csv"), &t.to_csv()?)?);
            written.push(write_file(out_dir, &format!("{name}.dat"), &t.to_dat())?);
            if spec.figure == Figure::Splits {
                let fit = split_rate_fit(&points)?;
                written.push(write_file(
                    out_dir,
                    &format!("{name}_fit.csv"),
                    &fit_table(&fit).to_csv()?,
                )?);
            }
        }
    }
    Ok(written)
}
