//! `coalesce`: run experiments from JSON configs and write CSV/JSON files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use coalescence::asymptotics::{run_experiment, ExperimentConfig, ExperimentKind};
use coalescence::dynamics::{dynamics_table, iterate_psi, k_one, k_star};
use coalescence::exact_chain::tails;
use coalescence::report::{fmt_f64, summary_line, Csv};
use coalescence::simulate::{batch_runs, runs_csv, summarize};
use coalescence::tail_bounds::{b_star, chernoff_minus, chernoff_plus, curvature_check, lower_bound_et};
use coalescence::variational::{minimize_f_over_dc2, ordering_chain};
use coalescence::{DistributionSpec, Execution, ProbabilityVector, SimConfig, TriangularKernel};

#[derive(Parser, Debug)]
#[command(name = "coalesce", version, about = "Nonuniform balls-into-boxes coalescence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Replicate count; overrides the config.
    #[arg(long, global = true)]
    replicates: Option<usize>,

    /// Suppress the summary line.
    #[arg(long, global = true)]
    quiet: bool,

    /// Worker threads (default: all cores, or $THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Collision moments of the distribution.
    Moments,
    /// Exact transition kernel and E[T(m)].
    Exact,
    /// Monte Carlo replicates of the process.
    Simulate,
    /// F, Φ, Ψ and H on a grid, plus the deterministic Ψ trajectory.
    Dynamics,
    /// Ordering chain and the topheavy search over D(c2).
    Variational,
    /// Chernoff tail bounds against the exact kernel, and the curvature checks.
    Bounds,
    /// Limit-law experiment.
    Limit,
    /// Threshold experiment.
    Threshold,
}

/// Config for the distribution-based subcommands.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    distribution: Option<DistributionSpec>,
    replicates: Option<usize>,
    seed: Option<u64>,
    b0: Option<usize>,
    thresholds: Vec<f64>,
    record_trajectory: bool,
    epsilon: Option<f64>,
    /// Ball counts for `dynamics`, `variational` and `bounds`.
    k: Vec<f64>,
    /// Horizon of the exact CDF of `T`, or of the Ψ iteration.
    t_max: Option<usize>,
    stop_at: Option<f64>,
    /// Restarts of the variational search.
    budget: Option<usize>,
}

const DEFAULT_REPLICATES: usize = 1000;
const DEFAULT_EPSILON: f64 = 0.2;

struct Ctx {
    cli: Cli,
    exec: Execution,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.cli.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    fn seed(&self, cfg: Option<u64>) -> u64 {
        self.cli.seed.or(cfg).unwrap_or(0)
    }

    fn replicates(&self, cfg: Option<usize>) -> usize {
        self.cli.replicates.or(cfg).unwrap_or(DEFAULT_REPLICATES)
    }
}

fn read_json(path: Option<&Path>) -> anyhow::Result<serde_json::Value> {
    let path = path.context("--config <path> is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run_config(ctx: &Ctx) -> anyhow::Result<(RunConfig, ProbabilityVector)> {
    let value = read_json(ctx.cli.config.as_deref())?;
    let cfg: RunConfig = serde_json::from_value(value).context("malformed config")?;
    let spec = cfg
        .distribution
        .as_ref()
        .context("config needs a \"distribution\" descriptor")?;
    let p = spec.build()?;
    Ok((cfg, p))
}

/// Integer ball counts requested by the config, defaulting to `1..=n`.
fn ball_counts(cfg: &RunConfig, n: usize) -> anyhow::Result<Vec<usize>> {
    if cfg.k.is_empty() {
        return Ok((1..=n).collect());
    }
    cfg.k
        .iter()
        .map(|&k| {
            if k.fract() != 0.0 || k < 1.0 || k > n as f64 {
                bail!("k = {k} must be an integer in 1..={n}");
            }
            Ok(k as usize)
        })
        .collect()
}

fn moments(ctx: &Ctx) -> anyhow::Result<String> {
    let (_, p) = run_config(ctx)?;
    let m = p.moments();
    let mut csv = Csv::new(&["n", "c2", "c3", "c2_uniform"]);
    csv.row([p.n().to_string(), fmt_f64(m.c2), fmt_f64(m.c3), fmt_f64(1.0 / p.n() as f64)]);
    ctx.write("moments.csv", &csv.finish())?;
    let mut weights = Csv::new(&["index", "weight"]);
    for (i, w) in p.weights().iter().enumerate() {
        weights.row([i.to_string(), fmt_f64(*w)]);
    }
    ctx.write("weights.csv", &weights.finish())?;
    Ok(summary_line(&[
        ("n", p.n().to_string()),
        ("c2", fmt_f64(m.c2)),
        ("c3", fmt_f64(m.c3)),
    ]))
}

fn exact(ctx: &Ctx) -> anyhow::Result<String> {
    let (cfg, p) = run_config(ctx)?;
    let n = p.n();
    let kernel = TriangularKernel::build_with(&p, ctx.exec);
    ctx.write("kernel.csv", &kernel.to_csv())?;
    let et = kernel.expected_t_all()?;
    let mut csv = Csv::new(&["m", "expected_T"]);
    for (m, v) in et.iter().enumerate() {
        csv.row([(m + 1).to_string(), fmt_f64(*v)]);
    }
    ctx.write("expected_t.csv", &csv.finish())?;
    if let Some(t_max) = cfg.t_max {
        let cdf = kernel.distribution_t(cfg.b0.unwrap_or(n), t_max)?;
        let mut csv = Csv::new(&["t", "cdf"]);
        for (t, v) in cdf.iter().enumerate() {
            csv.row([t.to_string(), fmt_f64(*v)]);
        }
        ctx.write("cdf.csv", &csv.finish())?;
    }
    let eps = cfg.epsilon.unwrap_or(DEFAULT_EPSILON);
    let c2 = p.moments().c2;
    let ks = k_star(c2, n, eps).clamp(1.0, n as f64);
    let k1 = k_one(c2, n, eps).clamp(1.0, ks);
    let phases = kernel.phase_decomposition(ks, k1)?;
    let mut csv = Csv::new(&["k_star", "k_one", "early", "middle", "late"]);
    csv.float_row(&[ks, k1, phases.early, phases.middle, phases.late]);
    ctx.write("phases.csv", &csv.finish())?;
    Ok(summary_line(&[
        ("n", n.to_string()),
        ("E[T]", fmt_f64(et[n - 1])),
    ]))
}

fn simulate(ctx: &Ctx) -> anyhow::Result<String> {
    let (cfg, p) = run_config(ctx)?;
    let n = p.n();
    let config = SimConfig::new(p)
        .with_b0(cfg.b0.unwrap_or(n))
        .with_replicates(ctx.replicates(cfg.replicates))
        .with_seed(ctx.seed(cfg.seed))
        .with_trajectory(cfg.record_trajectory)
        .with_thresholds(cfg.thresholds.clone());
    let runs = batch_runs(&config, ctx.exec)?;
    let summary = summarize(&config, &runs);
    ctx.write("runs.csv", &runs_csv(&config, &runs))?;
    ctx.write("summary.json", &summary.to_json())?;
    if cfg.record_trajectory {
        let mut csv = Csv::new(&["replicate", "t", "balls"]);
        for (i, run) in runs.iter().enumerate() {
            for (t, b) in run.trajectory.iter().flatten().enumerate() {
                csv.row([i.to_string(), t.to_string(), b.to_string()]);
            }
        }
        ctx.write("trajectories.csv", &csv.finish())?;
    }
    Ok(summary_line(&[
        ("replicates", config.replicates.to_string()),
        ("mean_T", fmt_f64(summary.t.mean)),
        ("stderr", summary.t.stderr.map_or_else(|| "NA".into(), fmt_f64)),
    ]))
}

fn dynamics(ctx: &Ctx) -> anyhow::Result<String> {
    let (cfg, p) = run_config(ctx)?;
    let n = p.n() as f64;
    let ks: Vec<f64> = if cfg.k.is_empty() {
        (1..=p.n()).map(|k| k as f64).collect()
    } else {
        cfg.k.clone()
    };
    let mut csv = Csv::new(&["k", "F", "Phi", "Psi", "H"]);
    for row in dynamics_table(&p, &ks) {
        csv.float_row(&[row.k, row.f, row.phi, row.psi, row.h]);
    }
    ctx.write("dynamics.csv", &csv.finish())?;
    let b0 = cfg.b0.map_or(n, |b| b as f64);
    let traj = iterate_psi(&p, b0, cfg.stop_at.unwrap_or(1.0), cfg.t_max.unwrap_or(100_000))?;
    let mut csv = Csv::new(&["t", "psi_iterate"]);
    for (t, v) in traj.values.iter().enumerate() {
        csv.row([t.to_string(), fmt_f64(*v)]);
    }
    ctx.write("psi_trajectory.csv", &csv.finish())?;
    Ok(summary_line(&[
        ("n", p.n().to_string()),
        ("psi_hitting_time", traj.hitting_time().map_or_else(|| "none".into(), |t| t.to_string())),
    ]))
}

fn variational(ctx: &Ctx) -> anyhow::Result<String> {
    let (cfg, p) = run_config(ctx)?;
    let n = p.n();
    if n < 3 {
        bail!("variational needs n >= 3");
    }
    let ks = if cfg.k.is_empty() { vec![2.0, 5.0, 10.0] } else { cfg.k.clone() };
    let budget = cfg.budget.unwrap_or(20);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed(cfg.seed));
    let c2 = p.moments().c2;
    let mut csv = Csv::new(&["k", "F_p", "F_r_min", "F_theta", "F_u", "ordered", "search_F_min"]);
    let mut all_ordered = true;
    for &k in &ks {
        let report = ordering_chain(&p, k, 1..=n - 2)?;
        let search = minimize_f_over_dc2(n, c2, k, budget, &mut rng)?;
        all_ordered &= report.ordered;
        csv.row([
            fmt_f64(k),
            fmt_f64(report.f_p),
            report.f_r_min.map_or_else(String::new, fmt_f64),
            fmt_f64(report.f_theta),
            fmt_f64(report.f_u),
            report.ordered.to_string(),
            fmt_f64(search.f_best),
        ]);
    }
    ctx.write("variational.csv", &csv.finish())?;
    Ok(summary_line(&[
        ("n", n.to_string()),
        ("k_values", ks.len().to_string()),
        ("ordered", all_ordered.to_string()),
    ]))
}

fn bounds(ctx: &Ctx) -> anyhow::Result<String> {
    let (cfg, p) = run_config(ctx)?;
    let n = p.n();
    let ks = ball_counts(&cfg, n)?;
    let kernel = TriangularKernel::build_with(&p, ctx.exec);
    let mut tail_csv = Csv::new(&["k", "b", "side", "exact_tail", "chernoff_bound"]);
    let mut violations = 0usize;
    for &k in &ks {
        let row = kernel.row(k);
        let center = coalescence::dynamics::phi(&p, k as f64);
        for b in 1..=k {
            let (below, above) = tails(row, b);
            let bf = b as f64;
            let (side, exact, bound) = if bf <= center {
                ("minus", below + row.prob(b), chernoff_minus(&p, k, bf)?)
            } else {
                ("plus", above + row.prob(b), chernoff_plus(&p, k, bf)?)
            };
            violations += usize::from(exact > bound);
            tail_csv.row([k.to_string(), b.to_string(), side.into(), fmt_f64(exact), fmt_f64(bound)]);
        }
    }
    ctx.write("tail_bounds.csv", &tail_csv.finish())?;

    let mut curve = Csv::new(&["k", "b", "z", "r", "h", "h_prime", "h_prime_fd", "h_second_fd", "chi", "passed"]);
    let mut failed = 0usize;
    for &k in ks.iter().filter(|&&k| k >= 2) {
        let bs = b_star(&p, k);
        let grid: Vec<f64> = (-8..=8).map(|i| bs + 0.25 * i as f64).collect();
        let report = curvature_check(&p, k, &grid);
        for pt in &report.points {
            failed += usize::from(!pt.passed());
            curve.row([
                k.to_string(),
                fmt_f64(pt.point.b),
                fmt_f64(pt.point.z),
                fmt_f64(pt.point.r),
                fmt_f64(pt.h),
                fmt_f64(pt.h_prime),
                fmt_f64(pt.h_prime_fd),
                fmt_f64(pt.h_second_fd),
                fmt_f64(pt.chi),
                pt.passed().to_string(),
            ]);
        }
    }
    ctx.write("curvature.csv", &curve.finish())?;

    let m = p.moments();
    let et = kernel.expected_t_all()?;
    let mut lb = Csv::new(&["m", "lower_bound", "expected_T"]);
    for (i, v) in et.iter().enumerate() {
        lb.row([(i + 1).to_string(), fmt_f64(lower_bound_et(m.c2, m.c3, i + 1)), fmt_f64(*v)]);
    }
    ctx.write("lower_bound.csv", &lb.finish())?;
    Ok(summary_line(&[
        ("n", n.to_string()),
        ("tail_violations", violations.to_string()),
        ("curvature_failures", failed.to_string()),
    ]))
}

fn experiment(ctx: &Ctx, kind: ExperimentKind) -> anyhow::Result<String> {
    let mut value = read_json(ctx.cli.config.as_deref())?;
    let obj = value.as_object_mut().context("config must be a JSON object")?;
    if !obj.contains_key("kind") {
        obj.insert("kind".into(), serde_json::to_value(kind)?);
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(value).context("malformed config")?;
    if let Some(seed) = ctx.cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = ctx.cli.replicates {
        cfg.replicates = r;
    }
    let (csv, verdict) = run_experiment(&cfg, ctx.exec)?;
    let stem = match cfg.kind {
        ExperimentKind::Limit => "limit",
        ExperimentKind::Threshold => "threshold",
        ExperimentKind::EarlyPhase => "early_phase",
    };
    ctx.write(&format!("{stem}.csv"), &csv)?;
    ctx.write(&format!("{stem}_verdict.json"), &verdict.to_json())?;
    let failed = verdict.checks.iter().filter(|c| !c.pass).count();
    Ok(summary_line(&[
        ("experiment", stem.into()),
        ("rows", cfg.ns.len().to_string()),
        ("verdict", if verdict.pass { "pass".into() } else { format!("{failed} checks outside band") }),
    ]))
}

fn configure_threads(requested: Option<usize>) -> anyhow::Result<Execution> {
    let from_env = match std::env::var("THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().context("THREADS must be a positive integer")?),
        Err(_) => None,
    };
    let threads = requested.or(from_env);
    if threads == Some(0) {
        bail!("thread count must be positive");
    }
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .context("configuring thread pool")?;
        }
        if threads == Some(1) {
            return Ok(Execution::Sequential);
        }
        Ok(Execution::Parallel)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(Execution::Sequential)
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<String> {
    let exec = configure_threads(cli.threads)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let command = cli.command;
    let ctx = Ctx { cli, exec };
    match command {
        Command::Moments => moments(&ctx),
        Command::Exact => exact(&ctx),
        Command::Simulate => simulate(&ctx),
        Command::Dynamics => dynamics(&ctx),
        Command::Variational => variational(&ctx),
        Command::Bounds => bounds(&ctx),
        Command::Limit => experiment(&ctx, ExperimentKind::Limit),
        Command::Threshold => experiment(&ctx, ExperimentKind::Threshold),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<coalescence::Error>())
        .any(coalescence::Error::is_numerical);
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let quiet = cli.quiet;
    match dispatch(cli) {
        Ok(line) => {
            if !quiet {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
