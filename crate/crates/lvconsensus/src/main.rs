//! Command-line front end over the library: Monte Carlo estimates, gap
//! sweeps, threshold search, coupling verification, dominating-walker
//! statistics, exact grid solving, mean-field densities, and single
//! trajectory dumps.
//!
//! Conventions shared by every subcommand:
//!
//! * `--spec` takes either an inline `key=val,...` string (detected by the
//!   presence of `=`) or a path to a file in the same format.
//! * Primary data goes to `--out` when given, stdout otherwise. Summaries,
//!   warnings, and `PASS`/`FAIL` assertion verdicts go to stderr so piped
//!   data stays clean.
//! * Exit codes: 0 success, 2 invalid arguments or configuration, 3 a failed
//!   `--assert-*` check or an unbracketed threshold search, 1 I/O failure.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use lvconsensus::birth_death::{default_nice_cap, dominating_chain, run_nice_chain};
use lvconsensus::coupling::{check_domination_premises, coupled_run, CouplingOptions};
use lvconsensus::error::{Error, Result};
use lvconsensus::exact::{exact_rho, ExactGrid, ExactOptions};
use lvconsensus::experiments::{
    estimate_rho_with, find_threshold, init_for_gap, sweep, write_sweep_csv, Estimate,
    EstimateOptions, GapRule, Kinetics, SweepPlan, SweepRow, Welford,
};
use lvconsensus::model::{Config, ModelSpec};
use lvconsensus::ode::ode_trajectory;
use lvconsensus::rng::TrialStream;
use lvconsensus::simulate::{run_with, write_dump_line, TrajectoryStats};

#[derive(Parser)]
#[command(
    name = "lvconsensus",
    version,
    about = "Two-species stochastic competitive Lotka-Volterra toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimate of the majority-win probability.
    Estimate(EstimateArgs),
    /// The same estimate across a list of population sizes with a gap rule.
    Sweep(SweepArgs),
    /// Bisection search for the smallest reliably winning initial gap.
    Threshold(ThresholdArgs),
    /// Verify the domination premises and run the coupled pair/walker.
    CoupleCheck(CoupleCheckArgs),
    /// Statistics of the dominating birth-death walker.
    NiceChain(NiceChainArgs),
    /// Exact win probabilities and mean consensus times on a truncated grid.
    Exact(ExactArgs),
    /// Deterministic mean-field densities for a neutral spec.
    Ode(OdeArgs),
    /// One jump-chain trajectory, optionally dumped event by event.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Model spec: inline `key=val,...` or a path to a spec file.
    #[arg(long)]
    spec: String,
    /// Base seed for the per-trial random streams.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker thread count (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
    /// Write primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KineticsArg {
    /// Discrete jump chain (event counting).
    Jump,
    /// Exponential holding times with extinction-order tracking.
    Gillespie,
}

impl From<KineticsArg> for Kinetics {
    fn from(value: KineticsArg) -> Kinetics {
        match value {
            KineticsArg::Jump => Kinetics::JumpChain,
            KineticsArg::Gillespie => Kinetics::Gillespie,
        }
    }
}

#[derive(Args)]
#[command(group(ArgGroup::new("start").required(true).args(["init", "n"])))]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial state `x0,x1`.
    #[arg(long, value_parser = parse_config)]
    init: Option<Config>,
    /// Population size; combine with --gap to derive the initial state.
    #[arg(long, requires = "gap")]
    n: Option<u64>,
    /// Gap rule `fixed:D|logsq:C|sqrtnlogn:C|sqrtn:C|sqrtlogn:C`.
    #[arg(long, value_parser = parse_gap_rule, requires = "n")]
    gap: Option<GapRule>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Per-trial step cap (default scales with the population).
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, value_enum, default_value_t = KineticsArg::Jump)]
    kinetics: KineticsArg,
    /// Assert that the 99% confidence interval contains this value.
    #[arg(long, value_name = "RHO")]
    assert_ci_contains: Option<f64>,
    /// Assert rho_hat >= RHO.
    #[arg(long, value_name = "RHO")]
    assert_rho_min: Option<f64>,
    /// Assert rho_hat <= RHO.
    #[arg(long, value_name = "RHO")]
    assert_rho_max: Option<f64>,
    /// Assert (1 - rho_hat) >= hit_tie_freq/2 - SIGMAS joint standard errors.
    #[arg(long, value_name = "SIGMAS")]
    assert_tie_failure: Option<f64>,
    /// Assert the minority outlives the majority in at least this fraction
    /// of completed trials (needs --kinetics gillespie).
    #[arg(long, value_name = "P")]
    assert_outlives_min: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated population sizes, one sweep cell each.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    /// Gap rule `fixed:D|logsq:C|sqrtnlogn:C|sqrtn:C|sqrtlogn:C`.
    #[arg(long, value_parser = parse_gap_rule)]
    gap: GapRule,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, value_enum, default_value_t = KineticsArg::Jump)]
    kinetics: KineticsArg,
    /// Assert mean_T / n stays inside LO,HI for every cell.
    #[arg(long, value_parser = parse_band, value_name = "LO,HI")]
    assert_t_over_n: Option<(f64, f64)>,
    /// Assert mean_T(2n) / mean_T(n) inside LO,HI for every doubling pair.
    #[arg(long, value_parser = parse_band, value_name = "LO,HI")]
    assert_t_ratio: Option<(f64, f64)>,
    /// Assert mean_J <= SLACK * c * ln n with c fitted at the first cell.
    #[arg(long, value_name = "SLACK")]
    assert_j_logfit: Option<f64>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Population size.
    #[arg(long)]
    n: u64,
    /// Win-probability target for the lower confidence bound.
    #[arg(long, default_value_t = 0.99)]
    target: f64,
    /// Trials per probe.
    #[arg(long, default_value_t = 2_000)]
    trials: u64,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Assert the found threshold gap is <= DELTA.
    #[arg(long, value_name = "DELTA")]
    assert_delta_max: Option<u64>,
    /// Assert the found threshold gap is >= DELTA.
    #[arg(long, value_name = "DELTA")]
    assert_delta_min: Option<u64>,
}

#[derive(Args)]
struct CoupleCheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Check the domination premises exactly at every state in
    /// [1,AMAX] x [1,AMAX].
    #[arg(long, value_name = "AMAX")]
    premises_amax: Option<u64>,
    /// Number of coupled pair/walker runs.
    #[arg(long)]
    runs: Option<u64>,
    /// Initial pair state `x0,x1` (required with --runs).
    #[arg(long, value_parser = parse_config, requires = "runs")]
    init: Option<Config>,
    /// Shared step cap per coupled run (default scales with the population).
    #[arg(long)]
    cap: Option<u64>,
    /// Credit only competitive events as good when checking the down rule.
    #[arg(long)]
    good_competitive_only: bool,
    /// Assert zero violations in whatever phases ran.
    #[arg(long)]
    assert_zero_violations: bool,
}

#[derive(Args)]
struct NiceChainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated start states for the walker.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<u64>,
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    /// Step cap per run (default scales with the start state).
    #[arg(long)]
    cap: Option<u64>,
    /// Assert mean steps / n stays inside LO,HI for every start state.
    #[arg(long, value_parser = parse_band, value_name = "LO,HI")]
    assert_e_over_n: Option<(f64, f64)>,
    /// Assert mean births <= SLACK * c * ln n with c fitted at the first n.
    #[arg(long, value_name = "SLACK")]
    assert_b_logfit: Option<f64>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 64)]
    xmax: u32,
    /// Convergence tolerance for the sweep-and-verify passes.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<u64>,
    /// Skip the mean consensus time solve.
    #[arg(long)]
    skip_mean_t: bool,
    /// Skip the half-grid truncation sensitivity check.
    #[arg(long)]
    skip_truncation_check: bool,
    /// Report the solution at one state `a,b`.
    #[arg(long, value_parser = parse_config)]
    at: Option<Config>,
    /// Assert |rho(a,b) - a/(a+b)| <= TOL for all 1 <= b <= a <= AMAX.
    #[arg(long, value_parser = parse_amax_tol, value_name = "AMAX,TOL")]
    assert_aab: Option<(u64, f64)>,
}

#[derive(Args)]
struct OdeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial density of species 0.
    #[arg(long)]
    x0: f64,
    /// Initial density of species 1.
    #[arg(long)]
    x1: f64,
    /// Output sampling interval.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Initial state `x0,x1` with the majority in slot 0.
    #[arg(long, value_parser = parse_config)]
    init: Config,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Dump one line per event instead of the final statistics.
    #[arg(long)]
    dump: bool,
}

fn parse_config(text: &str) -> std::result::Result<Config, String> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `x0,x1`, got `{text}`"))?;
    let x0 = a.trim().parse().map_err(|_| format!("bad count `{a}`"))?;
    let x1 = b.trim().parse().map_err(|_| format!("bad count `{b}`"))?;
    Ok(Config::new(x0, x1))
}

fn parse_gap_rule(text: &str) -> std::result::Result<GapRule, String> {
    GapRule::parse(text).map_err(|e| e.to_string())
}

fn parse_band(text: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `LO,HI`, got `{text}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound `{hi}`"))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(format!("need finite LO <= HI, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn parse_amax_tol(text: &str) -> std::result::Result<(u64, f64), String> {
    let (amax, tol) = text
        .split_once(',')
        .ok_or_else(|| format!("expected `AMAX,TOL`, got `{text}`"))?;
    let amax: u64 = amax
        .trim()
        .parse()
        .map_err(|_| format!("bad AMAX `{amax}`"))?;
    let tol: f64 = tol.trim().parse().map_err(|_| format!("bad TOL `{tol}`"))?;
    if !(tol.is_finite() && tol > 0.0 && amax >= 1) {
        return Err(format!("need AMAX >= 1 and TOL > 0, got {amax},{tol}"));
    }
    Ok((amax, tol))
}

/// One assertion verdict, printed to stderr as `PASS name: detail`.
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn load_spec(text: &str) -> Result<ModelSpec> {
    if text.contains('=') {
        ModelSpec::parse(text)
    } else {
        ModelSpec::parse(&fs::read_to_string(text)?)
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 1,
        // A search that cannot bracket its target and a replay that fails to
        // reproduce are acceptance failures, not configuration mistakes.
        Error::NotBracketed { .. } | Error::ReplayMismatch { .. } => 3,
        _ => 2,
    }
}

fn warn_censoring(est: &Estimate, label: &str) {
    if est.excessive_censoring() {
        eprintln!(
            "warning: {label}: {} of {} trials censored (> 1 in 1000); \
             rho_hat excludes them and may be biased",
            est.censored, est.trials
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(checks) => {
            let mut failed = false;
            for c in &checks {
                eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed |= !c.pass;
            }
            if failed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(command: Command) -> Result<Vec<Check>> {
    let common = match &command {
        Command::Estimate(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Threshold(a) => &a.common,
        Command::CoupleCheck(a) => &a.common,
        Command::NiceChain(a) => &a.common,
        Command::Exact(a) => &a.common,
        Command::Ode(a) => &a.common,
        Command::Simulate(a) => &a.common,
    };
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::SpecParse(format!("thread pool: {e}")))?;
    }
    match command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Threshold(args) => cmd_threshold(args),
        Command::CoupleCheck(args) => cmd_couple_check(args),
        Command::NiceChain(args) => cmd_nice_chain(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Ode(args) => cmd_ode(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let init = match (args.init, args.n, args.gap) {
        (Some(init), _, _) => init,
        (None, Some(n), Some(rule)) => init_for_gap(n, rule.delta0(n))?,
        _ => unreachable!("clap enforces the start group"),
    };
    let options = EstimateOptions {
        max_steps: args.max_steps,
        kinetics: args.kinetics.into(),
    };
    let est = estimate_rho_with(&spec, init, args.trials, args.common.seed, 0, &options)?;
    warn_censoring(&est, "estimate");
    eprintln!(
        "estimate: init ({}, {}) trials {} rho_hat {:.6} ci [{:.6}, {:.6}] censored {}",
        init.x0, init.x1, est.trials, est.rho_hat, est.ci_low, est.ci_high, est.censored
    );

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => {
            let rows = vec![SweepRow {
                n: init.total(),
                delta0: init.gap().unsigned_abs(),
                result: Ok(est),
            }];
            write_sweep_csv(&rows, &mut out)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(
                &mut out,
                &json!({
                    "n": init.total(),
                    "delta0": init.gap().unsigned_abs(),
                    "estimate": est,
                }),
            )
            .map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    let mut checks = Vec::new();
    if let Some(target) = args.assert_ci_contains {
        checks.push(check(
            "ci-contains",
            est.ci_low <= target && target <= est.ci_high,
            format!("{target} vs [{:.6}, {:.6}]", est.ci_low, est.ci_high),
        ));
    }
    if let Some(bound) = args.assert_rho_min {
        checks.push(check(
            "rho-min",
            est.rho_hat >= bound,
            format!("rho_hat {:.6} vs bound {bound}", est.rho_hat),
        ));
    }
    if let Some(bound) = args.assert_rho_max {
        checks.push(check(
            "rho-max",
            est.rho_hat <= bound,
            format!("rho_hat {:.6} vs bound {bound}", est.rho_hat),
        ));
    }
    if let Some(sigmas) = args.assert_tie_failure {
        let n = est.completed() as f64;
        let rho = est.rho_hat;
        let tie = est.hit_tie_freq;
        let se = (rho * (1.0 - rho) / n + tie * (1.0 - tie) / (4.0 * n)).sqrt();
        let lhs = 1.0 - rho;
        let rhs = 0.5 * tie - sigmas * se;
        checks.push(check(
            "tie-failure",
            lhs >= rhs,
            format!(
                "1 - rho_hat = {lhs:.6} vs tie_freq/2 - {sigmas} se = {rhs:.6} (tie_freq {tie:.6})"
            ),
        ));
    }
    if let Some(bound) = args.assert_outlives_min {
        let outlived = est.minority_outlived.ok_or_else(|| {
            Error::SpecParse("--assert-outlives-min needs --kinetics gillespie".into())
        })?;
        let freq = outlived as f64 / est.completed() as f64;
        checks.push(check(
            "outlives-min",
            freq >= bound,
            format!("minority outlived majority in {freq:.6} of trials vs bound {bound}"),
        ));
    }
    Ok(checks)
}

fn cmd_sweep(args: SweepArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let plan = SweepPlan {
        spec,
        n_values: args.n.clone(),
        gap_rule: args.gap,
        trials: args.trials,
        base_seed: args.common.seed,
        options: EstimateOptions {
            max_steps: args.max_steps,
            kinetics: args.kinetics.into(),
        },
    };
    let rows = sweep(&plan);

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => write_sweep_csv(&rows, &mut out)?,
        Format::Json => {
            let cells: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| match &row.result {
                    Ok(est) => json!({"n": row.n, "delta0": row.delta0, "estimate": est}),
                    Err(e) => json!({"n": row.n, "delta0": row.delta0, "error": e.to_string()}),
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &cells).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    let mut first_error = None;
    for row in &rows {
        match &row.result {
            Ok(est) => {
                warn_censoring(est, &format!("sweep n={}", row.n));
                eprintln!(
                    "sweep: n {} delta0 {} rho_hat {:.6} mean_T {:.3} mean_J {:.3}",
                    row.n, row.delta0, est.rho_hat, est.mean_t, est.mean_j
                );
            }
            Err(e) => {
                eprintln!("sweep: n {} failed: {e}", row.n);
                if first_error.is_none() {
                    first_error = Some(e.to_string());
                }
            }
        }
    }
    if let Some(detail) = first_error {
        return Err(Error::SpecParse(format!("sweep cell failed: {detail}")));
    }

    let cells: Vec<(u64, &Estimate)> = rows
        .iter()
        .map(|r| (r.n, r.result.as_ref().expect("errors returned above")))
        .collect();
    let mut checks = Vec::new();
    if let Some((lo, hi)) = args.assert_t_over_n {
        let ratios: Vec<f64> = cells.iter().map(|(n, e)| e.mean_t / *n as f64).collect();
        let pass = ratios.iter().all(|r| (lo..=hi).contains(r));
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        checks.push(check(
            "t-over-n",
            pass,
            format!("mean_T/n in [{min:.4}, {max:.4}] vs band [{lo}, {hi}]"),
        ));
    }
    if let Some((lo, hi)) = args.assert_t_ratio {
        let mut worst: Option<f64> = None;
        let mut pairs = 0;
        let mut pass = true;
        for pair in cells.windows(2) {
            let ((n1, e1), (n2, e2)) = (pair[0], pair[1]);
            if n2 == 2 * n1 {
                pairs += 1;
                let ratio = e2.mean_t / e1.mean_t;
                if !(lo..=hi).contains(&ratio) {
                    pass = false;
                }
                let dev = (ratio - 2.0).abs();
                if worst.map_or(true, |w| dev > (w - 2.0).abs()) {
                    worst = Some(ratio);
                }
            }
        }
        if pairs == 0 {
            checks.push(check(
                "t-ratio",
                false,
                "no doubling pairs in the --n list".into(),
            ));
        } else {
            checks.push(check(
                "t-ratio",
                pass,
                format!(
                    "{pairs} doubling pairs, extreme ratio {:.4} vs band [{lo}, {hi}]",
                    worst.unwrap()
                ),
            ));
        }
    }
    if let Some(slack) = args.assert_j_logfit {
        checks.push(log_fit_check(
            "j-logfit",
            slack,
            &cells
                .iter()
                .map(|(n, e)| (*n, e.mean_j))
                .collect::<Vec<_>>(),
        ));
    }
    Ok(checks)
}

/// Fits `c = value / ln n` at the first point and checks
/// `value <= slack * c * ln n` everywhere.
fn log_fit_check(name: &'static str, slack: f64, points: &[(u64, f64)]) -> Check {
    let (n0, v0) = points[0];
    let c = v0 / (n0 as f64).ln();
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    for &(n, v) in points {
        let bound = slack * c * (n as f64).ln();
        let ratio = if bound > 0.0 {
            v / bound
        } else if v == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if v > bound {
            pass = false;
        }
    }
    check(
        name,
        pass,
        format!("c {c:.4} fitted at n {n0}; worst value/bound ratio {worst:.4}"),
    )
}

fn cmd_threshold(args: ThresholdArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let options = EstimateOptions {
        max_steps: args.max_steps,
        kinetics: Kinetics::JumpChain,
    };
    let search = find_threshold(
        &spec,
        args.n,
        args.target,
        args.common.seed,
        args.trials,
        &options,
    )?;
    eprintln!(
        "threshold: delta_star {} ({} probes, {} monotonicity violations)",
        search.delta_star,
        search.probes.len(),
        search.monotone_violations
    );

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => {
            let mut probes = search.probes.clone();
            probes.sort_by_key(|p| p.delta0);
            writeln!(out, "delta0,rho_hat,ci_low,ci_high")?;
            for p in &probes {
                writeln!(
                    out,
                    "{},{:.16e},{:.16e},{:.16e}",
                    p.delta0, p.rho_hat, p.ci_low, p.ci_high
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &search).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    let mut checks = Vec::new();
    if let Some(bound) = args.assert_delta_max {
        checks.push(check(
            "delta-max",
            search.delta_star <= bound,
            format!("delta_star {} vs bound {bound}", search.delta_star),
        ));
    }
    if let Some(bound) = args.assert_delta_min {
        checks.push(check(
            "delta-min",
            search.delta_star >= bound,
            format!("delta_star {} vs bound {bound}", search.delta_star),
        ));
    }
    Ok(checks)
}

fn cmd_couple_check(args: CoupleCheckArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    if args.premises_amax.is_none() && args.runs.is_none() {
        return Err(Error::SpecParse(
            "couple-check needs --premises-amax and/or --runs".into(),
        ));
    }
    let mut checks = Vec::new();
    let mut kv: Vec<(String, String)> = Vec::new();

    if let Some(amax) = args.premises_amax {
        let report = check_domination_premises(&spec, amax)?;
        eprintln!(
            "premises: {} states checked up to {}, {} violations",
            report.states_checked, report.amax, report.violations
        );
        for v in &report.examples {
            eprintln!(
                "premises: violation at ({}, {}): {} = {:.6} vs bound {:.6}",
                v.x0, v.x1, v.which, v.actual, v.bound
            );
        }
        kv.push(("premises_amax".into(), report.amax.to_string()));
        kv.push(("premises_states_checked".into(), report.states_checked.to_string()));
        kv.push(("premises_violations".into(), report.violations.to_string()));
        if args.assert_zero_violations {
            checks.push(check(
                "premises-zero-violations",
                report.violations == 0,
                format!(
                    "{} violations across {} states",
                    report.violations, report.states_checked
                ),
            ));
        }
    }

    if let Some(runs) = args.runs {
        let init = args.init.expect("clap ties --init to --runs");
        if runs == 0 {
            return Err(Error::ZeroTrials);
        }
        let options = CouplingOptions {
            cap: args.cap,
            good_competitive_only: args.good_competitive_only,
            snapshot_limit: 0,
        };
        let seed = args.common.seed;
        let reports: Vec<Result<_>> = (0..runs)
            .into_par_iter()
            .map(|trial| {
                let mut stream = TrialStream::new(seed, 0, trial);
                coupled_run(&spec, init, &mut stream, options.clone())
            })
            .collect();
        let mut violations_min = 0u64;
        let mut violations_j = 0u64;
        let mut runs_with_violations = 0u64;
        let mut censored = 0u64;
        let mut steps = Welford::default();
        let mut meetings = Welford::default();
        for report in reports {
            let report = report?;
            violations_min += report.violations_min;
            violations_j += report.violations_j;
            if report.violations_min + report.violations_j > 0 {
                runs_with_violations += 1;
            }
            if report.censored {
                censored += 1;
            }
            steps.push(report.steps as f64);
            meetings.push(report.tau.len() as f64);
        }
        eprintln!(
            "coupling: {runs} runs from ({}, {}), {} with violations \
             (min {}, J {}), {} censored, mean steps {:.1}, mean meetings {:.2}",
            init.x0,
            init.x1,
            runs_with_violations,
            violations_min,
            violations_j,
            censored,
            steps.mean(),
            meetings.mean()
        );
        kv.push(("runs".into(), runs.to_string()));
        kv.push(("violations_min".into(), violations_min.to_string()));
        kv.push(("violations_j".into(), violations_j.to_string()));
        kv.push(("runs_with_violations".into(), runs_with_violations.to_string()));
        kv.push(("censored".into(), censored.to_string()));
        kv.push(("mean_steps".into(), format!("{:.16e}", steps.mean())));
        kv.push(("mean_meetings".into(), format!("{:.16e}", meetings.mean())));
        if args.assert_zero_violations {
            checks.push(check(
                "coupling-zero-violations",
                violations_min == 0 && violations_j == 0,
                format!(
                    "min violations {violations_min}, J violations {violations_j} over {runs} runs"
                ),
            ));
        }
    }

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => {
            writeln!(out, "key,value")?;
            for (k, v) in &kv {
                writeln!(out, "{k},{v}")?;
            }
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = kv
                .iter()
                .map(|(k, v)| (k.clone(), json!(v)))
                .collect();
            serde_json::to_writer_pretty(&mut out, &map).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(checks)
}

fn cmd_nice_chain(args: NiceChainArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let chain = dominating_chain(&spec)?;
    if args.runs == 0 {
        return Err(Error::ZeroTrials);
    }
    struct Row {
        n: u64,
        censored: u64,
        steps: Welford,
        births: Welford,
        max_state: Welford,
    }
    let seed = args.common.seed;
    let mut rows = Vec::new();
    for (cell, &n) in args.n.iter().enumerate() {
        let cap = args.cap.unwrap_or_else(|| default_nice_cap(n));
        let stats: Vec<_> = (0..args.runs)
            .into_par_iter()
            .map(|trial| {
                let mut stream = TrialStream::new(seed, cell as u64, trial);
                run_nice_chain(&chain, n, cap, &mut stream)
            })
            .collect();
        let mut row = Row {
            n,
            censored: 0,
            steps: Welford::default(),
            births: Welford::default(),
            max_state: Welford::default(),
        };
        for s in stats {
            if s.censored {
                row.censored += 1;
            }
            row.steps.push(s.steps as f64);
            row.births.push(s.births as f64);
            row.max_state.push(s.max_state as f64);
        }
        eprintln!(
            "nice-chain: n {} mean steps {:.1} (steps/n {:.3}) mean births {:.3} censored {}",
            n,
            row.steps.mean(),
            row.steps.mean() / n as f64,
            row.births.mean(),
            row.censored
        );
        rows.push(row);
    }

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => {
            writeln!(
                out,
                "n,runs,censored,mean_steps,se_steps,mean_births,se_births,mean_max_state"
            )?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.n,
                    args.runs,
                    r.censored,
                    r.steps.mean(),
                    r.steps.standard_error(),
                    r.births.mean(),
                    r.births.standard_error(),
                    r.max_state.mean()
                )?;
            }
        }
        Format::Json => {
            let cells: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "n": r.n,
                        "runs": args.runs,
                        "censored": r.censored,
                        "mean_steps": r.steps.mean(),
                        "se_steps": r.steps.standard_error(),
                        "mean_births": r.births.mean(),
                        "se_births": r.births.standard_error(),
                        "mean_max_state": r.max_state.mean(),
                    })
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &cells).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    let mut checks = Vec::new();
    let any_censored = rows.iter().any(|r| r.censored > 0);
    if let Some((lo, hi)) = args.assert_e_over_n {
        let ratios: Vec<f64> = rows.iter().map(|r| r.steps.mean() / r.n as f64).collect();
        let pass = !any_censored && ratios.iter().all(|r| (lo..=hi).contains(r));
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        checks.push(check(
            "e-over-n",
            pass,
            format!(
                "steps/n in [{min:.4}, {max:.4}] vs band [{lo}, {hi}]{}",
                if any_censored { "; censored runs present" } else { "" }
            ),
        ));
    }
    if let Some(slack) = args.assert_b_logfit {
        let points: Vec<(u64, f64)> = rows.iter().map(|r| (r.n, r.births.mean())).collect();
        let mut c = log_fit_check("b-logfit", slack, &points);
        if any_censored {
            c.pass = false;
            c.detail.push_str("; censored runs present");
        }
        checks.push(c);
    }
    Ok(checks)
}

fn cmd_exact(args: ExactArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let mut options = ExactOptions::default();
    if let Some(tol) = args.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::SpecParse(format!("--tol must be positive, got {tol}")));
        }
        options.tol = tol;
    }
    if let Some(max_sweeps) = args.max_sweeps {
        if max_sweeps == 0 {
            return Err(Error::SpecParse("--max-sweeps must be at least 1".into()));
        }
        options.max_sweeps = max_sweeps;
    }
    options.compute_mean_t = !args.skip_mean_t;
    options.truncation_check = !args.skip_truncation_check;
    if let Some(at) = args.at {
        if at.x0 > args.xmax as u64 || at.x1 > args.xmax as u64 {
            return Err(Error::SpecParse(format!(
                "--at ({}, {}) is outside the grid 0..={}",
                at.x0, at.x1, args.xmax
            )));
        }
    }
    if let Some((amax, _)) = args.assert_aab {
        if amax > args.xmax as u64 {
            return Err(Error::SpecParse(format!(
                "--assert-aab box {amax} exceeds --xmax {}",
                args.xmax
            )));
        }
    }

    let grid = exact_rho(&spec, args.xmax, &options)?;
    eprintln!(
        "exact: xmax {} converged in {} sweeps, residual {:.3e}{}{}",
        grid.xmax,
        grid.sweeps,
        grid.residual,
        match grid.mean_t_residual {
            Some(r) => format!(", mean_t residual {r:.3e}"),
            None => String::new(),
        },
        match grid.truncation_gap {
            Some(g) => format!(", truncation gap {g:.3e}"),
            None => String::new(),
        }
    );
    if let Some(at) = args.at {
        let (a, b) = (at.x0 as u32, at.x1 as u32);
        eprintln!(
            "exact: rho({a}, {b}) = {:.12}{}",
            grid.rho(a, b),
            match grid.mean_t(a, b) {
                Some(t) => format!(", mean consensus time {t:.12}"),
                None => String::new(),
            }
        );
    }

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => grid.write_csv(&mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &exact_json(&grid, args.at))
                .map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    let mut checks = Vec::new();
    if let Some((amax, tol)) = args.assert_aab {
        let mut worst = 0.0f64;
        let mut worst_at = (0u32, 0u32);
        for a in 1..=amax as u32 {
            for b in 1..=a {
                let diff = (grid.rho(a, b) - a as f64 / (a + b) as f64).abs();
                if diff > worst {
                    worst = diff;
                    worst_at = (a, b);
                }
            }
        }
        checks.push(check(
            "aab",
            worst <= tol,
            format!(
                "max |rho - a/(a+b)| = {worst:.3e} at ({}, {}) vs tol {tol:.1e} over 1 <= b <= a <= {amax}",
                worst_at.0, worst_at.1
            ),
        ));
    }
    Ok(checks)
}

/// JSON form of an exact solve. Grids bigger than 256 report metadata only;
/// the CSV format streams any size.
fn exact_json(grid: &ExactGrid, at: Option<Config>) -> serde_json::Value {
    let mut value = json!({
        "xmax": grid.xmax,
        "sweeps": grid.sweeps,
        "residual": grid.residual,
        "mean_t_residual": grid.mean_t_residual,
        "truncation_gap": grid.truncation_gap,
    });
    if let Some(c) = at {
        let (a, b) = (c.x0 as u32, c.x1 as u32);
        value["at"] = json!({
            "a": a,
            "b": b,
            "rho": grid.rho(a, b),
            "mean_t": grid.mean_t(a, b),
        });
    }
    if grid.xmax <= 256 {
        let rho: Vec<Vec<f64>> = (0..=grid.xmax)
            .map(|a| (0..=grid.xmax).map(|b| grid.rho(a, b)).collect())
            .collect();
        value["rho"] = json!(rho);
        if grid.mean_t(0, 0).is_some() {
            let mean_t: Vec<Vec<f64>> = (0..=grid.xmax)
                .map(|a| {
                    (0..=grid.xmax)
                        .map(|b| grid.mean_t(a, b).expect("solved grid is complete"))
                        .collect()
                })
                .collect();
            value["mean_t"] = json!(mean_t);
        }
    }
    value
}

fn cmd_ode(args: OdeArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let traj = ode_trajectory(&spec, args.x0, args.x1, args.dt, args.horizon)?;
    eprintln!(
        "ode: {} points, {} halvings (dt_used {:.3e}), truncated {}",
        traj.times.len(),
        traj.halvings,
        traj.dt_used,
        traj.truncated
    );

    let mut out = open_out(&args.common.out)?;
    match args.common.format {
        Format::Csv => {
            writeln!(out, "t,x0,x1")?;
            for idx in 0..traj.times.len() {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e}",
                    traj.times[idx], traj.x0[idx], traj.x1[idx]
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer_pretty(
                &mut out,
                &json!({
                    "times": traj.times,
                    "x0": traj.x0,
                    "x1": traj.x1,
                    "truncated": traj.truncated,
                    "halvings": traj.halvings,
                    "dt_used": traj.dt_used,
                }),
            )
            .map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(Vec::new())
}

fn cmd_simulate(args: SimulateArgs) -> Result<Vec<Check>> {
    let spec = load_spec(&args.common.spec)?;
    let max_steps = args
        .max_steps
        .unwrap_or_else(|| lvconsensus::simulate::default_max_steps(args.init.total()));
    let mut stream = TrialStream::new(args.common.seed, 0, 0);
    let mut out = open_out(&args.common.out)?;

    let stats: TrajectoryStats = if args.dump {
        let mut write_error: Option<io::Error> = None;
        let stats = run_with(
            &spec,
            args.init,
            &mut stream,
            max_steps,
            |step, kind, after, class| {
                if write_error.is_none() {
                    if let Err(e) = write_dump_line(&mut out, step, kind, after, class) {
                        write_error = Some(e);
                    }
                }
            },
        )?;
        if let Some(e) = write_error {
            return Err(Error::Io(e));
        }
        stats
    } else {
        lvconsensus::simulate::run_to_consensus(&spec, args.init, &mut stream, max_steps)?
    };

    eprintln!(
        "simulate: outcome {:?} after {} steps ({} individual, {} competitive, {} bad), \
         peak population {}",
        stats.outcome,
        stats.steps,
        stats.individual,
        stats.competitive,
        stats.bad_noncomp,
        stats.max_total
    );
    if !args.dump {
        match args.common.format {
            Format::Csv => {
                writeln!(out, "key,value")?;
                writeln!(out, "steps,{}", stats.steps)?;
                writeln!(out, "outcome,{:?}", stats.outcome)?;
                writeln!(out, "individual,{}", stats.individual)?;
                writeln!(out, "competitive,{}", stats.competitive)?;
                writeln!(out, "bad_noncomp,{}", stats.bad_noncomp)?;
                writeln!(out, "f_total,{}", stats.f_total)?;
                writeln!(out, "f_individual,{}", stats.f_individual)?;
                writeln!(out, "f_competitive,{}", stats.f_competitive)?;
                writeln!(out, "hit_tie,{}", stats.hit_tie)?;
                writeln!(out, "max_total,{}", stats.max_total)?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, &stats).map_err(io::Error::from)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(Vec::new())
}
