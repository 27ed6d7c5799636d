//! Monte Carlo estimation of the majority-win probability, gap sweeps over
//! population sizes, and bisection search for the winning-gap threshold.
//!
//! Estimates run independent trials with per-trial random streams keyed by
//! `(base seed, cell, trial)`, so results are bit-reproducible for fixed
//! inputs no matter how many threads participate: trials are folded in index
//! order after the parallel phase.
//!
//! Scoring convention: a trial where both species die in the same event ends
//! with no winner, and the estimator scores it as half a win,
//! `rho_hat = (wins + both_extinct / 2) / (trials - censored)`. This matches
//! the fair-coin corner of the exact solver and keeps `rho_hat` an unbiased
//! estimate of the quantity the closed forms describe; the raw `both_extinct`
//! count stays visible so the convention is auditable. Censored trials
//! (step cap hit before consensus) are excluded from the denominator and from
//! every trajectory mean.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Config, ModelSpec};
use crate::rng::TrialStream;
use crate::simulate::{default_max_steps, gillespie_run, run_to_consensus, Outcome};

/// Two-sided 99% normal quantile used for every confidence interval in this
/// module (z with Phi(z) = 0.995).
pub const WILSON_Z99: f64 = 2.5758293035489004;

/// Wilson score interval for a binomial proportion. `successes` is fractional
/// because simultaneous-extinction trials count as half a win. With zero
/// trials the interval is the vacuous `[0, 1]`.
pub fn wilson_interval(successes: f64, trials: u64, z: f64) -> (f64, f64) {
    assert!(z.is_finite() && z > 0.0, "z must be positive, got {z}");
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = (successes / n).clamp(0.0, 1.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // At p = 0 or 1 the exact bound coincides with p; rounding can push it
    // past the point estimate, so clamp the interval to contain p.
    let lo = (center - half).max(0.0).min(p);
    let hi = (center + half).min(1.0).max(p);
    (lo, hi)
}

/// Which clock drives the trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Kinetics {
    /// Discrete jump chain; time is the event count.
    JumpChain,
    /// Exponential holding times; also records per-species extinction times,
    /// which feed the minority-outlives-majority counter.
    Gillespie,
}

/// Trial controls shared by estimates, sweeps, and threshold probes.
#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    /// Step cap per trial; `None` picks [`default_max_steps`] for the initial
    /// population.
    pub max_steps: Option<u64>,
    pub kinetics: Kinetics,
}

impl Default for EstimateOptions {
    fn default() -> EstimateOptions {
        EstimateOptions {
            max_steps: None,
            kinetics: Kinetics::JumpChain,
        }
    }
}

/// Monte Carlo estimate of the majority-win probability with aggregated
/// trajectory statistics.
///
/// Counts split the trials as `wins + losses + both_extinct + censored =
/// trials`. All means, standard errors, and frequencies are over the
/// `trials - censored` completed trials; when every trial was censored they
/// are NaN and the interval is the vacuous `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub trials: u64,
    /// Completed trials where the initial majority was the sole survivor.
    pub wins: u64,
    /// Completed trials where the initial minority was the sole survivor.
    pub losses: u64,
    /// Completed trials ending with both counts zero.
    pub both_extinct: u64,
    /// Trials that hit the step cap before consensus.
    pub censored: u64,
    /// `(wins + both_extinct / 2) / (trials - censored)`.
    pub rho_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean and standard error of the consensus event count.
    pub mean_t: f64,
    pub se_t: f64,
    /// Individual events per trial.
    pub mean_i: f64,
    pub se_i: f64,
    /// Competitive events per trial.
    pub mean_k: f64,
    pub se_k: f64,
    /// Bad individual events per trial (lead shrank while both alive).
    pub mean_j: f64,
    pub se_j: f64,
    /// Accumulated gap loss per trial.
    pub mean_f: f64,
    pub se_f: f64,
    /// Peak population per trial.
    pub mean_max_total: f64,
    pub se_max_total: f64,
    /// Fraction of completed trials that passed through a tie before
    /// consensus.
    pub hit_tie_freq: f64,
    /// Completed trials where the initial minority was still alive when the
    /// initial majority died out; only counted under Gillespie kinetics.
    pub minority_outlived: Option<u64>,
    /// Mean continuous time at consensus under Gillespie kinetics.
    pub mean_elapsed: Option<f64>,
}

impl Estimate {
    pub fn completed(&self) -> u64 {
        self.trials - self.censored
    }

    /// True when more than one trial per thousand was censored; callers that
    /// print should surface this since the excluded mass biases rho_hat.
    pub fn excessive_censoring(&self) -> bool {
        self.censored as f64 > 1e-3 * self.trials as f64
    }
}

#[derive(Clone, Copy)]
struct TrialRow {
    outcome: Outcome,
    steps: u64,
    individual: u64,
    competitive: u64,
    bad_noncomp: u64,
    f_total: i64,
    hit_tie: bool,
    max_total: u64,
    elapsed: Option<f64>,
    outlived: bool,
}

fn run_trial(
    spec: &ModelSpec,
    init: Config,
    seed: u64,
    cell: u64,
    trial: u64,
    max_steps: u64,
    kinetics: Kinetics,
) -> Result<TrialRow> {
    let mut stream = TrialStream::new(seed, cell, trial);
    let (stats, outlived) = match kinetics {
        Kinetics::JumpChain => (run_to_consensus(spec, init, &mut stream, max_steps)?, false),
        Kinetics::Gillespie => {
            let run = gillespie_run(spec, init, &mut stream, max_steps)?;
            let outlived = match (run.extinct_time[0], run.extinct_time[1]) {
                (Some(majority), Some(minority)) => majority < minority,
                (Some(_), None) => true,
                _ => false,
            };
            (run.stats, outlived)
        }
    };
    Ok(TrialRow {
        outcome: stats.outcome,
        steps: stats.steps,
        individual: stats.individual,
        competitive: stats.competitive,
        bad_noncomp: stats.bad_noncomp,
        f_total: stats.f_total,
        hit_tie: stats.hit_tie,
        max_total: stats.max_total,
        elapsed: stats.elapsed,
        outlived,
    })
}

/// Streaming mean and standard error (Welford accumulation). The caller
/// fixes the fold order; pushing the same values in the same order gives the
/// same bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// NaN with nothing pushed.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Standard error of the mean; NaN with nothing pushed, 0 for a single
    /// value.
    pub fn standard_error(&self) -> f64 {
        match self.n {
            0 => f64::NAN,
            1 => 0.0,
            n => (self.m2 / (n - 1) as f64 / n as f64).sqrt(),
        }
    }
}

/// Estimates the probability that the species holding the larger initial
/// count is the sole survivor, from `trials` independent runs.
///
/// The initial majority may sit in either slot: a start with `x1 > x0` is
/// relabeled (spec and state swapped) before running, so `wins` always counts
/// the initial majority. An exact tie keeps species 0 as the reference label.
pub fn estimate_rho(
    spec: &ModelSpec,
    init: Config,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    estimate_rho_with(spec, init, trials, seed, 0, &EstimateOptions::default())
}

/// [`estimate_rho`] with an explicit stream cell and trial controls. Sweeps
/// use the cell index and threshold probes the gap value, so every trial in a
/// larger experiment has a unique `(seed, cell, trial)` key.
pub fn estimate_rho_with(
    spec: &ModelSpec,
    init: Config,
    trials: u64,
    seed: u64,
    cell: u64,
    options: &EstimateOptions,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let (spec, init) = if init.x1 > init.x0 {
        (spec.swapped(), init.swapped())
    } else {
        (*spec, init)
    };
    let spec = spec.validated()?;
    let max_steps = options
        .max_steps
        .unwrap_or_else(|| default_max_steps(init.total()));
    let kinetics = options.kinetics;

    let rows: Vec<Result<TrialRow>> = (0..trials)
        .into_par_iter()
        .map(|trial| run_trial(&spec, init, seed, cell, trial, max_steps, kinetics))
        .collect();

    let mut wins = 0u64;
    let mut losses = 0u64;
    let mut both_extinct = 0u64;
    let mut censored = 0u64;
    let mut ties = 0u64;
    let mut outlived = 0u64;
    let mut t = Welford::default();
    let mut i = Welford::default();
    let mut k = Welford::default();
    let mut j = Welford::default();
    let mut f = Welford::default();
    let mut max_total = Welford::default();
    let mut elapsed = Welford::default();
    for row in rows {
        let row = row?;
        if row.outcome == Outcome::Censored {
            censored += 1;
            continue;
        }
        match row.outcome {
            Outcome::MajorityWon => wins += 1,
            Outcome::MinorityWon => losses += 1,
            Outcome::BothExtinct => both_extinct += 1,
            Outcome::Censored => unreachable!("handled above"),
        }
        if row.hit_tie {
            ties += 1;
        }
        if row.outlived {
            outlived += 1;
        }
        t.push(row.steps as f64);
        i.push(row.individual as f64);
        k.push(row.competitive as f64);
        j.push(row.bad_noncomp as f64);
        f.push(row.f_total as f64);
        max_total.push(row.max_total as f64);
        if let Some(e) = row.elapsed {
            elapsed.push(e);
        }
    }

    let completed = trials - censored;
    let successes = wins as f64 + 0.5 * both_extinct as f64;
    let rho_hat = if completed == 0 {
        f64::NAN
    } else {
        successes / completed as f64
    };
    let (ci_low, ci_high) = wilson_interval(successes, completed, WILSON_Z99);
    Ok(Estimate {
        trials,
        wins,
        losses,
        both_extinct,
        censored,
        rho_hat,
        ci_low,
        ci_high,
        mean_t: t.mean(),
        se_t: t.standard_error(),
        mean_i: i.mean(),
        se_i: i.standard_error(),
        mean_k: k.mean(),
        se_k: k.standard_error(),
        mean_j: j.mean(),
        se_j: j.standard_error(),
        mean_f: f.mean(),
        se_f: f.standard_error(),
        mean_max_total: max_total.mean(),
        se_max_total: max_total.standard_error(),
        hit_tie_freq: if completed == 0 {
            f64::NAN
        } else {
            ties as f64 / completed as f64
        },
        minority_outlived: (kinetics == Kinetics::Gillespie).then_some(outlived),
        mean_elapsed: (kinetics == Kinetics::Gillespie).then(|| elapsed.mean()),
    })
}

/// Initial-gap family for a sweep: the gap grows with `n` by a fixed shape.
/// Logarithms follow the conventions the separation results are stated in:
/// `LogSquared` and `SqrtLogN` use base-2 logs, `SqrtNLogN` the natural log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GapRule {
    /// Constant gap.
    Fixed(u64),
    /// `ceil(c * log2(n)^2)`.
    LogSquared(f64),
    /// `ceil(c * sqrt(n * ln n))`.
    SqrtNLogN(f64),
    /// `ceil(c * sqrt(n))`.
    SqrtN(f64),
    /// `ceil(c * sqrt(log2 n))`.
    SqrtLogN(f64),
}

impl GapRule {
    /// Requested initial gap at population size `n`.
    pub fn delta0(&self, n: u64) -> u64 {
        let nf = n as f64;
        let raw = match *self {
            GapRule::Fixed(d) => return d,
            GapRule::LogSquared(c) => c * nf.log2() * nf.log2(),
            GapRule::SqrtNLogN(c) => c * (nf * nf.ln()).sqrt(),
            GapRule::SqrtN(c) => c * nf.sqrt(),
            GapRule::SqrtLogN(c) => c * nf.log2().sqrt(),
        };
        raw.ceil().max(0.0) as u64
    }

    /// Parses `fixed:D`, `logsq:C`, `sqrtnlogn:C`, `sqrtn:C`, or `sqrtlogn:C`.
    pub fn parse(text: &str) -> Result<GapRule> {
        let bad = || Error::SpecParse(format!("unrecognized gap rule '{text}'"));
        let (name, value) = text.split_once(':').ok_or_else(bad)?;
        let rule = match name {
            "fixed" => GapRule::Fixed(value.parse().map_err(|_| bad())?),
            _ => {
                let c: f64 = value.parse().map_err(|_| bad())?;
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::SpecParse(format!(
                        "gap rule coefficient must be positive, got '{value}'"
                    )));
                }
                match name {
                    "logsq" => GapRule::LogSquared(c),
                    "sqrtnlogn" => GapRule::SqrtNLogN(c),
                    "sqrtn" => GapRule::SqrtN(c),
                    "sqrtlogn" => GapRule::SqrtLogN(c),
                    _ => return Err(bad()),
                }
            }
        };
        Ok(rule)
    }
}

impl std::fmt::Display for GapRule {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            GapRule::Fixed(d) => write!(out, "fixed:{d}"),
            GapRule::LogSquared(c) => write!(out, "logsq:{c}"),
            GapRule::SqrtNLogN(c) => write!(out, "sqrtnlogn:{c}"),
            GapRule::SqrtN(c) => write!(out, "sqrtn:{c}"),
            GapRule::SqrtLogN(c) => write!(out, "sqrtlogn:{c}"),
        }
    }
}

/// Initial state for population `n` and requested gap `delta0`: the majority
/// gets the round-up half. The realized gap is `delta0` when `n + delta0` is
/// even and `delta0 + 1` otherwise.
pub fn init_for_gap(n: u64, delta0: u64) -> Result<Config> {
    if delta0 >= n {
        return Err(Error::InvalidGap { delta0, n });
    }
    let x0 = (n + delta0).div_ceil(2);
    Ok(Config::new(x0, n - x0))
}

/// One sweep experiment: the same spec and trial budget across a list of
/// population sizes, with the initial gap set per size by the rule.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub spec: ModelSpec,
    pub n_values: Vec<u64>,
    pub gap_rule: GapRule,
    pub trials: u64,
    pub base_seed: u64,
    pub options: EstimateOptions,
}

/// One sweep cell. `delta0` is the realized initial gap (parity-adjusted),
/// not the requested one, so downstream fits see the actual experiment.
#[derive(Debug)]
pub struct SweepRow {
    pub n: u64,
    pub delta0: u64,
    pub result: Result<Estimate>,
}

/// Runs every cell of the plan. A failing cell (for example a gap rule that
/// reaches `delta0 >= n`) reports its error in the row without stopping the
/// other cells. The stream cell index is the position in `n_values`.
pub fn sweep(plan: &SweepPlan) -> Vec<SweepRow> {
    plan.n_values
        .iter()
        .enumerate()
        .map(|(cell, &n)| {
            let requested = plan.gap_rule.delta0(n);
            match init_for_gap(n, requested) {
                Ok(init) => SweepRow {
                    n,
                    delta0: init.gap() as u64,
                    result: estimate_rho_with(
                        &plan.spec,
                        init,
                        plan.trials,
                        plan.base_seed,
                        cell as u64,
                        &plan.options,
                    ),
                },
                Err(e) => SweepRow {
                    n,
                    delta0: requested,
                    result: Err(e),
                },
            }
        })
        .collect()
}

/// Writes successful sweep rows as CSV with the pinned header. Failed cells
/// are skipped here; callers report them separately.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "n,delta0,trials,wins,both_extinct,censored,rho_hat,ci_low,ci_high,mean_T,mean_I,mean_K,mean_J,mean_F,hit_tie_freq"
    )?;
    for row in rows {
        if let Ok(est) = &row.result {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                row.n,
                row.delta0,
                est.trials,
                est.wins,
                est.both_extinct,
                est.censored,
                est.rho_hat,
                est.ci_low,
                est.ci_high,
                est.mean_t,
                est.mean_i,
                est.mean_k,
                est.mean_j,
                est.mean_f,
                est.hit_tie_freq,
            )?;
        }
    }
    Ok(())
}

/// One threshold probe: the estimate at a single gap.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdProbe {
    pub delta0: u64,
    pub rho_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Bisection result with its full probe log.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSearch {
    /// Smallest probed gap whose lower confidence bound reached the target.
    pub delta_star: u64,
    /// Every probe made, in probe order.
    pub probes: Vec<ThresholdProbe>,
    /// Statistically significant monotonicity breaks among the probes: pairs
    /// of gaps where the larger gap's whole interval sits below the smaller
    /// gap's. Bisection assumes rho grows with the gap; a nonzero count says
    /// the assumption failed at this resolution and delta_star is suspect.
    pub monotone_violations: u64,
}

/// Finds the smallest initial gap whose 99% lower confidence bound reaches
/// `target`, by bisection over `delta0 in [1, n-1]`.
///
/// Probes are seeded by `(seed, gap)`, so a probe at a given gap is the same
/// experiment no matter when bisection visits it. Three extra probes at
/// n/4, n/2, and 3n/4 guard the monotonicity assumption; disagreements are
/// counted in the result rather than hidden.
pub fn find_threshold(
    spec: &ModelSpec,
    n: u64,
    target: f64,
    seed: u64,
    trials_per_probe: u64,
    options: &EstimateOptions,
) -> Result<ThresholdSearch> {
    if !(target > 0.5 && target < 1.0) {
        return Err(Error::InvalidTarget { target });
    }
    if n < 2 {
        return Err(Error::InvalidGap { delta0: 1, n });
    }
    let mut probes = Vec::new();
    let probe = |delta0: u64, probes: &mut Vec<ThresholdProbe>| -> Result<f64> {
        let init = init_for_gap(n, delta0)?;
        let est = estimate_rho_with(spec, init, trials_per_probe, seed, delta0, options)?;
        probes.push(ThresholdProbe {
            delta0,
            rho_hat: est.rho_hat,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
        });
        Ok(est.ci_low)
    };

    let mut hi = n - 1;
    let top = probe(hi, &mut probes)?;
    if top < target {
        return Err(Error::NotBracketed {
            hi,
            target,
            best: top,
        });
    }
    let mut lo = 1;
    let delta_star = if probe(lo, &mut probes)? >= target {
        lo
    } else {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if probe(mid, &mut probes)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    for extra in [n / 4, n / 2, 3 * n / 4] {
        if extra >= 1 && extra < n && !probes.iter().any(|p| p.delta0 == extra) {
            probe(extra, &mut probes)?;
        }
    }

    let mut ordered: Vec<&ThresholdProbe> = probes.iter().collect();
    ordered.sort_by_key(|p| p.delta0);
    let monotone_violations = ordered
        .windows(2)
        .filter(|w| w[1].ci_high < w[0].ci_low)
        .count() as u64;

    Ok(ThresholdSearch {
        delta_star,
        probes,
        monotone_violations,
    })
}
