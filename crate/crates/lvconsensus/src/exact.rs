//! Exact consensus probabilities and expected consensus times on truncated grids.
//!
//! For a rate spec the solver answers two questions by first-step analysis on the
//! box `{0..xmax}^2`: the probability `rho(a, b)` that species 0 is the winner
//! when consensus is first reached, and the expected number of reaction events
//! until consensus. Consensus states (any zero count) are absorbing for both
//! quantities regardless of their remaining reaction rates, because both
//! quantities condition on the stopped chain.
//!
//! Boundary convention: `rho(a, 0) = 1` for `a > 0` and `rho(0, b) = 0` for
//! `b > 0`. The corner `(0, 0)` is reachable under self-destructive competition
//! (state `(1, 1)` jumps straight there), and simultaneous extinction leaves
//! neither species the winner. The solver scores that corner as a fair coin,
//! `rho(0, 0) = 1/2`. This is the unique choice compatible with the label
//! antisymmetry `rho(a, b) + rho(b, a) = 1` that every neutral spec satisfies,
//! and it is the convention under which the closed form `a/(a+b)` solves the
//! recurrence for matched rate specs (see the module tests). Scoring the corner
//! as a plain loss would make `rho(3, 1) = 1/2` instead of `3/4` for the matched
//! self-destructive spec with no individual reactions.
//!
//! Truncation: birth propensities are set to zero on the `xmax` faces, which
//! leaves a well-posed absorbing system. The distortion is diagnosed rather than
//! assumed small: [`ExactGrid::truncation_gap`] reports the largest disagreement
//! against a half-size solve on the states both boxes share (the half box minus
//! its own suppressed face).
//!
//! The solver runs Gauss-Seidel sweeps ordered by ascending total population.
//! With no births every transition strictly decreases the total, so ascending
//! order is topological and the first sweep is already exact; with births the
//! sweeps iterate to the fixed point. Values start at zero and increase
//! monotonically, so the limit is the minimal solution of the recurrence, which
//! is the hitting probability (and hitting time) of the stopped chain even in
//! regimes where consensus is not certain. When consensus has probability less
//! than one the mean-time iteration grows without bound instead, and the solver
//! reports [`Error::NoConvergence`] rather than a biased value.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Config, ModelSpec, ReactionKind};

/// Smallest supported truncation bound.
pub const XMAX_MIN: u32 = 2;

/// Largest supported truncation bound. A full grid at this size holds
/// `(XMAX_LIMIT + 1)^2` values per quantity, about 134 MB as `f64`.
pub const XMAX_LIMIT: u32 = 4096;

/// How the solver closes the finite box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryPolicy {
    /// Birth propensities are zeroed at the `x0 = xmax` and `x1 = xmax` faces.
    /// All other reactions keep their rates, so the truncated chain is a
    /// substochastic restriction of the original one, not a reflected variant
    /// that would distort propensity ratios.
    BirthsSuppressed,
}

/// Solver controls.
#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    /// Accept the solution once the largest one-step recurrence violation is
    /// at most this value (relative to `1 + value` for mean times).
    pub tol: f64,
    /// Sweep budget before the solver gives up with [`Error::NoConvergence`].
    pub max_sweeps: u64,
    /// Also solve the expected-event-count recurrence.
    pub compute_mean_t: bool,
    /// Re-solve at `xmax / 2` and report the disagreement.
    pub truncation_check: bool,
}

impl Default for ExactOptions {
    fn default() -> ExactOptions {
        ExactOptions {
            tol: 1e-10,
            max_sweeps: 20_000,
            compute_mean_t: true,
            truncation_check: true,
        }
    }
}

/// Solved grid over `{0..xmax}^2`.
#[derive(Debug, Clone)]
pub struct ExactGrid {
    pub xmax: u32,
    pub boundary_policy: BoundaryPolicy,
    /// Largest one-step recurrence violation of the accepted `rho` grid.
    pub residual: f64,
    /// Largest relative one-step violation of the accepted mean-time grid.
    pub mean_t_residual: Option<f64>,
    /// Largest disagreement with the half-size solve over the shared interior,
    /// `None` when the check was skipped.
    pub truncation_gap: Option<f64>,
    /// Total Gauss-Seidel sweeps spent (both quantities combined).
    pub sweeps: u64,
    rho: Vec<f64>,
    mean_t: Option<Vec<f64>>,
}

impl ExactGrid {
    /// Probability that species 0 wins from `(a, b)`, with the fair-coin value
    /// at `(0, 0)`.
    pub fn rho(&self, a: u32, b: u32) -> f64 {
        self.rho[self.index(a, b)]
    }

    /// Expected number of reaction events until consensus from `(a, b)`, if
    /// the solve included mean times.
    pub fn mean_t(&self, a: u32, b: u32) -> Option<f64> {
        let i = self.index(a, b);
        self.mean_t.as_ref().map(|m| m[i])
    }

    fn index(&self, a: u32, b: u32) -> usize {
        assert!(
            a <= self.xmax && b <= self.xmax,
            "state ({a}, {b}) lies outside the solved box 0..={}",
            self.xmax
        );
        a as usize * (self.xmax as usize + 1) + b as usize
    }

    /// Writes the grid as CSV with header `a,b,rho,meanT`. The `meanT` field
    /// is left empty when mean times were not solved.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,b,rho,meanT")?;
        for a in 0..=self.xmax {
            for b in 0..=self.xmax {
                match self.mean_t(a, b) {
                    Some(t) => writeln!(out, "{a},{b},{:.16e},{:.16e}", self.rho(a, b), t)?,
                    None => writeln!(out, "{a},{b},{:.16e},", self.rho(a, b))?,
                }
            }
        }
        Ok(())
    }
}

/// Solves the winner-probability recurrence on `{0..xmax}^2`, plus the
/// mean-time recurrence and the truncation diagnostic when the options ask
/// for them.
///
/// # Panics
///
/// Panics if `options.tol` is not a positive finite number or the sweep
/// budget is zero; those are caller bugs, not data conditions.
pub fn exact_rho(spec: &ModelSpec, xmax: u32, options: &ExactOptions) -> Result<ExactGrid> {
    assert!(
        options.tol.is_finite() && options.tol > 0.0,
        "solver tolerance must be a positive finite number, got {}",
        options.tol
    );
    assert!(options.max_sweeps > 0, "sweep budget must be positive");
    if !(XMAX_MIN..=XMAX_LIMIT).contains(&xmax) {
        return Err(Error::XmaxOutOfRange {
            xmax,
            min: XMAX_MIN,
            max: XMAX_LIMIT,
        });
    }
    let spec = spec.validated()?;
    let solver = Solver { spec, xmax };
    solver.check_interior_absorbing()?;

    let mut sweeps = 0;
    let mut rho = vec![0.0; (xmax as usize + 1) * (xmax as usize + 1)];
    for a in 1..=xmax {
        rho[a as usize * (xmax as usize + 1)] = 1.0;
    }
    rho[0] = 0.5;
    let residual = solver.converge(&mut rho, Inhomogeneity::None, options, &mut sweeps)?;

    let (mean_t, mean_t_residual) = if options.compute_mean_t {
        let mut mt = vec![0.0; rho.len()];
        let r = solver.converge(&mut mt, Inhomogeneity::OneEventPerStep, options, &mut sweeps)?;
        (Some(mt), Some(r))
    } else {
        (None, None)
    };

    let truncation_gap = if options.truncation_check && xmax >= 2 * XMAX_MIN {
        let inner = ExactOptions {
            compute_mean_t: false,
            truncation_check: false,
            ..*options
        };
        let half = exact_rho(&spec, xmax / 2, &inner)?;
        sweeps += half.sweeps;
        let mut gap = 0.0f64;
        let stride = xmax as usize + 1;
        // Compare only states strictly inside the half box; its own suppressed
        // face is where the two solves differ by construction.
        for a in 0..xmax / 2 {
            for b in 0..xmax / 2 {
                let d = (rho[a as usize * stride + b as usize] - half.rho(a, b)).abs();
                gap = gap.max(d);
            }
        }
        Some(gap)
    } else {
        None
    };

    Ok(ExactGrid {
        xmax,
        boundary_policy: BoundaryPolicy::BirthsSuppressed,
        residual,
        mean_t_residual,
        truncation_gap,
        sweeps,
        rho,
        mean_t,
    })
}

/// Convenience wrapper that always solves mean times.
pub fn exact_mean_consensus_time(
    spec: &ModelSpec,
    xmax: u32,
    options: &ExactOptions,
) -> Result<ExactGrid> {
    let options = ExactOptions {
        compute_mean_t: true,
        ..*options
    };
    exact_rho(spec, xmax, &options)
}

/// One-step recurrence violation `|f(a, b) - E[f(next state)]|` of a candidate
/// value function at an interior state, using the untruncated transition
/// probabilities. This is the executable form of the harmonicity arguments
/// behind the `a/(a+b)` closed forms: a true solution has residual zero at
/// every interior state.
pub fn one_step_residual<F>(spec: &ModelSpec, f: F, a: u64, b: u64) -> Result<f64>
where
    F: Fn(u64, u64) -> f64,
{
    let spec = spec.validated()?;
    let c = Config::new(a, b);
    let props = spec.propensities_raw(c)?;
    if props.total <= 0.0 {
        return Err(Error::ZeroPropensity { x0: a, x1: b });
    }
    let mut acc = 0.0;
    for (slot, k) in ReactionKind::ALL.into_iter().enumerate() {
        let mass = props.rates[slot];
        if mass > 0.0 {
            let next = spec.apply_unchecked(c, k);
            acc += mass * f(next.x0, next.x1);
        }
    }
    Ok((f(a, b) - acc / props.total).abs())
}

/// What the per-state update adds on top of the expected next value: nothing
/// for hitting probabilities, one counted event for mean times.
#[derive(Clone, Copy, PartialEq)]
enum Inhomogeneity {
    None,
    OneEventPerStep,
}

struct Solver {
    spec: ModelSpec,
    xmax: u32,
}

impl Solver {
    fn stride(&self) -> usize {
        self.xmax as usize + 1
    }

    /// Face-suppressed reaction masses at an interior state, with successor
    /// grid indices. Returns the included total, which is the normalizer of
    /// the truncated jump chain at that state.
    fn masses(&self, a: u32, b: u32, succ: &mut [(f64, usize); 8]) -> f64 {
        let c = Config::new(a as u64, b as u64);
        let props = self
            .spec
            .propensities_raw(c)
            .expect("counts within XMAX_LIMIT cannot overflow the rate arithmetic");
        let mut total = 0.0;
        for (slot, k) in ReactionKind::ALL.into_iter().enumerate() {
            let mut mass = props.rates[slot];
            let at_face = match k {
                ReactionKind::Birth(s) => c.count(s) == self.xmax as u64,
                _ => false,
            };
            if at_face {
                mass = 0.0;
            }
            if mass > 0.0 {
                let next = self.spec.apply_unchecked(c, k);
                succ[slot] = (
                    mass,
                    next.x0 as usize * self.stride() + next.x1 as usize,
                );
                total += mass;
            } else {
                succ[slot] = (0.0, 0);
            }
        }
        total
    }

    /// Rejects boxes holding an interior state with no outgoing reaction mass;
    /// the recurrence has no meaningful value there.
    fn check_interior_absorbing(&self) -> Result<()> {
        let mut succ = [(0.0, 0); 8];
        for a in 1..=self.xmax {
            for b in 1..=self.xmax {
                if self.masses(a, b, &mut succ) <= 0.0 {
                    return Err(Error::NonAbsorbing {
                        x0: a as u64,
                        x1: b as u64,
                    });
                }
            }
        }
        Ok(())
    }

    /// One Gauss-Seidel sweep in ascending total population. Returns the
    /// largest update made (relative for mean times, absolute otherwise).
    fn sweep(&self, vals: &mut [f64], inhom: Inhomogeneity, write: bool) -> f64 {
        let mut worst = 0.0f64;
        let stride = self.stride();
        let mut succ = [(0.0, 0); 8];
        for s in 2..=2 * self.xmax {
            let a_lo = 1.max(s.saturating_sub(self.xmax));
            let a_hi = (s - 1).min(self.xmax);
            for a in a_lo..=a_hi {
                let b = s - a;
                let total = self.masses(a, b, &mut succ);
                if total <= 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for &(mass, j) in &succ {
                    if mass > 0.0 {
                        acc += mass * vals[j];
                    }
                }
                let mut next = acc / total;
                if inhom == Inhomogeneity::OneEventPerStep {
                    next += 1.0;
                }
                let i = a as usize * stride + b as usize;
                let diff = (next - vals[i]).abs();
                let scale = match inhom {
                    Inhomogeneity::None => 1.0,
                    Inhomogeneity::OneEventPerStep => 1.0 + next.abs(),
                };
                worst = worst.max(diff / scale);
                if write {
                    vals[i] = next;
                }
            }
        }
        worst
    }

    /// Sweeps until the true recurrence residual drops below the tolerance.
    /// The cheap per-sweep update delta gates the exact residual pass so the
    /// usual path costs one extra read-only sweep at the end.
    fn converge(
        &self,
        vals: &mut [f64],
        inhom: Inhomogeneity,
        options: &ExactOptions,
        sweeps: &mut u64,
    ) -> Result<f64> {
        let mut last_delta = f64::INFINITY;
        for _ in 0..options.max_sweeps {
            *sweeps += 1;
            last_delta = self.sweep(vals, inhom, true);
            if last_delta <= options.tol {
                let residual = self.sweep(vals, inhom, false);
                if residual <= options.tol {
                    return Ok(residual);
                }
            }
        }
        Err(Error::NoConvergence {
            residual: last_delta,
            sweeps: *sweeps,
            tol: options.tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode;

    fn spec(alpha: f64, beta: f64, delta: f64, gamma: f64, mode: Mode) -> ModelSpec {
        ModelSpec {
            alpha0: alpha,
            alpha1: alpha,
            beta,
            delta,
            gamma0: gamma,
            gamma1: gamma,
            mode,
        }
    }

    /// Self-destructive spec on which a/(a+b) is exact: the total
    /// cross-species mass is (alpha0+alpha1)ab = ab and each species' own-pair
    /// mass is gamma_i x(x-1)/2 = x(x-1)/2, so the two coefficients match.
    fn sd_matched() -> ModelSpec {
        spec(0.5, 0.0, 0.0, 1.0, Mode::SelfDestructive)
    }

    /// Non-self-destructive spec with gamma_i = 2 alpha_i, the matching
    /// condition for a/(a+b) when competitive events remove one individual.
    fn nsd_matched() -> ModelSpec {
        spec(0.25, 0.0, 0.0, 0.5, Mode::NonSelfDestructive)
    }

    fn closed_form(a: u64, b: u64) -> f64 {
        if a == 0 && b == 0 {
            return 0.5;
        }
        a as f64 / (a + b) as f64
    }

    #[test]
    fn sd_matched_grid_is_a_over_a_plus_b() {
        let grid = exact_rho(&sd_matched(), 32, &ExactOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for a in 1..=12u32 {
            for b in 1..=12u32 {
                let want = a as f64 / (a + b) as f64;
                worst = worst.max((grid.rho(a, b) - want).abs());
            }
        }
        assert!(worst <= 1e-9, "largest closed-form gap {worst:.3e}");
        assert!(
            grid.residual <= 1e-10,
            "solver accepted residual {:.3e}",
            grid.residual
        );
    }

    #[test]
    fn nsd_matched_grid_is_a_over_a_plus_b() {
        let grid = exact_rho(&nsd_matched(), 32, &ExactOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for a in 1..=12u32 {
            for b in 1..=12u32 {
                let want = a as f64 / (a + b) as f64;
                worst = worst.max((grid.rho(a, b) - want).abs());
            }
        }
        assert!(worst <= 1e-9, "largest closed-form gap {worst:.3e}");
        assert!(
            (grid.rho(3, 2) - 0.6).abs() <= 1e-9,
            "rho(3,2) = {}",
            grid.rho(3, 2)
        );
    }

    #[test]
    fn boundary_values_are_pinned() {
        let grid = exact_rho(&sd_matched(), 8, &ExactOptions::default()).unwrap();
        assert_eq!(grid.rho(5, 0), 1.0, "winner boundary");
        assert_eq!(grid.rho(0, 5), 0.0, "loser boundary");
        assert_eq!(grid.rho(0, 0), 0.5, "simultaneous extinction is a coin");
        assert_eq!(grid.mean_t(5, 0), Some(0.0), "consensus takes no events");
        assert_eq!(grid.mean_t(0, 0), Some(0.0));
    }

    #[test]
    fn corner_loss_convention_would_break_the_closed_form() {
        // Documented counterexample behind the fair-coin corner: with no
        // individual reactions, (3,1) reaches (1,1) with probability 1/2 and
        // (1,1) jumps straight to (0,0), so scoring the corner as a loss
        // would give rho(3,1) = 1/2. The coin restores 3/4 = a/(a+b).
        let grid = exact_rho(&sd_matched(), 8, &ExactOptions::default()).unwrap();
        assert!(
            (grid.rho(3, 1) - 0.75).abs() <= 1e-12,
            "rho(3,1) = {}",
            grid.rho(3, 1)
        );
        assert!(
            (grid.rho(1, 1) - 0.5).abs() <= 1e-12,
            "rho(1,1) = {}",
            grid.rho(1, 1)
        );
    }

    #[test]
    fn rho_is_antisymmetric_for_neutral_specs() {
        let s = spec(0.5, 1.0, 1.0, 1.0, Mode::SelfDestructive);
        let grid = exact_rho(&s, 24, &ExactOptions::default()).unwrap();
        for a in 0..=24u32 {
            for b in 0..=24u32 {
                let sum = grid.rho(a, b) + grid.rho(b, a);
                assert!(
                    (sum - 1.0).abs() <= 1e-9,
                    "rho({a},{b}) + rho({b},{a}) = {sum}"
                );
            }
        }
    }

    #[test]
    fn pure_inter_mean_time_counts_the_minority() {
        // With only cross-species reactions every event removes one of each,
        // so consensus takes exactly min(a, b) events.
        let s = spec(0.5, 0.0, 0.0, 0.0, Mode::SelfDestructive);
        let grid = exact_mean_consensus_time(&s, 16, &ExactOptions::default()).unwrap();
        for a in 0..=16u32 {
            for b in 0..=16u32 {
                let want = a.min(b) as f64;
                let got = grid.mean_t(a, b).unwrap();
                assert!(
                    (got - want).abs() <= 1e-12,
                    "meanT({a},{b}) = {got}, want {want}"
                );
            }
        }
        assert_eq!(grid.mean_t(2, 1), Some(1.0), "single event from (2,1)");
    }

    #[test]
    fn harmonicity_holds_at_interior_states_sd() {
        // Full seven-reaction spec: individual births and deaths exercise the
        // one-individual branch of the recurrence, competition the rest.
        let s = spec(0.5, 1.0, 1.0, 1.0, Mode::SelfDestructive);
        let mut worst = 0.0f64;
        for a in 1..=40u64 {
            for b in 1..=40u64 {
                let r = one_step_residual(&s, closed_form, a, b).unwrap();
                worst = worst.max(r);
            }
        }
        assert!(worst <= 1e-12, "largest one-step residual {worst:.3e}");
    }

    #[test]
    fn harmonicity_holds_at_interior_states_nsd() {
        let s = spec(0.25, 1.0, 1.0, 0.5, Mode::NonSelfDestructive);
        let mut worst = 0.0f64;
        for a in 1..=40u64 {
            for b in 1..=40u64 {
                let r = one_step_residual(&s, closed_form, a, b).unwrap();
                worst = worst.max(r);
            }
        }
        assert!(worst <= 1e-12, "largest one-step residual {worst:.3e}");
    }

    #[test]
    fn harmonicity_detects_a_mismatched_spec() {
        // Halving the own-pair rate breaks the closed form; the residual must
        // say so rather than vanish.
        let s = spec(0.5, 0.0, 0.0, 0.5, Mode::SelfDestructive);
        let r = one_step_residual(&s, closed_form, 2, 1).unwrap();
        assert!(r > 1e-3, "mismatched spec should leave a residual, got {r:.3e}");
    }

    #[test]
    fn mean_time_grows_at_most_linearly_at_small_n() {
        let s = spec(0.5, 1.0, 1.0, 0.0, Mode::SelfDestructive);
        let mut previous = 0.0;
        for n in [8u32, 16, 32] {
            let grid = exact_mean_consensus_time(&s, 2 * n, &ExactOptions::default()).unwrap();
            let a = 3 * n / 4;
            let t = grid.mean_t(a, n - a).unwrap();
            assert!(
                t <= n as f64,
                "meanT({a},{}) = {t} exceeds one event per individual",
                n - a
            );
            assert!(t > previous, "meanT should grow with n, got {t} after {previous}");
            previous = t;
        }
    }

    #[test]
    fn truncation_gap_is_zero_without_births() {
        let grid = exact_rho(&sd_matched(), 32, &ExactOptions::default()).unwrap();
        assert_eq!(
            grid.truncation_gap,
            Some(0.0),
            "with no births the box size cannot matter"
        );
    }

    #[test]
    fn truncation_gap_shrinks_as_xmax_doubles() {
        let s = spec(0.5, 1.0, 1.0, 0.0, Mode::SelfDestructive);
        let opts = ExactOptions {
            compute_mean_t: false,
            ..ExactOptions::default()
        };
        let g32 = exact_rho(&s, 32, &opts).unwrap().truncation_gap.unwrap();
        let g64 = exact_rho(&s, 64, &opts).unwrap().truncation_gap.unwrap();
        assert!(g64 < g32 / 2.0, "gap should shrink: {g32:.3e} -> {g64:.3e}");
    }

    #[test]
    fn truncation_gap_is_small_in_a_subcritical_regime() {
        // Births well below deaths: the population drifts down, face visits
        // are rare, and the solve at xmax = 96 agrees with the half-size one
        // to better than 1e-6 (measured 4e-7).
        let s = spec(0.5, 0.1, 1.0, 0.0, Mode::SelfDestructive);
        let opts = ExactOptions {
            compute_mean_t: false,
            ..ExactOptions::default()
        };
        let grid = exact_rho(&s, 96, &opts).unwrap();
        let gap = grid.truncation_gap.unwrap();
        assert!(gap < 1e-6, "truncation gap {gap:.3e} at xmax 96");
    }

    #[test]
    fn non_absorbing_interior_is_detected() {
        // Only own-pair competition and no individual reactions: (1,1) has no
        // outgoing reaction at all.
        let s = spec(0.0, 0.0, 0.0, 1.0, Mode::SelfDestructive);
        match exact_rho(&s, 8, &ExactOptions::default()) {
            Err(Error::NonAbsorbing { x0: 1, x1: 1 }) => {}
            other => panic!("expected NonAbsorbing at (1,1), got {other:?}"),
        }
    }

    #[test]
    fn mean_time_refuses_when_consensus_is_not_certain() {
        // Non-self-destructive own-pair competition never empties a species
        // (it stops at count 1) and births keep the chain alive, so mean
        // times diverge. rho still converges, to zero.
        let s = spec(0.0, 1.0, 0.0, 1.0, Mode::NonSelfDestructive);
        let opts = ExactOptions {
            compute_mean_t: false,
            truncation_check: false,
            ..ExactOptions::default()
        };
        let grid = exact_rho(&s, 8, &opts).unwrap();
        assert_eq!(grid.rho(5, 3), 0.0, "consensus is unreachable");

        let opts = ExactOptions {
            max_sweeps: 200,
            truncation_check: false,
            ..ExactOptions::default()
        };
        match exact_mean_consensus_time(&s, 8, &opts) {
            Err(Error::NoConvergence { .. }) => {}
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn xmax_bounds_are_enforced() {
        let s = sd_matched();
        match exact_rho(&s, 1, &ExactOptions::default()) {
            Err(Error::XmaxOutOfRange { xmax: 1, .. }) => {}
            other => panic!("expected XmaxOutOfRange, got {other:?}"),
        }
        match exact_rho(&s, XMAX_LIMIT + 1, &ExactOptions::default()) {
            Err(Error::XmaxOutOfRange { .. }) => {}
            other => panic!("expected XmaxOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn csv_export_is_stable_and_complete() {
        let grid = exact_rho(&sd_matched(), 4, &ExactOptions::default()).unwrap();
        let mut first = Vec::new();
        grid.write_csv(&mut first).unwrap();
        let text = String::from_utf8(first.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,b,rho,meanT");
        assert_eq!(lines.len(), 1 + 25, "header plus one row per state");
        assert!(lines[1].starts_with("0,0,5.0000000000000000e-1"));

        let again = exact_rho(&sd_matched(), 4, &ExactOptions::default()).unwrap();
        let mut second = Vec::new();
        again.write_csv(&mut second).unwrap();
        assert_eq!(first, second, "identical solves must serialize identically");
    }
}
