//! Deterministic mass-action companion of the stochastic chain.
//!
//! For a neutral spec the large-population density limit is the classical
//! two-species competitive system
//!
//! ```text
//! dx_i/dt = x_i * (r - alpha_eff * x_{1-i} - gamma_eff * x_i)
//! ```
//!
//! with growth rate `r = beta - delta` and `gamma_eff = gamma0 = gamma1`.
//! The cross coefficient carries the mode: when a cross event kills both
//! participants each species feels the combined pressure
//! `alpha_eff = alpha0 + alpha1`, while one-sided kills leave
//! `alpha_eff = alpha0 (= alpha1)`.
//!
//! The deterministic system is the wrong tool for consensus questions (with
//! `alpha_eff > gamma_eff` the initially denser species always wins, there is
//! no randomness to lose to), and this module exists to make that contrast
//! checkable: integrate the densities, then compare against the stochastic
//! win probabilities.
//!
//! Integration is fixed-step RK4 on the requested output grid, with each
//! output interval internally subdivided (step halving) until the endpoint
//! state moves by less than a relative 1e-8 between refinements. Densities
//! are clamped at zero, which only trims negative round-off since zero is
//! invariant for the flow.

use crate::error::{Error, Result};
use crate::model::{Mode, ModelSpec};

/// Relative endpoint agreement required between successive refinements.
const ENDPOINT_TOL: f64 = 1e-8;
/// Refinement budget; 2^20 substeps per output interval at the last attempt.
const MAX_HALVINGS: u32 = 20;
/// Density cap marking a numerically hopeless run (sustained growth with no
/// competition); integration stops and the trajectory is flagged.
const BLOWUP_CAP: f64 = 1e12;

/// Coefficients of the density system for a neutral spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldRates {
    /// Intrinsic growth rate `beta - delta`; may be negative.
    pub r: f64,
    /// Interspecific pressure felt by each species.
    pub alpha_eff: f64,
    /// Intraspecific pressure.
    pub gamma_eff: f64,
}

/// Extracts the density-system coefficients, rejecting non-neutral specs:
/// with unequal coefficients the two species do not share one equation pair
/// of this shape.
pub fn mean_field_rates(spec: &ModelSpec) -> Result<MeanFieldRates> {
    let spec = spec.validated()?;
    if !spec.is_neutral() {
        return Err(Error::NotNeutral);
    }
    let alpha_eff = match spec.mode {
        Mode::SelfDestructive => spec.alpha0 + spec.alpha1,
        Mode::NonSelfDestructive => spec.alpha0,
    };
    Ok(MeanFieldRates {
        r: spec.beta - spec.delta,
        alpha_eff,
        gamma_eff: spec.gamma0,
    })
}

/// Densities sampled on the output grid `0, dt, 2*dt, ..., horizon` (the last
/// interval may be shorter so the horizon lands exactly on the grid).
#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    /// True when a density crossed the blow-up cap; the trajectory ends at
    /// the first offending grid point and skipped the accuracy loop, since
    /// refinement cannot continue past an overflow.
    pub truncated: bool,
    /// Halvings performed on the accepted run.
    pub halvings: u32,
    /// Internal step of the accepted run, `dt / 2^halvings`.
    pub dt_used: f64,
}

impl OdeTrajectory {
    pub fn end(&self) -> (f64, f64) {
        (*self.x0.last().unwrap(), *self.x1.last().unwrap())
    }
}

fn derivative(rates: &MeanFieldRates, x0: f64, x1: f64) -> (f64, f64) {
    (
        x0 * (rates.r - rates.alpha_eff * x1 - rates.gamma_eff * x0),
        x1 * (rates.r - rates.alpha_eff * x0 - rates.gamma_eff * x1),
    )
}

/// One classical RK4 step of size `h`, clamped at zero.
fn rk4_step(rates: &MeanFieldRates, x0: f64, x1: f64, h: f64) -> (f64, f64) {
    let (k1a, k1b) = derivative(rates, x0, x1);
    let (k2a, k2b) = derivative(rates, x0 + 0.5 * h * k1a, x1 + 0.5 * h * k1b);
    let (k3a, k3b) = derivative(rates, x0 + 0.5 * h * k2a, x1 + 0.5 * h * k2b);
    let (k4a, k4b) = derivative(rates, x0 + h * k3a, x1 + h * k3b);
    let a = x0 + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    let b = x1 + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    (a.max(0.0), b.max(0.0))
}

struct Run {
    times: Vec<f64>,
    x0: Vec<f64>,
    x1: Vec<f64>,
    truncated: bool,
}

fn integrate(
    rates: &MeanFieldRates,
    init: (f64, f64),
    grid_dt: f64,
    intervals: u64,
    horizon: f64,
    halvings: u32,
) -> Run {
    let substeps = 1u64 << halvings;
    let h = grid_dt / substeps as f64;
    let mut times = Vec::with_capacity(intervals as usize + 1);
    let mut xs0 = Vec::with_capacity(intervals as usize + 1);
    let mut xs1 = Vec::with_capacity(intervals as usize + 1);
    let (mut x0, mut x1) = init;
    times.push(0.0);
    xs0.push(x0);
    xs1.push(x1);
    let mut truncated = false;
    for interval in 1..=intervals {
        for _ in 0..substeps {
            (x0, x1) = rk4_step(rates, x0, x1, h);
        }
        times.push(if interval == intervals {
            horizon
        } else {
            interval as f64 * grid_dt
        });
        xs0.push(x0);
        xs1.push(x1);
        if x0 > BLOWUP_CAP || x1 > BLOWUP_CAP {
            truncated = true;
            break;
        }
    }
    Run {
        times,
        x0: xs0,
        x1: xs1,
        truncated,
    }
}

fn endpoint_gap(a: &Run, b: &Run) -> f64 {
    let ga = (a.x0.last().unwrap() - b.x0.last().unwrap()).abs()
        / (1.0 + b.x0.last().unwrap().abs());
    let gb = (a.x1.last().unwrap() - b.x1.last().unwrap()).abs()
        / (1.0 + b.x1.last().unwrap().abs());
    ga.max(gb)
}

/// Integrates the density system from `(x0, x1)` to `horizon`, sampling every
/// `dt`.
///
/// `dt` controls the output grid only; accuracy comes from internal step
/// halving until two refinements agree at the horizon to a relative 1e-8,
/// with [`Error::OdeNoConvergence`] after 20 halvings. Rejects non-neutral
/// specs ([`Error::NotNeutral`]) and non-finite or non-positive `dt` and
/// `horizon` or negative densities ([`Error::OdeInput`]).
pub fn ode_trajectory(
    spec: &ModelSpec,
    x0: f64,
    x1: f64,
    dt: f64,
    horizon: f64,
) -> Result<OdeTrajectory> {
    let rates = mean_field_rates(spec)?;
    let inputs_ok = dt.is_finite()
        && dt > 0.0
        && horizon.is_finite()
        && horizon > 0.0
        && x0.is_finite()
        && x0 >= 0.0
        && x1.is_finite()
        && x1 >= 0.0;
    if !inputs_ok {
        return Err(Error::OdeInput {
            dt,
            horizon,
            x0,
            x1,
        });
    }
    let intervals = (horizon / dt).ceil().max(1.0) as u64;
    let grid_dt = horizon / intervals as f64;

    let finish = |run: Run, halvings: u32| OdeTrajectory {
        times: run.times,
        x0: run.x0,
        x1: run.x1,
        truncated: run.truncated,
        halvings,
        dt_used: grid_dt / (1u64 << halvings) as f64,
    };

    let mut prev = integrate(&rates, (x0, x1), grid_dt, intervals, horizon, 0);
    if prev.truncated {
        return Ok(finish(prev, 0));
    }
    for halvings in 1..=MAX_HALVINGS {
        let cur = integrate(&rates, (x0, x1), grid_dt, intervals, horizon, halvings);
        if cur.truncated {
            return Ok(finish(cur, halvings));
        }
        if endpoint_gap(&prev, &cur) < ENDPOINT_TOL {
            return Ok(finish(cur, halvings));
        }
        prev = cur;
    }
    Err(Error::OdeNoConvergence {
        tol: ENDPOINT_TOL,
        halvings: MAX_HALVINGS,
    })
}
