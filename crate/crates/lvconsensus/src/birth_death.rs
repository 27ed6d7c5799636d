//! One-dimensional birth-death chains that dominate the minority count.
//!
//! A chain here is "nice" when its birth probability decays like `C / m`
//! and its death probability has a positive floor `D`, with absorption at 0.
//! Such chains die out in time linear in the start state while seeing only
//! logarithmically many birth events.
//!
//! [`dominating_chain`] builds the canonical nice chain whose step law
//! bounds the two-species model without intraspecific competition: its
//! birth probability matches the worst-case mass of individual events that
//! grow the minority, its death probability the guaranteed mass of events
//! that shrink it.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng::TrialStream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ChainKind {
    /// `p(m) = theta / (alpha m + theta)`, `q(m) = alpha_min / (alpha + 2 theta)`.
    Canonical {
        theta: f64,
        alpha: f64,
        alpha_min: f64,
    },
    /// Explicit step probabilities for states `1..=table.len()`; beyond the
    /// table, `p` extrapolates as `C / m` (clipped to leave room for `q`)
    /// and `q` stays at its floor `D`.
    Tabulated { p: Vec<f64>, q: Vec<f64> },
}

/// Step law of a nice birth-death chain plus its niceness witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiceChainSpec {
    kind: ChainKind,
    /// Witness for `p(m) <= c_witness / m`.
    pub c_witness: f64,
    /// Witness for `q(m) >= d_witness`.
    pub d_witness: f64,
}

impl NiceChainSpec {
    /// Canonical form; requires `alpha >= alpha_min > 0` and finite
    /// `theta >= 0`. `theta == 0` gives a degenerate (pure-death) chain,
    /// still valid, flagged by [`NiceChainSpec::is_degenerate`].
    pub fn canonical(theta: f64, alpha: f64, alpha_min: f64) -> Result<NiceChainSpec> {
        if !(theta.is_finite() && alpha.is_finite() && alpha_min.is_finite()) {
            return Err(Error::InvalidNiceChain("parameters must be finite".into()));
        }
        if theta < 0.0 {
            return Err(Error::InvalidNiceChain("theta must be >= 0".into()));
        }
        if !(alpha_min > 0.0) || alpha_min > alpha {
            return Err(Error::InvalidNiceChain(
                "need alpha >= alpha_min > 0".into(),
            ));
        }
        let spec = NiceChainSpec {
            kind: ChainKind::Canonical {
                theta,
                alpha,
                alpha_min,
            },
            c_witness: theta / alpha,
            d_witness: alpha_min / (alpha + 2.0 * theta),
        };
        debug_assert!(spec.p(1) + spec.q(1) <= 1.0);
        Ok(spec)
    }

    /// Explicit table for states `1..=p.len()`; `p[0]` is state 1.
    pub fn tabulated(p: Vec<f64>, q: Vec<f64>, c_witness: f64, d_witness: f64) -> Result<NiceChainSpec> {
        if p.len() != q.len() || p.is_empty() {
            return Err(Error::InvalidNiceChain(
                "need equally sized, non-empty p and q tables".into(),
            ));
        }
        if !(c_witness >= 0.0) || !(d_witness > 0.0) {
            return Err(Error::InvalidNiceChain(
                "need witnesses C >= 0 and D > 0".into(),
            ));
        }
        for (i, (&pm, &qm)) in p.iter().zip(&q).enumerate() {
            let m = (i + 1) as f64;
            if !(0.0..=1.0).contains(&pm) || !(0.0..=1.0).contains(&qm) {
                return Err(Error::InvalidNiceChain(format!(
                    "probabilities out of range at state {}",
                    i + 1
                )));
            }
            if pm + qm > 1.0 {
                return Err(Error::InvalidNiceChain(format!(
                    "p + q > 1 at state {}",
                    i + 1
                )));
            }
            if pm > c_witness / m * (1.0 + 1e-12) {
                return Err(Error::InvalidNiceChain(format!(
                    "p({}) = {pm} breaks the C/m bound",
                    i + 1
                )));
            }
            if qm < d_witness * (1.0 - 1e-12) {
                return Err(Error::InvalidNiceChain(format!(
                    "q({}) = {qm} under the floor D",
                    i + 1
                )));
            }
        }
        Ok(NiceChainSpec {
            kind: ChainKind::Tabulated { p, q },
            c_witness,
            d_witness,
        })
    }

    /// Probability of `m -> m + 1`; zero at the absorbing state.
    pub fn p(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        match &self.kind {
            ChainKind::Canonical { theta, alpha, .. } => {
                if *theta == 0.0 {
                    0.0
                } else {
                    theta / (alpha * m as f64 + theta)
                }
            }
            ChainKind::Tabulated { p, .. } => p
                .get(m as usize - 1)
                .copied()
                .unwrap_or_else(|| (self.c_witness / m as f64).min(1.0 - self.q(m))),
        }
    }

    /// Probability of `m -> m - 1`; zero at the absorbing state.
    pub fn q(&self, m: u64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        match &self.kind {
            ChainKind::Canonical {
                theta,
                alpha,
                alpha_min,
            } => alpha_min / (alpha + 2.0 * theta),
            ChainKind::Tabulated { q, .. } => {
                q.get(m as usize - 1).copied().unwrap_or(self.d_witness)
            }
        }
    }

    /// True when the chain can never move up (`p` identically zero).
    pub fn is_degenerate(&self) -> bool {
        match &self.kind {
            ChainKind::Canonical { theta, .. } => *theta == 0.0,
            ChainKind::Tabulated { p, .. } => self.c_witness == 0.0 && p.iter().all(|&x| x == 0.0),
        }
    }
}

/// Canonical dominating chain of a two-species model without intraspecific
/// competition.
pub fn dominating_chain(spec: &ModelSpec) -> Result<NiceChainSpec> {
    spec.validated()?;
    if spec.gamma() != 0.0 {
        return Err(Error::RequiresNoIntra);
    }
    if !(spec.alpha_min() > 0.0) {
        return Err(Error::RequiresInterspecific);
    }
    NiceChainSpec::canonical(spec.theta(), spec.alpha(), spec.alpha_min())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceRunStats {
    /// Steps until absorption at 0 (holding steps included).
    pub steps: u64,
    /// Number of upward moves.
    pub births: u64,
    pub max_state: u64,
    /// True when the cap stopped the run before absorption.
    pub censored: bool,
}

/// Step cap used when callers do not pick one.
pub fn default_nice_cap(n0: u64) -> u64 {
    10_000 * (n0 + 1)
}

/// Runs the chain from `n0` until absorption at 0 or `cap` steps.
pub fn run_nice_chain(
    chain: &NiceChainSpec,
    n0: u64,
    cap: u64,
    stream: &mut TrialStream,
) -> NiceRunStats {
    let mut m = n0;
    let mut stats = NiceRunStats {
        steps: 0,
        births: 0,
        max_state: n0,
        censored: false,
    };
    while m > 0 {
        if stats.steps >= cap {
            stats.censored = true;
            break;
        }
        let xi = stream.xi();
        if xi < chain.p(m) {
            m += 1;
            stats.births += 1;
            stats.max_state = stats.max_state.max(m);
        } else if xi >= 1.0 - chain.q(m) {
            m -= 1;
        }
        stats.steps += 1;
    }
    stats
}
