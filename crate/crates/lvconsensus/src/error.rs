use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rate {name} is negative ({value})")]
    NegativeRate { name: &'static str, value: f64 },

    #[error("rate {name} is not finite ({value})")]
    NonFiniteRate { name: &'static str, value: f64 },

    #[error("count {count} exceeds the exact-arithmetic limit {limit}")]
    CountOverflow { count: u64, limit: u64 },

    #[error("reaction {reaction} has zero propensity in state ({x0}, {x1})")]
    InfeasibleReaction {
        reaction: &'static str,
        x0: u64,
        x1: u64,
    },

    #[error("state ({x0}, {x1}) has zero total propensity")]
    ZeroPropensity { x0: u64, x1: u64 },

    #[error("initial state ({x0}, {x1}) puts the majority in the wrong slot; swap species labels first")]
    InvalidInit { x0: u64, x1: u64 },

    #[error("spec parse error: {0}")]
    SpecParse(String),

    #[error("dominating chain requires interspecific competition (min(alpha0, alpha1) > 0)")]
    RequiresInterspecific,

    #[error("dominating chain requires gamma0 = gamma1 = 0")]
    RequiresNoIntra,

    #[error("invalid birth-death chain: {0}")]
    InvalidNiceChain(String),

    #[error(
        "domination bound violated at state ({x0}, {x1}): {which} (model {actual} vs chain bound {bound})"
    )]
    NotDominating {
        x0: u64,
        x1: u64,
        which: &'static str,
        actual: f64,
        bound: f64,
    },

    #[error("replay mismatch at step {step}: {detail}")]
    ReplayMismatch { step: u64, detail: String },

    #[error("selection intervals overlap at state ({x0}, {x1}): bad mass {p:.6} + good mass {q:.6} > 1")]
    RuleIntervals { x0: u64, x1: u64, p: f64, q: f64 },

    #[error("solver did not converge: residual {residual:.3e} after {sweeps} sweeps (tol {tol:.3e})")]
    NoConvergence {
        residual: f64,
        sweeps: u64,
        tol: f64,
    },

    #[error("truncated grid has a non-absorbing interior state ({x0}, {x1}); solution would be ill-posed")]
    NonAbsorbing { x0: u64, x1: u64 },

    #[error("xmax {xmax} is outside the supported range [{min}, {max}]")]
    XmaxOutOfRange { xmax: u32, min: u32, max: u32 },

    #[error("estimate requires at least one trial")]
    ZeroTrials,

    #[error("initial gap {delta0} must stay below the population size {n}")]
    InvalidGap { delta0: u64, n: u64 },

    #[error("no gap in [1, {hi}] reaches target {target} at the requested confidence (rho lower bound {best:.6} at gap {hi})")]
    NotBracketed { hi: u64, target: f64, best: f64 },

    #[error("threshold target must lie strictly between 0.5 and 1, got {target}")]
    InvalidTarget { target: f64 },

    #[error("operation requires a neutral spec (alpha0 = alpha1 and gamma0 = gamma1)")]
    NotNeutral,

    #[error("ODE integration did not reach the step-halving tolerance {tol:.1e} within {halvings} halvings")]
    OdeNoConvergence { tol: f64, halvings: u32 },

    #[error("ODE input must have positive finite dt and horizon and nonnegative finite densities (dt {dt}, horizon {horizon}, x0 {x0}, x1 {x1})")]
    OdeInput { dt: f64, horizon: f64, x0: f64, x1: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
