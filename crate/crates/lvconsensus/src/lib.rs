//! Simulation, exact solving, and statistical verification for two-species
//! stochastic competitive Lotka-Volterra chains.
//!
//! The model tracks two interacting populations under individual births and
//! deaths, interspecific kills, and optional intraspecific kills, in either
//! a self-destructive or a non-self-destructive competition mode. The crate
//! provides:
//!
//! * the reaction system itself with event classification
//!   ([`model`]),
//! * exact-replayable jump-chain and continuous-time simulation
//!   ([`simulate`]),
//! * the dominating birth-death walker and its rule functions
//!   ([`birth_death`]),
//! * a shared-randomness coupling of the two with replay verification
//!   ([`coupling`]),
//! * an exact absorption-probability and mean-consensus-time solver on
//!   truncated grids ([`exact`]),
//! * Monte Carlo estimation, gap sweeps, and threshold search
//!   ([`experiments`]),
//! * the deterministic mean-field densities for contrast ([`ode`]),
//! * deterministic per-trial random streams ([`rng`]).
//!
//! Everything downstream of a seed is bit-reproducible: reaction order,
//! accumulation order, and stream layout are all fixed.

pub mod birth_death;
pub mod coupling;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod model;
pub mod ode;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
