//! Large deviations for the local mass of branching Brownian motion.
//!
//! * [`rate`] solves the variational problem giving the lower-tail decay
//!   rate `β·I(θ, a)`, plus its closed-form special cases.
//! * [`engine`] simulates strictly dyadic BBM in `R^d` exactly and evaluates
//!   local-mass observables; [`gaussian`] gives first-moment references.
//! * [`rare_event`] estimates lower-tail probabilities by plain Monte Carlo
//!   and by a strategy-based importance sampler, and fits decay slopes.

pub mod engine;
pub mod error;
pub mod export;
pub mod gaussian;
pub mod rare_event;
pub mod rate;
pub mod rng;
pub mod stats;
pub mod validation;

pub use engine::{
    local_mass, mass_outside, moving_ball_at, simulate, simulate_replica, support_radius, Ball,
    MovingBallSpec, ParticleSnapshot, SimConfig,
};
pub use error::{Error, Result};
pub use gaussian::{expected_local_mass, MassExpectation};
pub use rare_event::{
    decay_slope, event_indicator, importance_lower_bound, naive_mc, theory_rate, EstimateResult,
    EventKind, EventSpec, McRun, Method, SlopeFit,
};
pub use rate::{minimize_rate, rate_table, RateInput, RateRow, RateSolution};
