//! Rate functions for lower-tail deviations of the local mass.
//!
//! The central object is the one-parameter family
//!
//! ```text
//! f(ρ) = ρ + (sqrt((1-ρ)^2 - a(1-ρ)) - θ)^2 / ρ,   0 < ρ <= 1 - a,
//! ```
//!
//! whose infimum over `(0, ρ̄]` gives the dimensionless decay rate `I(θ, a)`.
//! Here `ρ` is the fraction of the horizon during which branching is
//! suppressed and the lone particle is displaced away from the ball, and
//! `ρ̄` is the point where no displacement is needed at all.
//!
//! `f'` is strictly increasing on `(0, 1 - a)`, so the minimizer is found by
//! bisection on `f'`. When `f'` is still non-positive just below `ρ̄` the
//! minimum sits on the boundary (only possible for `θ = 0`, `a >= 1/2`).

use serde::Serialize;

use crate::error::{Error, Result};

/// Bisection stops once the bracket is narrower than this.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Parameters `(θ, a)` of a lower-tail event, plus the branching rate `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateInput {
    theta: f64,
    a: f64,
    beta: f64,
}

impl RateInput {
    /// Validates `0 <= θ < 1`, `0 <= a < 1 - θ²` and `β > 0`.
    pub fn new(theta: f64, a: f64, beta: f64) -> Result<Self> {
        if !(theta.is_finite() && (0.0..1.0).contains(&theta)) {
            return Err(Error::domain(format!(
                "theta = {theta} must satisfy 0 <= theta < 1"
            )));
        }
        if !(a.is_finite() && a >= 0.0 && a < 1.0 - theta * theta) {
            return Err(Error::domain(format!(
                "a = {a} must satisfy 0 <= a < 1 - theta^2 = {}",
                1.0 - theta * theta
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!("beta = {beta} must be > 0")));
        }
        Ok(Self { theta, a, beta })
    }

    /// `β = 1`; the dimensionless problem.
    pub fn unit(theta: f64, a: f64) -> Result<Self> {
        Self::new(theta, a, 1.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True in the regime `0 < a < 1 - θ² < 1` where the sixth-degree
    /// polynomial characterization of the stationary point applies.
    pub fn is_open_regime(&self) -> bool {
        self.a > 0.0 && self.theta > 0.0
    }
}

/// Minimizer of `f` over `(0, ρ̄]` together with the minimum value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSolution {
    pub rho_hat: f64,
    /// `I(θ, a)`, dimensionless. Multiply by `β` for a decay rate.
    pub infimum: f64,
    /// The minimizer is `ρ̄` itself rather than an interior stationary point.
    pub at_boundary: bool,
}

/// `ρ̄ = 1 - a/2 - sqrt((a/2)² + θ²)`, the root of `(1-ρ)² - a(1-ρ) = θ²` in `(0, 1]`.
pub fn rho_bar(input: &RateInput) -> f64 {
    rho_bar_raw(input.theta, input.a)
}

fn rho_bar_raw(theta: f64, a: f64) -> f64 {
    let half = 0.5 * a;
    1.0 - half - half.hypot(theta)
}

/// `(1-ρ)² - a(1-ρ)`, written in factored form to limit cancellation.
#[inline]
fn displacement_sq(a: f64, rho: f64) -> f64 {
    (1.0 - rho) * (1.0 - a - rho)
}

#[inline]
fn f_unchecked(theta: f64, a: f64, rho: f64) -> f64 {
    let gap = displacement_sq(a, rho).max(0.0).sqrt() - theta;
    rho + gap * gap / rho
}

#[inline]
fn f_prime_unchecked(theta: f64, a: f64, rho: f64) -> f64 {
    let s = displacement_sq(a, rho).sqrt();
    let mut bracket = 2.0 * rho * rho - 1.0 + a - theta * theta;
    if theta != 0.0 {
        bracket += theta * (2.0 * (1.0 - a - rho) + a * rho) / s;
    }
    bracket / (rho * rho)
}

fn poly_p_unchecked(theta: f64, a: f64, rho: f64) -> f64 {
    let r2 = rho * rho;
    let quartic = 4.0 * r2 * r2 - 4.0 * (1.0 + theta * theta - a) * r2
        + (1.0 - theta * theta - a).powi(2);
    let quadratic = r2 - (2.0 - a) * rho + (1.0 - a);
    quartic * quadratic - (theta * a).powi(2) * r2
}

/// Evaluate `f` at `ρ ∈ (0, 1 - a]`.
pub fn f_value(input: &RateInput, rho: f64) -> Result<f64> {
    let upper = 1.0 - input.a;
    if !(rho > 0.0 && rho <= upper) {
        return Err(Error::domain(format!(
            "rho = {rho} outside the domain (0, {upper}] of f"
        )));
    }
    Ok(f_unchecked(input.theta, input.a, rho))
}

/// Evaluate `f'` at `ρ ∈ (0, 1 - a)`.
pub fn f_prime(input: &RateInput, rho: f64) -> Result<f64> {
    let upper = 1.0 - input.a;
    if !(rho > 0.0 && rho < upper) {
        return Err(Error::domain(format!(
            "rho = {rho} outside the open domain (0, {upper}) of f'"
        )));
    }
    Ok(f_prime_unchecked(input.theta, input.a, rho))
}

/// The sixth-degree polynomial whose sign is opposite to that of `f'`.
///
/// Only meaningful when `0 < a < 1 - θ² < 1`.
pub fn poly_p(input: &RateInput, rho: f64) -> Result<f64> {
    if !input.is_open_regime() {
        return Err(Error::domain(format!(
            "polynomial characterization needs 0 < a < 1 - theta^2 < 1, got theta = {}, a = {}",
            input.theta, input.a
        )));
    }
    Ok(poly_p_unchecked(input.theta, input.a, rho))
}

/// Solve `I(θ, a) = inf_{0 < ρ <= ρ̄} f(ρ)`.
pub fn minimize_rate(input: &RateInput) -> Result<RateSolution> {
    let (theta, a) = (input.theta, input.a);
    let upper = rho_bar_raw(theta, a);
    let eps = 1e-14 * (1.0 - a);
    let boundary = RateSolution {
        rho_hat: upper,
        infimum: f_unchecked(theta, a, upper),
        at_boundary: true,
    };

    let mut lo = eps;
    let mut hi = upper - eps;
    if hi <= lo || f_prime_unchecked(theta, a, hi) <= 0.0 {
        return Ok(boundary);
    }
    if f_prime_unchecked(theta, a, lo) >= 0.0 {
        return Err(Error::Numerical(format!(
            "f' does not change sign on [{lo}, {hi}] for theta = {theta}, a = {a}"
        )));
    }

    while hi - lo > ROOT_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_prime_unchecked(theta, a, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho_hat = 0.5 * (lo + hi);
    Ok(RateSolution {
        rho_hat,
        infimum: f_unchecked(theta, a, rho_hat),
        at_boundary: false,
    })
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("beta = {beta} must be > 0")))
    }
}

/// Decay rate for a fixed ball (`θ = 0`), with the phase transition at `a = 1/2`.
pub fn rate_static_ball(a: f64, beta: f64) -> Result<f64> {
    if !(a.is_finite() && (0.0..1.0).contains(&a)) {
        return Err(Error::domain(format!("a = {a} must satisfy 0 <= a < 1")));
    }
    check_beta(beta)?;
    let dimensionless = if a < 0.5 {
        2.0 * (2.0 * (1.0 - a)).sqrt() - 2.0 + a
    } else {
        1.0 - a
    };
    Ok(beta * dimensionless)
}

/// Decay rate of the probability that a ball moving at speed `θ√(2β)` is empty.
pub fn rate_empty_moving_ball(theta: f64, beta: f64) -> Result<f64> {
    if !(theta.is_finite() && (0.0..1.0).contains(&theta)) {
        return Err(Error::domain(format!(
            "theta = {theta} must satisfy 0 <= theta < 1"
        )));
    }
    check_beta(beta)?;
    Ok(2.0 * beta * (std::f64::consts::SQRT_2 - 1.0) * (1.0 - theta))
}

/// Decay rate for the mass outside the expanding ball `B(0, θ√(2β)t)`: `β·ρ̄`.
pub fn rate_outside_expanding_ball(input: &RateInput) -> Result<f64> {
    if input.theta <= 0.0 {
        return Err(Error::domain(
            "expanding-ball rate requires theta > 0 (theta = 0 is a fixed ball at the origin)",
        ));
    }
    Ok(input.beta * rho_bar(input))
}

/// One row of a rate table. `solution` is `None` when `(θ, a)` is outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub theta: f64,
    pub a: f64,
    pub beta: f64,
    pub solution: Option<RateSolution>,
    pub error: Option<String>,
}

impl RateRow {
    pub fn rate(&self) -> Option<f64> {
        self.solution.map(|s| s.infimum * self.beta)
    }
}

/// Evaluate the rate on a grid, `θ` outer and `a` inner.
pub fn rate_table(theta_grid: &[f64], a_grid: &[f64], beta: f64) -> Vec<RateRow> {
    let mut rows = Vec::with_capacity(theta_grid.len() * a_grid.len());
    for &theta in theta_grid {
        for &a in a_grid {
            let outcome = RateInput::new(theta, a, beta).and_then(|input| minimize_rate(&input));
            let (solution, error) = match outcome {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            rows.push(RateRow {
                theta,
                a,
                beta,
                solution,
                error,
            });
        }
    }
    rows
}
