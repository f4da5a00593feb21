//! Gaussian measure of a ball, `p_t(0, B) = P(X_t ∈ B)` for a standard
//! Brownian motion started at the origin, and the first-moment formula
//! `E[Z_t(B)] = e^{βt} p_t(0, B)`.

use rand::Rng;
use serde::Serialize;
use libm::{erf, erfc};
use statrs::function::gamma::ln_gamma;

use crate::engine::{squared_norm, Ball};
use crate::error::{Error, Result};
use crate::rng::replica_rng;

/// Nodes used by the quasi-random rule for offset balls in `d >= 2`.
pub const QMC_NODES: usize = 1_000_000;
const QMC_SHIFTS: usize = 16;
const QMC_SEED: u64 = 0x51_4D_43;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMethod {
    ErrorFunction,
    RadialQuadrature,
    QuasiMonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallMeasure {
    pub value: f64,
    /// Zero for the deterministic rules; three standard errors across
    /// randomly shifted lattices for the quasi-random rule.
    pub error_bound: f64,
    pub method: MeasureMethod,
}

/// `P(c - r < X < c + r)` for `X ~ N(0, t)`, via the error function.
fn interval_probability(lo: f64, hi: f64, t: f64) -> f64 {
    let s = (2.0 * t).sqrt();
    let (a, b) = (lo / s, hi / s);
    if a >= 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else if b <= 0.0 {
        0.5 * (erfc(-b) - erfc(-a))
    } else {
        0.5 * (erf(b) - erf(a))
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P(|Z| < radius)` for a standard normal `Z` in `R^dim`, by composite
/// Gauss-Legendre quadrature of the radial density.
fn radial_probability(radius: f64, dim: usize) -> f64 {
    let d = dim as f64;
    // Beyond this the radial density is below 1e-300.
    let cutoff = d.sqrt() + 40.0;
    let upper = radius.min(cutoff);
    let log_norm = (0.5 * d - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * d);
    let (nodes, weights) = gauss_legendre(20);
    let panels = 64;
    let h = upper / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            let rho = mid + 0.5 * h * x;
            let log_density = (d - 1.0) * rho.ln() - 0.5 * rho * rho - log_norm;
            total += w * 0.5 * h * log_density.exp();
        }
    }
    total.min(1.0)
}

/// Generalized golden-ratio Kronecker increments for `dim` coordinates.
fn kronecker_alphas(dim: usize) -> Vec<f64> {
    // phi_d is the positive root of x^(d+1) = x + 1.
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|j| phi.powi(-(j as i32)).fract()).collect()
}

fn qmc_probability(ball: &Ball, t: f64) -> BallMeasure {
    let dim = ball.dim();
    let alphas = kronecker_alphas(dim);
    let per_shift = QMC_NODES / QMC_SHIFTS;
    let side = 2.0 * ball.radius;
    let cube_volume = side.powi(dim as i32);
    let log_norm = -0.5 * dim as f64 * (2.0 * std::f64::consts::PI * t).ln();
    let mut shift_rng = replica_rng(QMC_SEED, dim as u64);
    let mut x = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut estimates = Vec::with_capacity(QMC_SHIFTS);
    for _ in 0..QMC_SHIFTS {
        let shift: Vec<f64> = (0..dim).map(|_| shift_rng.random::<f64>()).collect();
        u.copy_from_slice(&shift);
        let mut sum = 0.0;
        for _ in 0..per_shift {
            for j in 0..dim {
                u[j] = (u[j] + alphas[j]).fract();
                x[j] = ball.center[j] - ball.radius + side * u[j];
            }
            if ball.contains(&x) {
                sum += (log_norm - 0.5 * squared_norm(&x) / t).exp();
            }
        }
        estimates.push(cube_volume * sum / per_shift as f64);
    }
    let m = QMC_SHIFTS as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
    BallMeasure {
        value: mean.clamp(0.0, 1.0),
        error_bound: 3.0 * (var / m).sqrt(),
        method: MeasureMethod::QuasiMonteCarlo,
    }
}

/// `p_t(0, B)`.
pub fn ball_probability(t: f64, ball: &Ball) -> Result<BallMeasure> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(format!("t = {t} must be > 0")));
    }
    let dim = ball.dim();
    if dim == 1 {
        let c = ball.center[0];
        return Ok(BallMeasure {
            value: interval_probability(c - ball.radius, c + ball.radius, t),
            error_bound: 0.0,
            method: MeasureMethod::ErrorFunction,
        });
    }
    if ball.center.iter().all(|&c| c == 0.0) {
        return Ok(BallMeasure {
            value: radial_probability(ball.radius / t.sqrt(), dim),
            error_bound: 0.0,
            method: MeasureMethod::RadialQuadrature,
        });
    }
    Ok(qmc_probability(ball, t))
}

/// First-moment formula for the expected local mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassExpectation {
    pub value: f64,
    pub error_bound: f64,
    pub method: MeasureMethod,
}

/// `E[Z_t(B)] = e^{βt} p_t(0, B)`.
pub fn expected_local_mass(beta: f64, t: f64, ball: &Ball, dim: usize) -> Result<MassExpectation> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("beta = {beta} must be > 0")));
    }
    if dim != ball.dim() {
        return Err(Error::domain(format!(
            "ball has {} coordinates but dim = {dim}",
            ball.dim()
        )));
    }
    let p = ball_probability(t, ball)?;
    let growth = (beta * t).exp();
    Ok(MassExpectation {
        value: growth * p.value,
        error_bound: growth * p.error_bound,
        method: p.method,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn one_dimensional_unit_ball() {
        let m = expected_local_mass(1.0, 1.0, &Ball::centered(1, 1.0).unwrap(), 1).unwrap();
        // e * (Phi(1) - Phi(-1)) to 40 digits.
        assert_abs_diff_eq!(m.value, 1.855_742_440_956_174_8, epsilon = 1e-13);
        assert_eq!(m.method, MeasureMethod::ErrorFunction);
    }

    #[test]
    fn huge_radius_gives_total_mass() {
        for dim in [1, 2, 3, 5] {
            let m = expected_local_mass(1.0, 2.0, &Ball::centered(dim, 1e6).unwrap(), dim).unwrap();
            assert_abs_diff_eq!(m.value, 2f64.exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn offset_interval_in_far_tail() {
        // Both endpoints far in the upper tail: erfc keeps relative accuracy.
        let p = ball_probability(1.0, &Ball::new(vec![12.0], 1.0).unwrap()).unwrap();
        let expect = 0.5 * (erfc(11.0 / 2f64.sqrt()) - erfc(13.0 / 2f64.sqrt()));
        assert!(p.value > 0.0);
        assert_abs_diff_eq!(p.value / expect, 1.0, epsilon = 1e-12);
        let q = ball_probability(1.0, &Ball::new(vec![-12.0], 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(q.value / expect, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_rule_matches_chi_square_cdf() {
        for dim in [2usize, 3, 4, 7] {
            for &(r, t) in &[(0.3, 1.0), (1.0, 1.0), (2.5, 2.0), (1.0, 50.0)] {
                let p = ball_probability(t, &Ball::centered(dim, r).unwrap()).unwrap();
                let chi = ChiSquared::new(dim as f64).unwrap();
                assert_abs_diff_eq!(p.value, chi.cdf(r * r / t), epsilon = 1e-12);
                assert_eq!(p.method, MeasureMethod::RadialQuadrature);
            }
        }
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert_abs_diff_eq!(integral, 2.0 / 39.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn time_must_be_positive() {
        let b = Ball::centered(2, 1.0).unwrap();
        assert!(expected_local_mass(1.0, 0.0, &b, 2).is_err());
        assert!(expected_local_mass(1.0, -1.0, &b, 2).is_err());
        assert!(expected_local_mass(1.0, 1.0, &b, 3).is_err());
    }
}
