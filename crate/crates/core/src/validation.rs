//! Invariant suites for the three computational modules.
//!
//! Each check is deterministic (fixed seeds) and cheap enough to run from the
//! command line. The statistical checks use significance 0.001.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{local_mass, mass_outside, simulate_replica, Ball, MovingBallSpec, SimConfig};
use crate::error::Result;
use crate::rare_event::{
    decay_slope, importance_lower_bound, importance_lower_bound_with, naive_mc, theory_rate,
    EventSpec, ImportanceOptions, McRun,
};
use crate::rate::{
    f_prime, f_value, minimize_rate, poly_p, rate_static_ball, rate_empty_moving_ball, rate_outside_expanding_ball,
    rho_bar, RateInput,
};
use crate::rng::replica_rng;
use crate::stats::{chi_square_gof, ks_test, MomentAccumulator};

pub const SIGNIFICANCE: f64 = 0.001;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, outcome: Result<Check>) -> Self {
        outcome.unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }
}

/// `(θ, a)` pairs drawn uniformly from the open regime `0 < a < 1 - θ² < 1`,
/// kept a little away from the edges.
pub fn open_regime_pairs(count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = replica_rng(seed, 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let theta: f64 = rng.random_range(0.02..0.95);
        let a: f64 = rng.random_range(0.0..1.0) * (1.0 - theta * theta);
        if a > 0.01 && a < 1.0 - theta * theta - 0.01 {
            out.push((theta, a));
        }
    }
    out
}

/// `f'' > 0` on 100 interior points, by central differences of `f'`.
pub fn check_convexity(pairs: &[(f64, f64)]) -> Result<Check> {
    let mut worst = f64::INFINITY;
    for &(theta, a) in pairs {
        let input = RateInput::unit(theta, a)?;
        let upper = 1.0 - a;
        for k in 1..=100 {
            let rho = upper * k as f64 / 101.0;
            let h = 1e-5 * rho.min(upper - rho);
            let second = (f_prime(&input, rho + h)? - f_prime(&input, rho - h)?) / (2.0 * h);
            worst = worst.min(second);
        }
    }
    Ok(Check::new(
        "f'' > 0 on (0, 1-a)",
        worst > 0.0,
        format!("min finite-difference f'' = {worst:.3e}"),
    ))
}

/// `0 < ρ̂ < ρ̄`, `ρ̂ < sqrt((1-θ²-a)/2)`, `f'(ρ̄) = 1` and `|P(ρ̂)| <= 1e-8`.
pub fn check_minimizer_position(pairs: &[(f64, f64)]) -> Result<Vec<Check>> {
    let (mut inside, mut bound, mut slope_one, mut poly_root) = (true, true, 0.0f64, 0.0f64);
    for &(theta, a) in pairs {
        let input = RateInput::unit(theta, a)?;
        let sol = minimize_rate(&input)?;
        let upper = rho_bar(&input);
        inside &= sol.rho_hat > 0.0 && sol.rho_hat < upper && !sol.at_boundary;
        bound &= sol.rho_hat < ((1.0 - theta * theta - a) / 2.0).sqrt();
        slope_one = slope_one.max((f_prime(&input, upper)? - 1.0).abs());
        poly_root = poly_root.max(poly_p(&input, sol.rho_hat)?.abs());
    }
    Ok(vec![
        Check::new("0 < rho_hat < rho_bar", inside, format!("{} pairs", pairs.len())),
        Check::new("rho_hat < sqrt((1-theta^2-a)/2)", bound, format!("{} pairs", pairs.len())),
        Check::new(
            "f'(rho_bar) = 1",
            slope_one <= 1e-9,
            format!("max deviation {slope_one:.2e}"),
        ),
        Check::new(
            "|P(rho_hat)| <= 1e-8",
            poly_root <= 1e-8,
            format!("max |P(rho_hat)| = {poly_root:.2e}"),
        ),
    ])
}

/// `sign f'(ρ) = -sign P(ρ)` at sampled points of `(0, sqrt((1-θ²-a)/2))`.
///
/// Beyond that point `P` can pick up a pair of extra roots where `f' > 0`,
/// so the equivalence is only checked where it holds.
pub fn check_sign_equivalence(pairs: &[(f64, f64)]) -> Result<Check> {
    let mut mismatches = 0;
    let mut total = 0;
    for &(theta, a) in pairs {
        let input = RateInput::unit(theta, a)?;
        let upper = ((1.0 - theta * theta - a) / 2.0).sqrt().min(1.0 - a);
        for k in 1..50 {
            let rho = upper * k as f64 / 50.0;
            let d = f_prime(&input, rho)?;
            let p = poly_p(&input, rho)?;
            if d.abs() > 1e-9 && p.abs() > 1e-12 {
                total += 1;
                if d.signum() == p.signum() {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(Check::new(
        "sign f' = -sign P",
        mismatches == 0,
        format!("{mismatches} mismatches in {total} samples"),
    ))
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Strict decrease of `ρ̂` and `I` in `a` (fixed `θ`) and in `θ` (fixed `a`), on 0.05 grids.
pub fn check_monotonicity() -> Result<Vec<Check>> {
    let grid = |limit: f64| -> Vec<f64> {
        (0..)
            .map(|k| 0.05 * k as f64)
            .take_while(|&v| v < limit - 1e-12)
            .collect()
    };
    let mut in_a = true;
    for theta in grid(1.0) {
        let sols = grid(1.0 - theta * theta)
            .into_iter()
            .map(|a| minimize_rate(&RateInput::unit(theta, a)?))
            .collect::<Result<Vec<_>>>()?;
        if sols.len() >= 2 {
            let rhos: Vec<f64> = sols.iter().map(|s| s.rho_hat).collect();
            let vals: Vec<f64> = sols.iter().map(|s| s.infimum).collect();
            in_a &= strictly_decreasing(&rhos) && strictly_decreasing(&vals);
        }
    }
    let mut in_theta = true;
    for a in grid(1.0) {
        let sols = grid((1.0 - a).sqrt())
            .into_iter()
            .map(|theta| minimize_rate(&RateInput::unit(theta, a)?))
            .collect::<Result<Vec<_>>>()?;
        if sols.len() >= 2 {
            let rhos: Vec<f64> = sols.iter().map(|s| s.rho_hat).collect();
            let vals: Vec<f64> = sols.iter().map(|s| s.infimum).collect();
            in_theta &= strictly_decreasing(&rhos) && strictly_decreasing(&vals);
        }
    }
    Ok(vec![
        Check::new("rho_hat, I strictly decrease in a", in_a, "0.05 grid"),
        Check::new("rho_hat, I strictly decrease in theta", in_theta, "0.05 grid"),
    ])
}

/// Limits at the edges of the parameter domain, evaluated `1e-4` away, tolerance `1e-2`.
pub fn check_boundary_limits() -> Result<Check> {
    let off = 1e-4;
    let tol = 1e-2;
    let mut worst = 0.0f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    for &theta in &[0.1, 0.3, 0.5, 0.8] {
        let s = minimize_rate(&RateInput::unit(theta, off)?)?;
        worst = worst.max((s.rho_hat - (1.0 - theta) / sqrt2).abs());
        worst = worst.max((s.infimum - 2.0 * (sqrt2 - 1.0) * (1.0 - theta)).abs());
        let s = minimize_rate(&RateInput::unit(theta, 1.0 - theta * theta - off)?)?;
        worst = worst.max(s.infimum).max(s.rho_hat);
    }
    for &a in &[0.1, 0.3, 0.6, 0.9] {
        let s = minimize_rate(&RateInput::unit(off, a)?)?;
        let rho0 = ((1.0 - a) / 2.0).sqrt().min(1.0 - a);
        let val0 = rate_static_ball(a, 1.0)?;
        worst = worst.max((s.rho_hat - rho0).abs());
        worst = worst.max((s.infimum - val0).abs());
        let s = minimize_rate(&RateInput::unit((1.0 - a).sqrt() - off, a)?)?;
        worst = worst.max(s.infimum).max(s.rho_hat);
    }
    Ok(Check::new(
        "boundary limits",
        worst <= tol,
        format!("max deviation {worst:.2e} at offset {off}"),
    ))
}

/// `|ρ̂(θ, a + δ) - ρ̂(θ, a)| <= 1e-4` and likewise in `θ`, with `δ = 1e-6`.
pub fn check_continuity() -> Result<Check> {
    let delta = 1e-6;
    let mut worst = 0.0f64;
    for &(theta, a) in &[(0.2, 0.3), (0.5, 0.1), (0.7, 0.4), (0.0, 0.2), (0.4, 0.0)] {
        let base = minimize_rate(&RateInput::unit(theta, a)?)?.rho_hat;
        let da = minimize_rate(&RateInput::unit(theta, a + delta)?)?.rho_hat;
        let dt = minimize_rate(&RateInput::unit(theta + delta, a)?)?.rho_hat;
        worst = worst.max((da - base).abs()).max((dt - base).abs());
    }
    Ok(Check::new(
        "rho_hat separately continuous",
        worst <= 1e-4,
        format!("max jump {worst:.2e} for delta = {delta}"),
    ))
}

/// Solver against the closed forms at `θ = 0` and `a = 0`, and the
/// expanding-ball identity.
pub fn check_closed_forms(beta: f64) -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let a = 0.98 * k as f64 / 49.0;
        let s = minimize_rate(&RateInput::new(0.0, a, beta)?)?;
        worst = worst.max((s.infimum * beta - rate_static_ball(a, beta)?).abs());
        let theta = a;
        let s = minimize_rate(&RateInput::new(theta, 0.0, beta)?)?;
        worst = worst.max((s.infimum * beta - rate_empty_moving_ball(theta, beta)?).abs());
    }
    let mut identity = true;
    for (theta, a) in open_regime_pairs(20, 17) {
        let input = RateInput::new(theta, a, beta)?;
        identity &= rate_outside_expanding_ball(&input)? == beta * rho_bar(&input);
    }
    Ok(vec![
        Check::new(
            "solver matches closed forms",
            worst <= 1e-9,
            format!("max deviation {worst:.2e}"),
        ),
        Check::new("expanding-ball rate = beta * rho_bar", identity, "20 pairs"),
    ])
}

pub fn rate_function_suite() -> SuiteReport {
    let pairs = open_regime_pairs(20, 2024);
    let mut checks = Vec::new();
    checks.push(Check::from_result("f'' > 0 on (0, 1-a)", check_convexity(&pairs)));
    match check_minimizer_position(&pairs) {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::new("minimizer position", false, e.to_string())),
    }
    checks.push(Check::from_result("sign f' = -sign P", check_sign_equivalence(&pairs)));
    match check_monotonicity() {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::new("monotonicity", false, e.to_string())),
    }
    checks.push(Check::from_result("boundary limits", check_boundary_limits()));
    checks.push(Check::from_result("continuity", check_continuity()));
    match check_closed_forms(1.0) {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::new("closed forms", false, e.to_string())),
    }
    // f at rho_bar reduces to rho_bar itself.
    checks.push(Check::from_result("f(rho_bar) = rho_bar", (|| {
        let input = RateInput::unit(0.3, 0.4)?;
        let r = rho_bar(&input);
        let v = f_value(&input, r)?;
        Ok(Check::new("f(rho_bar) = rho_bar", (v - r).abs() < 1e-12, format!("{v} vs {r}")))
    })()));
    SuiteReport {
        suite: "rate_function".into(),
        checks,
    }
}

/// Bins `1..=k_max` plus a pooled tail, against `P(N=k) = e^{-βt}(1-e^{-βt})^{k-1}`.
pub fn check_total_mass_law(beta: f64, t: f64, replicas: u64, seed: u64) -> Result<Check> {
    let cfg = SimConfig::new(beta, 1, t)?.with_seed(seed);
    let q = 1.0 - (-beta * t).exp();
    // Pool every k whose upper-tail probability is below 0.1%.
    let k_max = ((0.001f64).ln() / q.ln()).floor().max(1.0) as usize;
    let mut counts = vec![0u64; k_max + 1];
    for i in 0..replicas {
        let n = simulate_replica(&cfg, i)?.len();
        counts[(n.min(k_max + 1)) - 1] += 1;
    }
    let total = replicas as f64;
    let mut expected: Vec<f64> = (1..=k_max)
        .map(|k| total * (1.0 - q) * q.powi(k as i32 - 1))
        .collect();
    expected.push(total * q.powi(k_max as i32));
    let test = chi_square_gof(&counts, &expected);
    Ok(Check::new(
        "N_t is geometric",
        test.passes(SIGNIFICANCE),
        format!(
            "chi2 = {:.2}, {} bins, p = {:.4}",
            test.statistic,
            counts.len(),
            test.p_value
        ),
    ))
}

/// Sample mean of `N_t` within 3 standard errors of `e^{βt}`.
pub fn check_mean_growth(beta: f64, t: f64, replicas: u64, seed: u64) -> Result<Check> {
    let cfg = SimConfig::new(beta, 1, t)?.with_seed(seed);
    let mut acc = MomentAccumulator::default();
    for i in 0..replicas {
        acc.push(simulate_replica(&cfg, i)?.len() as f64);
    }
    let target = (beta * t).exp();
    let z = (acc.mean() - target) / acc.std_error();
    Ok(Check::new(
        &format!("E[N_t] = e^(beta t) at t = {t}"),
        z.abs() <= 3.0,
        format!("mean {:.4} vs {target:.4} ({z:+.2} se)", acc.mean()),
    ))
}

/// Conditioned on `N_t = 1`, each coordinate is `N(0, t)` (KS test).
pub fn check_single_lineage(t: f64, dim: usize, replicas: u64, seed: u64) -> Result<Check> {
    let cfg = SimConfig::new(1.0, dim, t)?.with_seed(seed);
    let mut xs = Vec::new();
    for i in 0..replicas {
        let s = simulate_replica(&cfg, i)?;
        if s.len() == 1 {
            xs.extend_from_slice(s.coords());
        }
    }
    if xs.len() < 50 {
        return Ok(Check::new(
            "single lineage is Gaussian",
            false,
            format!("only {} single-particle samples", xs.len()),
        ));
    }
    let normal = Normal::new(0.0, t.sqrt()).expect("valid normal");
    let test = ks_test(&mut xs, |x| normal.cdf(x));
    Ok(Check::new(
        "single lineage is Gaussian",
        test.passes(SIGNIFICANCE),
        format!("D = {:.4}, n = {}, p = {:.4}", test.statistic, xs.len(), test.p_value),
    ))
}

pub fn check_partition_and_determinism(seed: u64) -> Result<Vec<Check>> {
    let cfg = SimConfig::new(1.0, 2, 4.0)?.with_seed(seed);
    let mut ok = true;
    for i in 0..20 {
        let s = simulate_replica(&cfg, i)?;
        for r in [0.0, 0.5, 1.0, 2.0, 4.0, 100.0] {
            let inside = if r > 0.0 {
                local_mass(&s, &Ball::centered(2, r)?)
            } else {
                0
            };
            ok &= inside + mass_outside(&s, r) == s.len() as u64;
        }
    }
    let same = simulate_replica(&cfg, 3)? == simulate_replica(&cfg, 3)?;
    Ok(vec![
        Check::new("inside + outside = N_t", ok, "20 snapshots x 6 radii"),
        Check::new("same seed, same snapshot", same, "replica 3"),
    ])
}

pub fn bbm_engine_suite() -> SuiteReport {
    let mut checks = vec![
        Check::from_result("N_t is geometric", check_total_mass_law(1.0, 2.0, 20_000, 101)),
        Check::from_result("E[N_t] at t = 1", check_mean_growth(1.0, 1.0, 20_000, 102)),
        Check::from_result("E[N_t] at t = 2", check_mean_growth(1.0, 2.0, 20_000, 103)),
        Check::from_result("single lineage", check_single_lineage(1.0, 2, 20_000, 104)),
    ];
    match check_partition_and_determinism(105) {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::new("partition", false, e.to_string())),
    }
    SuiteReport {
        suite: "bbm_engine".into(),
        checks,
    }
}

fn fixed_empty_ball(beta: f64) -> Result<EventSpec> {
    let ball = MovingBallSpec::new(Ball::centered(1, 1.0)?, 0.0, beta, None)?;
    Ok(EventSpec::empty(ball))
}

pub fn rare_event_suite() -> SuiteReport {
    let mut checks = Vec::new();
    let outcome = (|| -> Result<Vec<Check>> {
        let spec = fixed_empty_ball(1.0)?;
        let mut out = Vec::new();

        let naive = naive_mc(&spec, &McRun::new(1.0, 1, 3.0, 20_000, 201))?;
        let is = importance_lower_bound(&spec, &McRun::new(1.0, 1, 3.0, 20_000, 202), None)?;
        let combined = naive.stderr.hypot(is.stderr);
        out.push(Check::new(
            "importance estimate <= naive + 3 se",
            is.p_hat <= naive.p_hat + 3.0 * combined,
            format!("{:.4e} vs {:.4e}", is.p_hat, naive.p_hat),
        ));

        let forced = importance_lower_bound_with(
            &spec,
            &McRun::new(1.0, 1, 3.0, 20_000, 203),
            &ImportanceOptions {
                rho: None,
                force_indicator: true,
            },
        )?;
        let target = (-forced.rho.unwrap_or(0.0) * 3.0f64).exp();
        out.push(Check::new(
            "forced weight mean = exp(-beta rho t)",
            (forced.p_hat - target).abs() <= 3.0 * forced.stderr,
            format!("{:.5e} vs {target:.5e} +- {:.1e}", forced.p_hat, forced.stderr),
        ));

        let again = naive_mc(&spec, &McRun::new(1.0, 1, 3.0, 20_000, 201))?;
        out.push(Check::new("seed determinism", again == naive, ""));

        let ests = [2.0, 3.0, 4.0]
            .iter()
            .map(|&t| naive_mc(&spec, &McRun::new(1.0, 1, t, 20_000, 210 + t as u64)))
            .collect::<Result<Vec<_>>>()?;
        let fit = decay_slope(&ests)?;
        let rate = theory_rate(&spec, 1.0)?;
        out.push(Check::new(
            "fitted slope negative",
            rate > 0.0 && fit.slope < 0.0,
            format!("slope {:.3} (theory {:.3})", fit.slope, -rate),
        ));
        Ok(out)
    })();
    match outcome {
        Ok(cs) => checks.extend(cs),
        Err(e) => checks.push(Check::new("rare_event", false, e.to_string())),
    }
    SuiteReport {
        suite: "rare_event".into(),
        checks,
    }
}

pub fn run_all() -> Vec<SuiteReport> {
    vec![rate_function_suite(), bbm_engine_suite(), rare_event_suite()]
}
