use bbmtail::gaussian::{ball_probability, MeasureMethod};
use bbmtail::stats::MomentAccumulator;
use bbmtail::{
    expected_local_mass, local_mass, mass_outside, simulate_replica, support_radius, Ball,
    SimConfig,
};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[test]
fn first_split_by_median_lifetime() {
    // P(N_t > 1) = 1 - e^{-βt} = 1/2 at t = ln 2 / β.
    let beta = 2.0;
    let cfg = SimConfig::new(beta, 1, std::f64::consts::LN_2 / beta)
        .unwrap()
        .with_seed(41);
    let n = 40_000u64;
    let split = (0..n)
        .filter(|&i| simulate_replica(&cfg, i).unwrap().len() > 1)
        .count() as f64;
    let se = (0.25 / n as f64).sqrt();
    assert!((split / n as f64 - 0.5).abs() <= 4.0 * se, "fraction {}", split / n as f64);
}

#[test]
fn population_mean_grows_exponentially() {
    let cfg = SimConfig::new(1.0, 1, 5.0).unwrap().with_seed(42);
    let mut acc = MomentAccumulator::default();
    for i in 0..20_000 {
        acc.push(simulate_replica(&cfg, i).unwrap().len() as f64);
    }
    let target = 5f64.exp();
    assert!(
        (acc.mean() - target).abs() <= 4.0 * acc.std_error(),
        "mean {} vs {target} (se {})",
        acc.mean(),
        acc.std_error()
    );
}

#[test]
fn local_mass_matches_first_moment() {
    for (dim, center, t) in [
        (1usize, vec![0.0], 2.0),
        (1, vec![1.5], 3.0),
        (2, vec![0.0, 0.0], 2.0),
        (2, vec![1.0, -0.5], 2.5),
    ] {
        let ball = Ball::new(center, 1.0).unwrap();
        let cfg = SimConfig::new(1.0, dim, t).unwrap().with_seed(43);
        let mut acc = MomentAccumulator::default();
        for i in 0..20_000 {
            acc.push(local_mass(&simulate_replica(&cfg, i).unwrap(), &ball) as f64);
        }
        let expect = expected_local_mass(1.0, t, &ball, dim).unwrap();
        let tol = 4.0 * acc.std_error() + expect.error_bound;
        assert!(
            (acc.mean() - expect.value).abs() <= tol,
            "dim {dim}, t {t}: {} vs {}",
            acc.mean(),
            expect.value
        );
    }
}

#[test]
fn particles_spread_as_gaussians() {
    // Every particle position is N(0, t I): the mean squared norm per particle is d t.
    let (dim, t) = (3usize, 1.5);
    let cfg = SimConfig::new(1.0, dim, t).unwrap().with_seed(44);
    let mut acc = MomentAccumulator::default();
    for i in 0..5_000 {
        let s = simulate_replica(&cfg, i).unwrap();
        let sq: f64 = s.coords().iter().map(|x| x * x).sum();
        acc.push(sq / s.len() as f64);
    }
    assert!((acc.mean() - dim as f64 * t).abs() <= 4.0 * acc.std_error());
}

#[test]
fn support_radius_and_partition() {
    let cfg = SimConfig::new(1.0, 2, 3.0).unwrap().with_seed(45);
    for i in 0..50 {
        let s = simulate_replica(&cfg, i).unwrap();
        let m = support_radius(&s);
        assert!(mass_outside(&s, m * (1.0 - 1e-12)) >= 1);
        assert_eq!(mass_outside(&s, m + 1e-9), 0);
        assert_eq!(local_mass(&s, &Ball::centered(2, m + 1e-9).unwrap()), s.len() as u64);
    }
}

#[test]
fn local_mass_grows_at_the_expected_exponent() {
    // Mean of log Z_t(B(0,1)) / t drifts toward 1 from below.
    let ball = Ball::centered(1, 1.0).unwrap();
    let cfg = SimConfig::new(1.0, 1, 9.0).unwrap().with_seed(46);
    let mut acc = MomentAccumulator::default();
    for i in 0..100 {
        let z = local_mass(&simulate_replica(&cfg, i).unwrap(), &ball);
        if z > 0 {
            acc.push((z as f64).ln() / 9.0);
        }
    }
    assert!(acc.mean() > 0.6 && acc.mean() < 1.0, "{}", acc.mean());
}

/// `P(|Y - m e1| < R)` for a standard normal `Y` in `R^d`, by conditioning on
/// the first coordinate: `∫ φ(u) F_{χ²(d-1)}(R² - (u - m)²) du`.
fn offset_ball_oracle(m: f64, radius: f64, dim: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let chi = ChiSquared::new((dim - 1) as f64).unwrap();
    let n = 20_000;
    let (lo, hi) = (m - radius, m + radius);
    let h = (hi - lo) / n as f64;
    let g = |u: f64| {
        use statrs::distribution::Continuous;
        let rest = (radius * radius - (u - m).powi(2)).max(0.0);
        normal.pdf(u) * chi.cdf(rest)
    };
    // Composite Simpson.
    let mut s = g(lo) + g(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(lo + k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn quasi_monte_carlo_matches_reduction_oracle() {
    for (center, radius, t) in [
        (vec![1.0, 0.0], 1.0, 1.0),
        (vec![0.6, 0.8], 0.5, 2.0),
        (vec![0.0, 2.0, 0.0], 1.5, 1.0),
        (vec![1.0, 1.0, 1.0, 1.0], 2.0, 3.0),
    ] {
        let dim = center.len();
        let norm = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        let ball = Ball::new(center, radius).unwrap();
        let p = ball_probability(t, &ball).unwrap();
        assert_eq!(p.method, MeasureMethod::QuasiMonteCarlo);
        let oracle = offset_ball_oracle(norm / t.sqrt(), radius / t.sqrt(), dim);
        assert!(
            (p.value - oracle).abs() <= p.error_bound.max(1e-6),
            "dim {dim}: {} vs {oracle} (bound {})",
            p.value,
            p.error_bound
        );
        assert!(p.error_bound < 1e-3);
    }
}

/// `u(t, 0)` for `u_t = u_xx / 2 + β(u² - u)` on `[-half_width, half_width]`
/// with `u(0, ·) = initial` and `u` pinned to its initial edge values.
/// `u(t, x)` is the probability that every particle at time `t` of a
/// one-dimensional BBM started at `x` lies where `initial` equals 1.
fn kpp_at_origin(initial: impl Fn(f64) -> f64, half_width: f64, beta: f64, t: f64) -> f64 {
    let dx = 0.02;
    let n = (2.0 * half_width / dx).round() as usize + 1;
    let mut u: Vec<f64> = (0..n).map(|i| initial(-half_width + i as f64 * dx)).collect();
    let steps = (t / (0.4 * dx * dx)).ceil() as usize;
    let dt = t / steps as f64;
    let mut next = u.clone();
    for _ in 0..steps {
        for i in 1..n - 1 {
            let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
            next[i] = u[i] + dt * (0.5 * lap + beta * (u[i] * u[i] - u[i]));
        }
        std::mem::swap(&mut u, &mut next);
    }
    u[n / 2]
}

#[test]
fn emptiness_probability_matches_the_kpp_equation() {
    use bbmtail::{naive_mc, EventSpec, McRun, MovingBallSpec};
    let ball = MovingBallSpec::new(Ball::centered(1, 1.0).unwrap(), 0.0, 1.0, None).unwrap();
    let spec = EventSpec::empty(ball);
    for t in [2.0, 4.0] {
        let exact = kpp_at_origin(|x| if x.abs() >= 1.0 { 1.0 } else { 0.0 }, 20.0, 1.0, t);
        let est = naive_mc(&spec, &McRun::new(1.0, 1, t, 100_000, 47)).unwrap();
        assert!(
            (est.p_hat - exact).abs() <= 4.0 * est.stderr + 1e-4,
            "t {t}: {} vs {exact}",
            est.p_hat
        );
    }
}

#[test]
fn confinement_probability_matches_the_kpp_equation() {
    use bbmtail::{naive_mc, EventSpec, McRun};
    let spec = EventSpec::outside(0.5, 0.0).unwrap();
    for t in [2.0, 3.0] {
        let radius = 0.5 * std::f64::consts::SQRT_2 * t;
        let exact = kpp_at_origin(|x| if x.abs() < radius { 1.0 } else { 0.0 }, radius + 20.0, 1.0, t);
        let est = naive_mc(&spec, &McRun::new(1.0, 1, t, 100_000, 48)).unwrap();
        assert!(
            (est.p_hat - exact).abs() <= 4.0 * est.stderr + 1e-4,
            "t {t}: {} vs {exact}",
            est.p_hat
        );
    }
}
