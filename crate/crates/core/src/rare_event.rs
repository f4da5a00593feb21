//! Lower-tail probability estimation.
//!
//! Two estimators share the event definitions:
//!
//! * [`naive_mc`] runs independent BBMs and counts how often the event holds.
//! * [`importance_lower_bound`] simulates the cheapest strategy for the event:
//!   no branching on `[0, ρt]` while the lone particle drifts away from the
//!   ball, then ordinary BBM on `[ρt, t]`. Reweighting by the no-branch
//!   probability and the Gaussian likelihood ratio of the drift gives an
//!   unbiased estimate of `P(first branch > ρt, event)`, a lower bound on the
//!   event probability with the same exponential rate.
//!
//! Replicas run in parallel but are reduced in index order with compensated
//! sums, so results are bitwise independent of the thread count.

use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{moving_ball_at, run_lineages, squared_norm, Ball, MovingBallSpec, ParticleSnapshot, DEFAULT_MAX_PARTICLES};
use crate::error::{Error, Result};
use crate::rate::{minimize_rate, rate_outside_expanding_ball, rho_bar, RateInput};
use crate::rng::replica_rng;
use crate::stats::MomentAccumulator;

/// Replicas handed to the thread pool at a time.
const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    LowerTailInsideMovingBall,
    EmptyMovingBall,
    LowerTailOutsideExpandingBall,
}

/// Which lower-tail event is estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSpec {
    /// `Z_t(B_t) < e^{βat}`.
    InsideMovingBall { ball: MovingBallSpec, a: f64 },
    /// `Z_t(B_t) = 0`.
    EmptyMovingBall { ball: MovingBallSpec },
    /// `Z_t({|x| >= θ√(2β)t}) < e^{βat}`.
    OutsideExpandingBall { theta: f64, a: f64 },
}

impl EventSpec {
    pub fn inside(ball: MovingBallSpec, a: f64) -> Result<Self> {
        let spec = EventSpec::InsideMovingBall { ball, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn empty(ball: MovingBallSpec) -> Self {
        EventSpec::EmptyMovingBall { ball }
    }

    pub fn outside(theta: f64, a: f64) -> Result<Self> {
        let spec = EventSpec::OutsideExpandingBall { theta, a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> EventKind {
        match self {
            EventSpec::InsideMovingBall { .. } => EventKind::LowerTailInsideMovingBall,
            EventSpec::EmptyMovingBall { .. } => EventKind::EmptyMovingBall,
            EventSpec::OutsideExpandingBall { .. } => EventKind::LowerTailOutsideExpandingBall,
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            EventSpec::InsideMovingBall { ball, .. } | EventSpec::EmptyMovingBall { ball } => {
                ball.theta()
            }
            EventSpec::OutsideExpandingBall { theta, .. } => *theta,
        }
    }

    pub fn a(&self) -> f64 {
        match self {
            EventSpec::InsideMovingBall { a, .. } | EventSpec::OutsideExpandingBall { a, .. } => *a,
            EventSpec::EmptyMovingBall { .. } => 0.0,
        }
    }

    fn moving_ball(&self) -> Option<&MovingBallSpec> {
        match self {
            EventSpec::InsideMovingBall { ball, .. } | EventSpec::EmptyMovingBall { ball } => {
                Some(ball)
            }
            EventSpec::OutsideExpandingBall { .. } => None,
        }
    }

    /// `(θ, a)` as a validated rate input.
    pub fn rate_input(&self, beta: f64) -> Result<RateInput> {
        RateInput::new(self.theta(), self.a(), beta)
    }

    pub fn validate(&self) -> Result<()> {
        if let EventSpec::OutsideExpandingBall { theta, .. } = self {
            if !(*theta > 0.0 && *theta < 1.0) {
                return Err(Error::domain(format!(
                    "expanding-ball event needs 0 < theta < 1, got theta = {theta}"
                )));
            }
        }
        self.rate_input(1.0).map(|_| ())
    }

    fn check_beta(&self, beta: f64) -> Result<()> {
        if let Some(ball) = self.moving_ball() {
            if ball.beta() != beta {
                return Err(Error::Usage(format!(
                    "moving ball was built with beta = {} but the run uses beta = {beta}",
                    ball.beta()
                )));
            }
        }
        Ok(())
    }

    /// Region whose mass is compared against the threshold at time `t`.
    fn region(&self, beta: f64, t: f64) -> Region {
        match self {
            EventSpec::InsideMovingBall { ball, .. } | EventSpec::EmptyMovingBall { ball } => {
                Region::Inside(moving_ball_at(ball, t))
            }
            EventSpec::OutsideExpandingBall { theta, .. } => {
                let r = theta * (2.0 * beta).sqrt() * t;
                Region::OutsideRadiusSq(r * r)
            }
        }
    }

    /// Counts strictly below this make the event hold.
    fn threshold(&self, beta: f64, t: f64) -> f64 {
        (beta * self.a() * t).exp()
    }
}

enum Region {
    Inside(Ball),
    OutsideRadiusSq(f64),
}

impl Region {
    #[inline]
    fn hit(&self, x: &[f64]) -> bool {
        match self {
            Region::Inside(ball) => ball.contains(x),
            Region::OutsideRadiusSq(r2) => squared_norm(x) >= *r2,
        }
    }
}

/// Does the snapshot, taken at time `t`, realize the event?
pub fn event_indicator(
    snapshot: &ParticleSnapshot,
    spec: &EventSpec,
    beta: f64,
    t: f64,
) -> Result<bool> {
    if (snapshot.time() - t).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::Usage(format!(
            "snapshot taken at t = {} but the event is evaluated at t = {t}",
            snapshot.time()
        )));
    }
    if let Some(ball) = spec.moving_ball() {
        if ball.base().dim() != snapshot.dim() {
            return Err(Error::Usage(format!(
                "event ball has {} coordinates, snapshot has {}",
                ball.base().dim(),
                snapshot.dim()
            )));
        }
    }
    let region = spec.region(beta, t);
    let count = snapshot.positions().filter(|x| region.hit(x)).count();
    Ok((count as f64) < spec.threshold(beta, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    ImportanceLowerBound,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::ImportanceLowerBound => "importance_lower_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateResult {
    pub t: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub method: Method,
    /// Replicas on which the (sub-)event occurred.
    pub hits: u64,
    /// Branch-suppression fraction, importance estimator only.
    pub rho: Option<f64>,
}

/// Monte Carlo run parameters shared by both estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub beta: f64,
    pub dim: usize,
    pub t: f64,
    pub replicas: u64,
    pub seed: u64,
    pub max_particles: u64,
}

impl McRun {
    pub fn new(beta: f64, dim: usize, t: f64, replicas: u64, seed: u64) -> Self {
        Self {
            beta,
            dim,
            t,
            replicas,
            seed,
            max_particles: DEFAULT_MAX_PARTICLES,
        }
    }

    fn validate(&self, spec: &EventSpec) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::domain(format!("beta = {} must be > 0", self.beta)));
        }
        if self.dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::domain(format!("t = {} must be >= 0", self.t)));
        }
        if self.replicas == 0 {
            return Err(Error::domain("replicas must be at least 1"));
        }
        if self.max_particles == 0 {
            return Err(Error::domain("max_particles must be at least 1"));
        }
        spec.validate()?;
        spec.check_beta(self.beta)?;
        if let Some(ball) = spec.moving_ball() {
            if ball.base().dim() != self.dim {
                return Err(Error::domain(format!(
                    "event ball has {} coordinates but dim = {}",
                    ball.base().dim(),
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate `replica(i)` for every index, in parallel, folding results in index order.
fn reduce_replicas<F>(replicas: u64, replica: F) -> Result<(MomentAccumulator, u64)>
where
    F: Fn(u64) -> Result<(f64, bool)> + Sync,
{
    let mut acc = MomentAccumulator::default();
    let mut hits = 0;
    let mut start = 0;
    while start < replicas {
        let end = (start + CHUNK).min(replicas);
        let chunk: Vec<Result<(f64, bool)>> = (start..end).into_par_iter().map(&replica).collect();
        for (offset, outcome) in chunk.into_iter().enumerate() {
            let (w, hit) = outcome.map_err(|e| e.with_replica(start + offset as u64))?;
            acc.push(w);
            hits += u64::from(hit);
        }
        start = end;
    }
    Ok((acc, hits))
}

/// Stream a BBM from `origin` over `[start, t]` and decide the event without
/// materializing the population.
fn run_event<R: Rng + ?Sized>(
    rng: &mut R,
    run: &McRun,
    region: &Region,
    threshold: f64,
    origin: &[f64],
    start: f64,
) -> Result<bool> {
    let mut count = 0u64;
    run_lineages(rng, run.beta, origin, start, run.t, run.max_particles, |x| {
        if region.hit(x) {
            count += 1;
            if count as f64 >= threshold {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok((count as f64) < threshold)
}

/// Fraction of independent BBM replicas that realize the event.
pub fn naive_mc(spec: &EventSpec, run: &McRun) -> Result<EstimateResult> {
    run.validate(spec)?;
    let region = spec.region(run.beta, run.t);
    let threshold = spec.threshold(run.beta, run.t);
    let origin = vec![0.0; run.dim];
    let (_, hits) = reduce_replicas(run.replicas, |i| {
        let mut rng = replica_rng(run.seed, i);
        let hit = run_event(&mut rng, run, &region, threshold, &origin, 0.0)?;
        Ok((f64::from(u8::from(hit)), hit))
    })?;
    let n = run.replicas as f64;
    let p_hat = hits as f64 / n;
    Ok(EstimateResult {
        t: run.t,
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / n).sqrt(),
        replicas: run.replicas,
        method: Method::Naive,
        hits,
        rho: None,
    })
}

/// Knobs for the importance-sampling estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImportanceOptions {
    /// Branch-suppression fraction; `None` uses the optimal one.
    pub rho: Option<f64>,
    /// Treat the event as always realized, leaving only the weight.
    /// The mean weight then estimates `e^{-βρt}`.
    pub force_indicator: bool,
}

/// Default suppression fraction: `ρ̂` for events in a moving ball, `ρ̄` for
/// the expanding-ball event.
pub fn default_rho(spec: &EventSpec, beta: f64) -> Result<f64> {
    let input = spec.rate_input(beta)?;
    match spec.kind() {
        EventKind::LowerTailOutsideExpandingBall => Ok(rho_bar(&input)),
        _ => Ok(minimize_rate(&input)?.rho_hat),
    }
}

/// Drift of the lone particle during `[0, ρt]`.
fn strategy_drift(spec: &EventSpec, beta: f64, rho: f64) -> Result<Vec<f64>> {
    let input = spec.rate_input(beta)?;
    let Some(ball) = spec.moving_ball() else {
        return Ok(Vec::new());
    };
    let upper = rho_bar(&input);
    if !(rho > 0.0 && rho <= upper * (1.0 + 1e-12)) {
        return Err(Error::domain(format!(
            "rho = {rho} must lie in (0, rho_bar = {upper}] for a moving-ball event"
        )));
    }
    let (theta, a) = (input.theta(), input.a());
    let reach = ((1.0 - rho) * (1.0 - a - rho)).max(0.0).sqrt();
    let gap = (reach - theta).max(0.0);
    let speed = (2.0 * beta).sqrt() / rho * gap;
    Ok(ball.direction().iter().map(|e| -speed * e).collect())
}

/// Importance-sampling estimate of the strategy sub-event, with the default `ρ`.
pub fn importance_lower_bound(
    spec: &EventSpec,
    run: &McRun,
    rho: Option<f64>,
) -> Result<EstimateResult> {
    importance_lower_bound_with(
        spec,
        run,
        &ImportanceOptions {
            rho,
            force_indicator: false,
        },
    )
}

pub fn importance_lower_bound_with(
    spec: &EventSpec,
    run: &McRun,
    opts: &ImportanceOptions,
) -> Result<EstimateResult> {
    run.validate(spec)?;
    let rho = match opts.rho {
        Some(r) => r,
        None => default_rho(spec, run.beta)?,
    };
    if spec.kind() == EventKind::LowerTailOutsideExpandingBall && !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("rho = {rho} must lie in [0, 1]")));
    }
    let drift = strategy_drift(spec, run.beta, rho)?;
    let drift_sq = squared_norm(&drift);
    let quiet = rho * run.t;
    let region = spec.region(run.beta, run.t);
    let threshold = spec.threshold(run.beta, run.t);

    let (acc, hits) = reduce_replicas(run.replicas, |i| {
        let mut rng = replica_rng(run.seed, i);
        let sd = quiet.sqrt();
        let mut log_w = -run.beta * quiet;
        let mut x = vec![0.0; run.dim];
        for (j, xj) in x.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let mu = drift.get(j).copied().unwrap_or(0.0);
            *xj = mu * quiet + sd * z;
            log_w -= mu * *xj;
        }
        log_w += 0.5 * drift_sq * quiet;
        let hit = opts.force_indicator
            || run_event(&mut rng, run, &region, threshold, &x, quiet)?;
        Ok((if hit { log_w.exp() } else { 0.0 }, hit))
    })?;

    Ok(EstimateResult {
        t: run.t,
        p_hat: acc.mean().clamp(0.0, 1.0),
        stderr: acc.std_error(),
        replicas: run.replicas,
        method: Method::ImportanceLowerBound,
        hits,
        rho: Some(rho),
    })
}

/// Weighted least-squares fit of `log p̂` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

/// Fit `log p̂(t) ≈ intercept + slope·t`.
///
/// Weights are the inverse delta-method variances `(p̂/stderr)²`. Points
/// reported with zero standard error take the smallest positive variance in
/// the set (all-exact input falls back to equal weights). The slope error is
/// the residual-scaled WLS standard error, so exact exponential input gives 0.
pub fn decay_slope(estimates: &[EstimateResult]) -> Result<SlopeFit> {
    let zeros: Vec<f64> = estimates
        .iter()
        .filter(|e| e.p_hat.is_nan() || e.p_hat <= 0.0)
        .map(|e| e.t)
        .collect();
    if !zeros.is_empty() {
        return Err(Error::InsufficientData {
            reason: "zero probability estimates cannot be log-transformed".into(),
            t_values: zeros,
        });
    }
    let mut ts: Vec<f64> = estimates.iter().map(|e| e.t).collect();
    ts.sort_by(f64::total_cmp);
    let dupes: Vec<f64> = ts.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
    if !dupes.is_empty() {
        return Err(Error::InsufficientData {
            reason: "time points must be distinct".into(),
            t_values: dupes,
        });
    }
    if estimates.len() < 3 {
        return Err(Error::InsufficientData {
            reason: format!("need at least 3 points, got {}", estimates.len()),
            t_values: ts,
        });
    }

    let variances: Vec<f64> = estimates.iter().map(|e| (e.stderr / e.p_hat).powi(2)).collect();
    let floor = variances
        .iter()
        .copied()
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = variances
        .iter()
        .map(|&v| {
            if v > 0.0 {
                1.0 / v
            } else if floor.is_finite() {
                1.0 / floor
            } else {
                1.0
            }
        })
        .collect();

    let (mut sw, mut swt, mut swy, mut swtt, mut swty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (e, w) in estimates.iter().zip(&weights) {
        let y = e.p_hat.ln();
        sw += w;
        swt += w * e.t;
        swy += w * y;
        swtt += w * e.t * e.t;
        swty += w * e.t * y;
    }
    let delta = sw * swtt - swt * swt;
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Numerical("degenerate design in slope fit".into()));
    }
    let slope = (sw * swty - swt * swy) / delta;
    let intercept = (swtt * swy - swt * swty) / delta;
    let chi2: f64 = estimates
        .iter()
        .zip(&weights)
        .map(|(e, w)| w * (e.p_hat.ln() - intercept - slope * e.t).powi(2))
        .sum();
    let dof = (estimates.len() - 2) as f64;
    Ok(SlopeFit {
        slope,
        intercept,
        slope_stderr: (chi2 / dof * sw / delta).sqrt(),
        points: estimates.len(),
    })
}

/// Limiting decay rate `-lim (1/t) log P(event)`, in 1/time.
pub fn theory_rate(spec: &EventSpec, beta: f64) -> Result<f64> {
    spec.validate()?;
    let input = spec.rate_input(beta)?;
    match spec.kind() {
        EventKind::LowerTailOutsideExpandingBall => rate_outside_expanding_ball(&input),
        _ => Ok(beta * minimize_rate(&input)?.infimum),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fixed_ball(dim: usize, theta: f64) -> MovingBallSpec {
        MovingBallSpec::new(Ball::centered(dim, 1.0).unwrap(), theta, 1.0, None).unwrap()
    }

    fn snap(t: f64, coords: &[f64]) -> ParticleSnapshot {
        ParticleSnapshot::new(t, 1, coords.to_vec()).unwrap()
    }

    fn est(t: f64, p: f64, se: f64) -> EstimateResult {
        EstimateResult {
            t,
            p_hat: p,
            stderr: se,
            replicas: 1,
            method: Method::Naive,
            hits: 0,
            rho: None,
        }
    }

    #[test]
    fn spec_validation() {
        assert!(EventSpec::inside(fixed_ball(1, 0.6), 0.64).is_err());
        assert!(EventSpec::inside(fixed_ball(1, 0.6), 0.63).is_ok());
        assert!(EventSpec::outside(0.0, 0.1).is_err());
        assert!(EventSpec::outside(0.5, 0.8).is_err());
        assert_eq!(EventSpec::empty(fixed_ball(1, 0.2)).a(), 0.0);
    }

    #[test]
    fn indicator_cases() {
        let empty = EventSpec::empty(fixed_ball(1, 0.0));
        assert!(event_indicator(&snap(1.0, &[5.0, -7.0]), &empty, 1.0, 1.0).unwrap());
        // One particle inside: count 1 is not < e^0 = 1.
        assert!(!event_indicator(&snap(1.0, &[0.5, -7.0]), &empty, 1.0, 1.0).unwrap());

        let half = EventSpec::inside(fixed_ball(1, 0.0), 0.5).unwrap();
        // 2 < e^{0.5 * 2} = e
        assert!(event_indicator(&snap(2.0, &[0.1, -0.2, 9.0]), &half, 1.0, 2.0).unwrap());
        assert!(!event_indicator(&snap(2.0, &[0.1, -0.2, 0.3]), &half, 1.0, 2.0).unwrap());

        assert!(matches!(
            event_indicator(&snap(2.0, &[0.0]), &half, 1.0, 3.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn indicator_follows_the_moving_ball() {
        let spec = EventSpec::empty(fixed_ball(1, 0.5));
        // Center at 0.5 * sqrt(2) * 2 = 1.414..., radius 1.
        let t = 2.0;
        assert!(!event_indicator(&snap(t, &[1.0]), &spec, 1.0, t).unwrap());
        assert!(event_indicator(&snap(t, &[0.3]), &spec, 1.0, t).unwrap());
    }

    #[test]
    fn indicator_outside_expanding_ball() {
        let spec = EventSpec::outside(0.5, 0.0).unwrap();
        let t = 2.0;
        let r = 0.5 * 2f64.sqrt() * t;
        assert!(event_indicator(&snap(t, &[0.0, r - 1e-9]), &spec, 1.0, t).unwrap());
        // Closed complement: exactly on the sphere counts as outside.
        assert!(!event_indicator(&snap(t, &[0.0, r]), &spec, 1.0, t).unwrap());
    }

    #[test]
    fn naive_sure_event_and_single_replica() {
        // A ball far from the origin at a tiny horizon is always empty.
        let far = Ball::new(vec![100.0], 1.0).unwrap();
        let spec = EventSpec::empty(MovingBallSpec::new(far, 0.0, 1.0, None).unwrap());
        let r = naive_mc(&spec, &McRun::new(1.0, 1, 0.01, 50, 1)).unwrap();
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.stderr, 0.0);

        let spec = EventSpec::empty(fixed_ball(1, 0.0));
        let r = naive_mc(&spec, &McRun::new(1.0, 1, 1.0, 1, 9)).unwrap();
        assert!(r.p_hat == 0.0 || r.p_hat == 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn naive_is_seed_deterministic() {
        let spec = EventSpec::empty(fixed_ball(1, 0.0));
        let run = McRun::new(1.0, 1, 2.0, 2000, 77);
        assert_eq!(naive_mc(&spec, &run).unwrap(), naive_mc(&spec, &run).unwrap());
    }

    #[test]
    fn naive_capacity_error_names_replica() {
        let spec = EventSpec::outside(0.5, 0.5).unwrap();
        let mut run = McRun::new(1.0, 1, 20.0, 4, 1);
        run.max_particles = 50;
        match naive_mc(&spec, &run) {
            Err(Error::Capacity { replica, .. }) => assert_eq!(replica, Some(0)),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let spec = EventSpec::empty(fixed_ball(2, 0.0));
        assert!(naive_mc(&spec, &McRun::new(1.0, 1, 1.0, 10, 1)).is_err());
        assert!(matches!(
            naive_mc(&spec, &McRun::new(2.0, 2, 1.0, 10, 1)),
            Err(Error::Usage(_))
        ));
        assert!(naive_mc(&spec, &McRun::new(1.0, 2, 1.0, 0, 1)).is_err());
    }

    #[test]
    fn drift_points_away_from_ball() {
        let spec = EventSpec::empty(fixed_ball(1, 0.0));
        let rho = default_rho(&spec, 1.0).unwrap();
        assert_abs_diff_eq!(rho, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-11);
        let mu = strategy_drift(&spec, 1.0, rho).unwrap();
        // sqrt(2)/rho * (1 - rho)
        assert_abs_diff_eq!(mu[0], -(2f64.sqrt() / rho) * (1.0 - rho), epsilon = 1e-12);
        assert!(strategy_drift(&spec, 1.0, 1.2).is_err());
        assert!(strategy_drift(&spec, 1.0, 0.0).is_err());
        // At rho_bar no displacement is needed.
        let mu = strategy_drift(&spec, 1.0, 1.0).unwrap();
        assert_eq!(mu[0], 0.0);
    }

    #[test]
    fn default_rho_per_kind() {
        let spec = EventSpec::outside(0.3, 0.4).unwrap();
        assert_abs_diff_eq!(default_rho(&spec, 1.0).unwrap(), 0.8 - 0.13f64.sqrt(), epsilon = 1e-15);
        assert!(strategy_drift(&spec, 1.0, 0.5).unwrap().is_empty());
    }

    #[test]
    fn forced_indicator_weight_is_no_branch_probability() {
        let spec = EventSpec::empty(fixed_ball(1, 0.0));
        let run = McRun::new(1.0, 1, 3.0, 40_000, 5);
        let opts = ImportanceOptions {
            rho: None,
            force_indicator: true,
        };
        let r = importance_lower_bound_with(&spec, &run, &opts).unwrap();
        let rho = r.rho.unwrap();
        let target = (-rho * 3.0f64).exp();
        assert!((r.p_hat - target).abs() <= 3.0 * r.stderr, "{r:?} vs {target}");
        assert_eq!(r.hits, run.replicas);
    }

    #[test]
    fn zero_drift_forced_weight_is_exact() {
        let spec = EventSpec::outside(0.5, 0.0).unwrap();
        let run = McRun::new(1.0, 1, 2.0, 100, 5);
        let opts = ImportanceOptions {
            rho: Some(0.25),
            force_indicator: true,
        };
        let r = importance_lower_bound_with(&spec, &run, &opts).unwrap();
        assert_abs_diff_eq!(r.p_hat, (-0.5f64).exp(), epsilon = 1e-15);
        assert!(r.stderr < 1e-15);
    }

    #[test]
    fn slope_exact_exponential() {
        let pts: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&t| est(t, (-2.0 * t).exp(), 0.0))
            .collect();
        let fit = decay_slope(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, -2.0, epsilon = 1e-12);
        assert!(fit.slope_stderr < 1e-9);

        let scaled: Vec<_> = pts.iter().map(|e| est(e.t, 0.3 * e.p_hat, 0.0)).collect();
        let fit2 = decay_slope(&scaled).unwrap();
        assert_abs_diff_eq!(fit2.slope, fit.slope, epsilon = 1e-12);
        assert_abs_diff_eq!(fit2.intercept - fit.intercept, 0.3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn slope_errors() {
        let two = [est(1.0, 0.5, 0.1), est(2.0, 0.2, 0.1)];
        assert!(matches!(decay_slope(&two), Err(Error::InsufficientData { .. })));
        let with_zero = [est(1.0, 0.5, 0.1), est(2.0, 0.0, 0.0), est(3.0, 0.1, 0.01)];
        match decay_slope(&with_zero) {
            Err(Error::InsufficientData { t_values, .. }) => assert_eq!(t_values, vec![2.0]),
            other => panic!("{other:?}"),
        }
        let dup = [est(1.0, 0.5, 0.1), est(1.0, 0.4, 0.1), est(3.0, 0.1, 0.01)];
        assert!(decay_slope(&dup).is_err());
    }

    #[test]
    fn theory_rates_per_kind() {
        let spec = EventSpec::empty(fixed_ball(1, 0.0));
        assert_abs_diff_eq!(theory_rate(&spec, 1.0).unwrap(), 0.828_427_124_7, epsilon = 1e-9);
        let spec = EventSpec::inside(fixed_ball(1, 0.0), 0.5).unwrap();
        assert_abs_diff_eq!(theory_rate(&spec, 1.0).unwrap(), 0.5, epsilon = 1e-9);
        let spec = EventSpec::outside(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(theory_rate(&spec, 1.0).unwrap(), 0.5, epsilon = 1e-15);
    }
}
