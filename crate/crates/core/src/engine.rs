//! Exact event-driven simulation of strictly dyadic branching Brownian motion.
//!
//! Lifetimes are `Exp(β)` and motion between branch epochs is an exact
//! Gaussian increment, so there is no time discretization. Only the positions
//! at the horizon are produced. Lineages are walked depth first: at each
//! branch one child is pushed on a stack and the walk continues with the
//! other, so memory is proportional to the number of pending subtrees rather
//! than to the population.

use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::replica_rng;

/// Default population cap.
pub const DEFAULT_MAX_PARTICLES: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub beta: f64,
    pub dim: usize,
    pub t_end: f64,
    pub max_particles: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(beta: f64, dim: usize, t_end: f64) -> Result<Self> {
        let cfg = Self {
            beta,
            dim,
            t_end,
            max_particles: DEFAULT_MAX_PARTICLES,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_particles(mut self, cap: u64) -> Self {
        self.max_particles = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::domain(format!("beta = {} must be > 0", self.beta)));
        }
        if self.dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::domain(format!("t_end = {} must be >= 0", self.t_end)));
        }
        if self.max_particles == 0 {
            return Err(Error::domain("max_particles must be at least 1"));
        }
        Ok(())
    }
}

/// Population at a fixed time, positions stored row-major (`dim` coordinates per particle).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSnapshot {
    time: f64,
    dim: usize,
    coords: Vec<f64>,
}

impl ParticleSnapshot {
    pub fn new(time: f64, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::Usage(format!(
                "snapshot needs a nonempty multiple of dim = {dim} coordinates, got {}",
                coords.len()
            )));
        }
        Ok(Self { time, dim, coords })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N_t`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Open Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::domain("ball center needs at least one coordinate"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::domain(format!("ball radius = {radius} must be > 0")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("ball center must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim.max(1)], radius)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        squared_distance(x, &self.center) < self.radius * self.radius
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// A fixed-radius ball whose center travels at speed `θ√(2β)` along `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingBallSpec {
    base: Ball,
    theta: f64,
    beta: f64,
    direction: Vec<f64>,
}

impl MovingBallSpec {
    /// If the base center is off the origin, the direction is the unit vector
    /// toward it; a supplied `direction` must agree. For an origin-centered
    /// base any unit vector may be given (default: first axis).
    pub fn new(base: Ball, theta: f64, beta: f64, direction: Option<Vec<f64>>) -> Result<Self> {
        if !(theta.is_finite() && (0.0..1.0).contains(&theta)) {
            return Err(Error::domain(format!(
                "theta = {theta} must satisfy 0 <= theta < 1"
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!("beta = {beta} must be > 0")));
        }
        let dim = base.dim();
        let center_norm = squared_norm(&base.center).sqrt();
        let direction = match (direction, center_norm > 0.0) {
            (Some(e), off_origin) => {
                if e.len() != dim {
                    return Err(Error::domain(format!(
                        "direction has {} coordinates, ball has {dim}",
                        e.len()
                    )));
                }
                let n = squared_norm(&e).sqrt();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!("direction norm {n} is not 1")));
                }
                if off_origin {
                    let cos = e.iter().zip(&base.center).map(|(a, b)| a * b).sum::<f64>()
                        / center_norm;
                    if (cos - 1.0).abs() > 1e-12 {
                        return Err(Error::domain(
                            "direction must point from the origin toward the ball center",
                        ));
                    }
                }
                e
            }
            (None, true) => base.center.iter().map(|c| c / center_norm).collect(),
            (None, false) => {
                let mut e = vec![0.0; dim];
                e[0] = 1.0;
                e
            }
        };
        Ok(Self {
            base,
            theta,
            beta,
            direction,
        })
    }

    pub fn base(&self) -> &Ball {
        &self.base
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Distance travelled by the center after time `t`.
    pub fn offset(&self, t: f64) -> f64 {
        self.theta * (2.0 * self.beta).sqrt() * t
    }
}

/// `B_t = B + θ√(2β) t e`.
pub fn moving_ball_at(spec: &MovingBallSpec, t: f64) -> Ball {
    let shift = spec.offset(t);
    Ball {
        center: spec
            .base
            .center
            .iter()
            .zip(&spec.direction)
            .map(|(c, e)| c + shift * e)
            .collect(),
        radius: spec.base.radius,
    }
}

/// Outcome of a streaming run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    /// Particles delivered to the visitor.
    pub visited: u64,
    /// The visitor asked to stop before the population was exhausted.
    pub stopped: bool,
}

/// Run a BBM started from one particle at `origin` at time `start`, until `end`,
/// handing each particle's position at `end` to `visit`.
///
/// The visitor may return `ControlFlow::Break` once the observable is decided;
/// the remaining subtrees are then skipped. Capacity is checked against the
/// population count implied by the branch events generated so far, and the
/// error names the time of the branch event that crossed the cap.
pub fn run_lineages<R, F>(
    rng: &mut R,
    beta: f64,
    origin: &[f64],
    start: f64,
    end: f64,
    max_particles: u64,
    mut visit: F,
) -> Result<RunSummary>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> ControlFlow<()>,
{
    let dim = origin.len();
    let inv_beta = 1.0 / beta;
    let mut population: u64 = 1;
    let mut visited: u64 = 0;
    let mut pending_times: Vec<f64> = Vec::new();
    let mut pending_coords: Vec<f64> = Vec::new();
    let mut x = origin.to_vec();
    let mut s = start;

    loop {
        // Follow the current lineage to the horizon, shelving one child per branch.
        loop {
            let life: f64 = rng.sample::<f64, _>(Exp1) * inv_beta;
            if s + life >= end {
                let sd = (end - s).sqrt();
                for xi in x.iter_mut() {
                    *xi += sd * rng.sample::<f64, _>(StandardNormal);
                }
                break;
            }
            let sd = life.sqrt();
            for xi in x.iter_mut() {
                *xi += sd * rng.sample::<f64, _>(StandardNormal);
            }
            s += life;
            population += 1;
            if population > max_particles {
                return Err(Error::Capacity {
                    cap: max_particles,
                    time: s,
                    replica: None,
                });
            }
            pending_times.push(s);
            pending_coords.extend_from_slice(&x);
        }
        visited += 1;
        if visit(&x).is_break() {
            return Ok(RunSummary {
                visited,
                stopped: true,
            });
        }
        match pending_times.pop() {
            Some(t) => {
                s = t;
                let at = pending_coords.len() - dim;
                x.copy_from_slice(&pending_coords[at..]);
                pending_coords.truncate(at);
            }
            None => {
                return Ok(RunSummary {
                    visited,
                    stopped: false,
                })
            }
        }
    }
}

/// Simulate replica 0 of `config`.
pub fn simulate(config: &SimConfig) -> Result<ParticleSnapshot> {
    simulate_replica(config, 0)
}

/// Simulate replica `index`: the BBM driven by stream `index` of `config.seed`.
pub fn simulate_replica(config: &SimConfig, index: u64) -> Result<ParticleSnapshot> {
    config.validate()?;
    let mut rng = replica_rng(config.seed, index);
    let mut coords = Vec::new();
    let origin = vec![0.0; config.dim];
    run_lineages(
        &mut rng,
        config.beta,
        &origin,
        0.0,
        config.t_end,
        config.max_particles,
        |x| {
            coords.extend_from_slice(x);
            ControlFlow::Continue(())
        },
    )
    .map_err(|e| e.with_replica(index))?;
    ParticleSnapshot::new(config.t_end, config.dim, coords)
}

/// `Z_t(B)`: particles strictly inside the open ball.
pub fn local_mass(snapshot: &ParticleSnapshot, ball: &Ball) -> u64 {
    assert_eq!(snapshot.dim(), ball.dim(), "ball and snapshot dimensions differ");
    snapshot.positions().filter(|x| ball.contains(x)).count() as u64
}

/// Particles in the closed complement `{|x| >= radius}`.
pub fn mass_outside(snapshot: &ParticleSnapshot, radius: f64) -> u64 {
    let r2 = radius * radius;
    snapshot
        .positions()
        .filter(|x| squared_norm(x) >= r2)
        .count() as u64
}

/// `M_t = max |x|` over the population.
pub fn support_radius(snapshot: &ParticleSnapshot) -> f64 {
    snapshot
        .positions()
        .map(squared_norm)
        .fold(0.0, f64::max)
        .sqrt()
}
