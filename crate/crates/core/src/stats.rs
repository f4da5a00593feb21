//! Small statistical toolbox: compensated accumulation and the goodness-of-fit
//! tests used by the simulator checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Mean and standard error of the mean, accumulated in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentAccumulator {
    n: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum.value() / self.n as f64
        }
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.mean();
        ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Pearson chi-square test of observed counts against expected counts.
/// `dof = bins - 1`.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> TestOutcome {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2, "chi-square test needs at least two bins");
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).expect("positive dof");
    TestOutcome {
        statistic,
        p_value: dist.sf(statistic),
    }
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // Series below converges slowly here and the value is 1 to double precision.
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test. Sorts `sample` in place.
pub fn ks_test(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> TestOutcome {
    assert!(!sample.is_empty());
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sq = n.sqrt();
    TestOutcome {
        statistic: d,
        p_value: kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1e16, 1.0, -1e16, 1.0].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn moments() {
        let mut m = MomentAccumulator::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert_abs_diff_eq!(m.variance(), 5.0 / 3.0, epsilon = 1e-14);
        let mut one = MomentAccumulator::default();
        one.push(0.3);
        assert_eq!(one.std_error(), 0.0);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // Standard critical values of the Kolmogorov distribution.
        assert_abs_diff_eq!(kolmogorov_sf(1.358_1), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.949_5), 0.001, epsilon = 1e-5);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let t = chi_square_gof(&[10, 20, 30], &[10.0, 20.0, 30.0]);
        assert_eq!(t.statistic, 0.0);
        assert_abs_diff_eq!(t.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_rejects_wrong_distribution() {
        let mut uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_test(&mut uniform.clone(), |x| x.clamp(0.0, 1.0)).passes(0.5));
        assert!(!ks_test(&mut uniform, |x| x.clamp(0.0, 1.0).powi(2)).passes(0.001));
    }
}
