//! Monte Carlo estimates and hypothesis tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::pattern::PointPattern;

/// Smallest sample accepted by the asymptotic tests.
pub const MIN_TEST_SAMPLE: usize = 1000;

/// Mean with a normal confidence interval `value +- z stderr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub lower: f64,
    pub upper: f64,
    pub replicates: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64], z: f64) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::SampleTooSmall { got: xs.len(), min: 2 });
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        Ok(Self {
            value: mean,
            stderr: se,
            lower: mean - z * se,
            upper: mean + z * se,
            replicates: xs.len(),
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Half-width of the interval.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Points per unit volume in `w`, with a `z`-sigma interval.
///
/// When every replicate is empty the interval is `[0, 3 / (n vol)]`, the
/// usual 95% rule of three.
pub fn empirical_intensity(patterns: &[PointPattern], w: &Window, z: f64) -> Result<Estimate> {
    let vol = w.volume();
    let xs: Vec<f64> = patterns.iter().map(|p| p.count_in(w) as f64 / vol).collect();
    let mut e = Estimate::from_samples(&xs, z)?;
    if xs.iter().all(|&x| x == 0.0) {
        e.upper = 3.0 / (xs.len() as f64 * vol);
    }
    e.lower = e.lower.max(0.0);
    Ok(e)
}

/// `E[exp(-c N(w))]` for each `c`.
pub fn empirical_laplace(patterns: &[PointPattern], w: &Window, cs: &[f64], z: f64) -> Result<Vec<Estimate>> {
    let counts: Vec<f64> = patterns.iter().map(|p| p.count_in(w) as f64).collect();
    cs.iter()
        .map(|&c| {
            let xs: Vec<f64> = counts.iter().map(|n| (-c * n).exp()).collect();
            Estimate::from_samples(&xs, z)
        })
        .collect()
}

/// `P(N(probe) = 0)` for each probe box.
pub fn void_probability(patterns: &[PointPattern], probes: &[Window], z: f64) -> Result<Vec<Estimate>> {
    probes
        .iter()
        .map(|b| {
            let xs: Vec<f64> = patterns.iter().map(|p| f64::from(p.count_in(b) == 0)).collect();
            Estimate::from_samples(&xs, z)
        })
        .collect()
}

/// Outcome of one hypothesis test. The test accepts when the p-value
/// exceeds `threshold`, the (possibly Holm-adjusted) level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub accept: bool,
    pub replicates: usize,
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, statistic: f64, p_value: f64, threshold: f64, replicates: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            p_value,
            threshold,
            accept: p_value > threshold,
            replicates,
            seeds: Vec::new(),
        }
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
        self.accept = self.p_value > threshold;
    }
}

/// Kolmogorov limiting survival `P(K > lambda)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test at level `alpha`.
///
/// For discrete data the asymptotic p-value is conservative.
pub fn two_sample_ks(name: &str, a: &[f64], b: &[f64], alpha: f64) -> Result<TestReport> {
    let min = a.len().min(b.len());
    if min < MIN_TEST_SAMPLE {
        return Err(Error::SampleTooSmall {
            got: min,
            min: MIN_TEST_SAMPLE,
        });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    if x.iter().chain(&y).any(|v| v.is_nan()) {
        return Err(invalid("sample", "NaN in sample"));
    }
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    Ok(TestReport::new(name, d, p, alpha, x.len() + y.len()))
}

/// Pearson chi-square goodness of fit. Adjacent cells are pooled until each
/// expected count is at least 5.
pub fn chi_square(name: &str, observed: &[u64], expected_probs: &[f64], alpha: f64) -> Result<TestReport> {
    if observed.len() != expected_probs.len() || observed.is_empty() {
        return Err(invalid("chi_square", "observed and expected must be nonempty and equally long"));
    }
    let total: u64 = observed.iter().sum();
    if (total as usize) < MIN_TEST_SAMPLE {
        return Err(Error::SampleTooSmall {
            got: total as usize,
            min: MIN_TEST_SAMPLE,
        });
    }
    let psum: f64 = expected_probs.iter().sum();
    if !(psum > 0.0) || expected_probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(invalid("chi_square", "expected probabilities must be nonnegative"));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(expected_probs) {
        o += ob as f64;
        e += p / psum * total as f64;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    if cells.len() < 2 {
        return Ok(TestReport::new(name, 0.0, 1.0, alpha, total as usize));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).map_err(|e| invalid("chi_square", e.to_string()))?;
    Ok(TestReport::new(name, stat, dist.sf(stat), alpha, total as usize))
}

/// Two-sided normal test of `estimate.value == target`.
pub fn z_test(name: &str, estimate: &Estimate, target: f64, alpha: f64) -> TestReport {
    let z = if estimate.stderr > 0.0 {
        (estimate.value - target) / estimate.stderr
    } else if estimate.value == target {
        0.0
    } else {
        f64::INFINITY
    };
    let p = 2.0 * Normal::standard().sf(z.abs());
    TestReport::new(name, z, p, alpha, estimate.replicates)
}

/// Holm's step-down adjustment at family level `alpha`, in place.
pub fn holm(reports: &mut [TestReport], alpha: f64) {
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| reports[a].p_value.total_cmp(&reports[b].p_value));
    let m = reports.len();
    let mut rejecting = true;
    for (rank, &i) in order.iter().enumerate() {
        let level = alpha / (m - rank) as f64;
        reports[i].set_threshold(level);
        // Once one hypothesis is retained, all later ones are too.
        if !rejecting || reports[i].accept {
            rejecting = false;
            reports[i].accept = true;
        }
    }
}

/// Largest difference between two empirical count distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramDistance {
    pub max_discrepancy: f64,
    /// Half the L1 distance, the plug-in variation distance.
    pub total_variation: f64,
    /// Largest per-bin standard error of the difference.
    pub stderr: f64,
}

pub fn count_histogram_distance(a: &[usize], b: &[usize]) -> Result<HistogramDistance> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::SampleTooSmall { got: 0, min: 1 });
    }
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let hist = |xs: &[usize]| {
        let mut h = vec![0.0; top + 1];
        for &x in xs {
            h[x] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut out = HistogramDistance {
        max_discrepancy: 0.0,
        total_variation: 0.0,
        stderr: 0.0,
    };
    for (p, q) in ha.iter().zip(&hb) {
        out.max_discrepancy = out.max_discrepancy.max((p - q).abs());
        out.total_variation += 0.5 * (p - q).abs();
        out.stderr = out.stderr.max((p * (1.0 - p) / na + q * (1.0 - q) / nb).sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, Poisson};

    fn poisson_counts(mean: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
        let d = Poisson::new(mean).unwrap();
        (0..n).map(|_| d.sample(rng)).collect()
    }

    #[test]
    fn all_empty_intensity() {
        let w = Window::unit(1).unwrap();
        let ps = vec![PointPattern::empty(1); 10];
        let e = empirical_intensity(&ps, &w, 3.0).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.lower, 0.0);
        assert!(e.upper > 0.0);
        assert!(empirical_intensity(&ps[..1], &w, 3.0).is_err());
    }

    #[test]
    fn laplace_at_zero_is_one() {
        let w = Window::unit(1).unwrap();
        let ps = vec![PointPattern::from_times(&[0.5]).unwrap(), PointPattern::empty(1)];
        let e = empirical_laplace(&ps, &w, &[0.0], 3.0).unwrap();
        assert_eq!(e[0].value, 1.0);
    }

    #[test]
    fn identical_samples_accept() {
        let mut rng = RngStream::new(1, 0);
        let a = poisson_counts(5.0, 2000, &mut rng);
        let r = two_sample_ks("same", &a, &a, 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.accept);
        assert!(two_sample_ks("small", &a[..10], &a[..10], 0.05).is_err());
    }

    #[test]
    fn ks_calibration_and_power() {
        let mut accepts = 0;
        let mut rejects = 0;
        let meta = 200;
        for k in 0..meta {
            let mut rng = RngStream::new(2, k);
            let a = poisson_counts(5.0, 10_000, &mut rng);
            let b = poisson_counts(5.0, 10_000, &mut rng);
            let c = poisson_counts(6.0, 10_000, &mut rng);
            accepts += two_sample_ks("h0", &a, &b, 0.05).unwrap().accept as usize;
            rejects += !two_sample_ks("h1", &a, &c, 0.05).unwrap().accept as usize;
        }
        assert!(accepts as f64 >= 0.94 * meta as f64, "{accepts}");
        assert!(rejects as f64 > 0.99 * meta as f64, "{rejects}");
    }

    #[test]
    fn chi_square_uniform() {
        let r = chi_square("fair", &[250, 260, 240, 250], &[0.25; 4], 0.05).unwrap();
        assert!(r.accept);
        let r = chi_square("loaded", &[400, 200, 200, 200], &[0.25; 4], 0.05).unwrap();
        assert!(!r.accept);
    }

    #[test]
    fn z_test_on_exact_target() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0], 3.0).unwrap();
        let r = z_test("mean", &e, 2.0, 0.05);
        assert_eq!(r.statistic, 0.0);
        assert!(r.accept);
        assert!(!z_test("mean", &e, 10.0, 0.05).accept);
    }

    #[test]
    fn holm_steps_down() {
        let mut rs = vec![
            TestReport::new("a", 0.0, 0.01, 0.05, 1),
            TestReport::new("b", 0.0, 0.02, 0.05, 1),
            TestReport::new("c", 0.0, 0.04, 0.05, 1),
        ];
        holm(&mut rs, 0.05);
        // 0.01 <= 0.05/3 rejects, 0.02 <= 0.025 rejects, 0.04 <= 0.05 rejects.
        assert!(rs.iter().all(|r| !r.accept));
        rs[0].p_value = 0.03;
        holm(&mut rs, 0.05);
        assert!(rs.iter().all(|r| r.accept));
    }

    #[test]
    fn histogram_distance_of_identical_is_zero() {
        let d = count_histogram_distance(&[1, 2, 2, 3], &[3, 2, 1, 2]).unwrap();
        assert_eq!(d.max_discrepancy, 0.0);
        assert_eq!(d.total_variation, 0.0);
    }
}
