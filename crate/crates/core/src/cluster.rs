//! Exact sampling of cluster processes with closed-form retention.
//!
//! A germ at `x` is retained with probability `p(x)` that its cluster hits
//! the window; each retained germ then receives a cluster conditioned on
//! hitting, obtained by rejection. The retained germs of a Poisson germ form
//! a Poisson process of intensity `p(x) mu(dx)`, which is sampled here by
//! thinning a piecewise-constant dominating intensity laid out in shells of
//! constant Chebyshev distance around the window.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::intensity::IntensityMeasureSpec;
use crate::pattern::PointPattern;
use crate::poisson::poisson_count;
use crate::quadrature::adaptive_simpson;
use crate::rng::RngStream;

/// Default floor below which conditioning by rejection is refused.
pub const REJECTION_FLOOR: f64 = 1e-9;
/// Default cap on points in a single cluster.
pub const POINT_CAP: usize = 1_000_000;
/// Default cap on rejection attempts for one conditioned cluster.
pub const ATTEMPT_CAP: u64 = 100_000_000;
/// Mass that may be left out beyond a truncation radius.
pub const TRUNCATION_MASS: f64 = 1e-12;

const SHELLS: usize = 64;

/// Retention probability of a germ, when it is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retention {
    ClosedForm(f64),
    Unavailable,
}

/// Random finite cluster attached to a germ location.
pub trait ClusterKernel: Send + Sync {
    fn dim(&self) -> usize;

    /// One cluster for a germ at `x`, already translated to `x`.
    fn sample(&self, x: &[f64], rng: &mut RngStream) -> Result<PointPattern>;

    /// `P(cluster of a germ at x has a point in w)`.
    fn retention_prob(&self, x: &[f64], w: &Window) -> Retention;

    /// Nonincreasing bound on [`retention_prob`](Self::retention_prob) for
    /// germs at Chebyshev distance at least `d` from `w`.
    fn retention_envelope(&self, d: f64, w: &Window) -> f64;

    /// Chebyshev distance from `w` beyond which germs of intensity at most
    /// `bound` carry less than [`TRUNCATION_MASS`] retained mass in total.
    fn truncation_radius(&self, w: &Window, bound: f64) -> f64;

    /// Radius containing every cluster point, if bounded.
    fn support_radius(&self) -> Option<f64>;

    /// Mean number of points in a cluster.
    fn mean_mass(&self) -> Option<f64>;

    fn includes_germ(&self) -> bool {
        false
    }
}

/// `1 - exp(-K)`, the probability that a Poisson cluster of mean `K` in the
/// window is nonempty there.
pub fn retention_prob_cox(kernel_mass: f64) -> Result<f64> {
    if !(kernel_mass >= 0.0) {
        return Err(invalid("kernel_mass", format!("{kernel_mass} is negative")));
    }
    Ok(-(-kernel_mass).exp_m1())
}

/// Offspring displacement law of a Cox cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Displacement {
    /// Independent uniform coordinates on `[lower_i, upper_i]`.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Isotropic Gaussian with standard deviation `sigma` per coordinate.
    Gaussian { dim: usize, sigma: f64 },
}

impl Displacement {
    fn dim(&self) -> usize {
        match self {
            Self::Uniform { lower, .. } => lower.len(),
            Self::Gaussian { dim, .. } => *dim,
        }
    }

    /// `P(D_i in [a, b])`.
    fn axis_prob(&self, i: usize, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        match self {
            Self::Uniform { lower, upper } => {
                let (lo, hi) = (lower[i], upper[i]);
                ((b.min(hi) - a.max(lo)).max(0.0) / (hi - lo)).clamp(0.0, 1.0)
            }
            Self::Gaussian { sigma, .. } => {
                let s = sigma * std::f64::consts::SQRT_2;
                (0.5 * (erfc(a / s) - erfc(b / s))).clamp(0.0, 1.0)
            }
        }
    }

    /// `max_i P(|D_i| >= d)`.
    fn radial_tail(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return 1.0;
        }
        match self {
            Self::Uniform { lower, upper } => (0..lower.len())
                .map(|i| {
                    let len = upper[i] - lower[i];
                    let right = (upper[i] - d.max(lower[i])).max(0.0);
                    let left = ((-d).min(upper[i]) - lower[i]).max(0.0);
                    ((right + left) / len).min(1.0)
                })
                .fold(0.0, f64::max),
            Self::Gaussian { sigma, .. } => erfc(d / (sigma * std::f64::consts::SQRT_2)).min(1.0),
        }
    }

    fn sample(&self, rng: &mut RngStream, out: &mut [f64]) {
        match self {
            Self::Uniform { lower, upper } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = lower[i] + (upper[i] - lower[i]) * rng.random::<f64>();
                }
            }
            Self::Gaussian { sigma, .. } => {
                let n = Normal::new(0.0, *sigma).expect("validated sigma");
                for o in out.iter_mut() {
                    *o = n.sample(rng);
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Uniform { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(invalid("displacement", "lower/upper must be nonempty and equally long"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
                    return Err(invalid("displacement", "need finite lower < upper on every axis"));
                }
            }
            Self::Gaussian { dim, sigma } => {
                if *dim == 0 || !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("displacement", "need dim > 0 and finite sigma > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Cox cluster: a Poisson number of points with mean `mean`, displaced
/// i.i.d. from the germ, plus the germ itself when `includes_germ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoxClusterKernel {
    pub mean: f64,
    pub displacement: Displacement,
    #[serde(default)]
    pub includes_germ: bool,
}

impl CoxClusterKernel {
    pub fn new(mean: f64, displacement: Displacement, includes_germ: bool) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(invalid("mean", "offspring mean must be finite and nonnegative"));
        }
        displacement.validate()?;
        Ok(Self {
            mean,
            displacement,
            includes_germ,
        })
    }

    /// Offspring uniform on `[lower, upper]` around the germ.
    pub fn uniform(mean: f64, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(mean, Displacement::Uniform { lower, upper }, false)
    }

    pub fn gaussian(mean: f64, dim: usize, sigma: f64) -> Result<Self> {
        Self::new(mean, Displacement::Gaussian { dim, sigma }, false)
    }

    /// `K(x, W - x)`: mean number of offspring of a germ at `x` landing in `w`.
    pub fn kernel_mass(&self, x: &[f64], w: &Window) -> f64 {
        self.mean
            * (0..x.len())
                .map(|i| self.displacement.axis_prob(i, w.lower()[i] - x[i], w.upper()[i] - x[i]))
                .product::<f64>()
    }
}

impl ClusterKernel for CoxClusterKernel {
    fn dim(&self) -> usize {
        self.displacement.dim()
    }

    fn sample(&self, x: &[f64], rng: &mut RngStream) -> Result<PointPattern> {
        let n = poisson_count(self.mean, rng)? as usize;
        if n > POINT_CAP {
            return Err(Error::PointCapExceeded(POINT_CAP));
        }
        let mut p = PointPattern::empty(x.len());
        if self.includes_germ {
            p.push(x)?;
        }
        let mut d = vec![0.0; x.len()];
        for _ in 0..n {
            self.displacement.sample(rng, &mut d);
            for (di, xi) in d.iter_mut().zip(x) {
                *di += xi;
            }
            p.push(&d)?;
        }
        Ok(p)
    }

    fn retention_prob(&self, x: &[f64], w: &Window) -> Retention {
        if self.includes_germ && w.contains(x) {
            return Retention::ClosedForm(1.0);
        }
        Retention::ClosedForm(retention_prob_cox(self.kernel_mass(x, w)).expect("nonnegative mass"))
    }

    fn retention_envelope(&self, d: f64, _w: &Window) -> f64 {
        if self.includes_germ && d <= 0.0 {
            return 1.0;
        }
        -(-self.mean * self.displacement.radial_tail(d)).exp_m1()
    }

    fn truncation_radius(&self, w: &Window, bound: f64) -> f64 {
        match &self.displacement {
            Displacement::Uniform { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()))
                .fold(0.0, f64::max),
            Displacement::Gaussian { sigma, .. } => {
                let env = |d: f64| self.mean * self.displacement.radial_tail(d);
                truncation_by_envelope(&env, w, bound, *sigma)
            }
        }
    }

    fn support_radius(&self) -> Option<f64> {
        match &self.displacement {
            Displacement::Uniform { lower, upper } => Some(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
            Displacement::Gaussian { .. } => None,
        }
    }

    fn mean_mass(&self) -> Option<f64> {
        Some(self.mean + if self.includes_germ { 1.0 } else { 0.0 })
    }

    fn includes_germ(&self) -> bool {
        self.includes_germ
    }
}

/// Cluster made of fixed offsets from the germ.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicKernel {
    offsets: Vec<Vec<f64>>,
    dim: usize,
}

impl DeterministicKernel {
    pub fn new(dim: usize, offsets: Vec<Vec<f64>>) -> Result<Self> {
        if offsets.iter().any(|o| o.len() != dim) {
            return Err(invalid("offsets", "offset dimension mismatch"));
        }
        Ok(Self { offsets, dim })
    }

    /// Single point at the germ.
    pub fn germ_only(dim: usize) -> Self {
        Self {
            offsets: vec![vec![0.0; dim]],
            dim,
        }
    }

    fn reach(&self) -> f64 {
        self.offsets
            .iter()
            .flat_map(|o| o.iter().map(|c| c.abs()))
            .fold(0.0, f64::max)
    }
}

impl ClusterKernel for DeterministicKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, x: &[f64], _rng: &mut RngStream) -> Result<PointPattern> {
        let mut p = PointPattern::empty(self.dim);
        for o in &self.offsets {
            let y: Vec<f64> = o.iter().zip(x).map(|(a, b)| a + b).collect();
            p.push(&y)?;
        }
        Ok(p)
    }

    fn retention_prob(&self, x: &[f64], w: &Window) -> Retention {
        let hit = self.offsets.iter().any(|o| {
            let y: Vec<f64> = o.iter().zip(x).map(|(a, b)| a + b).collect();
            w.contains(&y)
        });
        Retention::ClosedForm(if hit { 1.0 } else { 0.0 })
    }

    fn retention_envelope(&self, d: f64, _w: &Window) -> f64 {
        if d <= self.reach() {
            1.0
        } else {
            0.0
        }
    }

    fn truncation_radius(&self, _w: &Window, _bound: f64) -> f64 {
        self.reach()
    }

    fn support_radius(&self) -> Option<f64> {
        Some(
            self.offsets
                .iter()
                .map(|o| o.iter().map(|c| c * c).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        )
    }

    fn mean_mass(&self) -> Option<f64> {
        Some(self.offsets.len() as f64)
    }
}

/// Smallest multiple of `scale / 2` beyond which `bound * env(d)` integrated
/// over the shells around `w` is below [`TRUNCATION_MASS`]. `env` must be
/// nonincreasing and decay on the length scale `scale`.
pub(crate) fn truncation_by_envelope(env: &dyn Fn(f64) -> f64, w: &Window, bound: f64, scale: f64) -> f64 {
    let m = w.dim();
    let shell_growth = |d: f64| -> f64 {
        (0..m)
            .map(|i| {
                2.0 * (0..m)
                    .filter(|&j| j != i)
                    .map(|j| w.side(j) + 2.0 * d)
                    .product::<f64>()
            })
            .sum()
    };
    let tail = |d0: f64| adaptive_simpson(|d| bound * env(d) * shell_growth(d), d0, d0 + 80.0 * scale, 1e-15).value;
    let mut d = 0.0;
    while tail(d) > TRUNCATION_MASS {
        d += 0.5 * scale;
        if d > 1e4 * scale {
            return f64::INFINITY;
        }
    }
    d
}

/// A cluster conditioned to hit the window, with the number of rejection
/// rounds it took.
#[derive(Debug, Clone)]
pub struct ConditionedCluster {
    pub pattern: PointPattern,
    pub attempts: u64,
}

/// Draws clusters at `x` until one has a point in `w`.
pub fn sample_conditioned_cluster(
    kernel: &dyn ClusterKernel,
    x: &[f64],
    w: &Window,
    rng: &mut RngStream,
) -> Result<ConditionedCluster> {
    let retention = match kernel.retention_prob(x, w) {
        Retention::ClosedForm(p) => Some(p),
        Retention::Unavailable => None,
    };
    let (pattern, attempts) = conditioned_by_rejection(x, retention, ATTEMPT_CAP, rng, |rng| {
        let c = kernel.sample(x, rng)?;
        let hit = c.iter().any(|y| w.contains(y));
        Ok((c, hit))
    })?;
    Ok(ConditionedCluster { pattern, attempts })
}

/// Generic rejection loop shared by cluster and grain conditioning.
pub(crate) fn conditioned_by_rejection<T, F>(
    x: &[f64],
    retention: Option<f64>,
    cap: u64,
    rng: &mut RngStream,
    mut draw: F,
) -> Result<(T, u64)>
where
    F: FnMut(&mut RngStream) -> Result<(T, bool)>,
{
    if let Some(p) = retention {
        if p < REJECTION_FLOOR {
            return Err(Error::ConditioningTooRare(p));
        }
    }
    for attempt in 1..=cap {
        let (value, hit) = draw(rng)?;
        if hit {
            return Ok((value, attempt));
        }
    }
    Err(Error::AttemptCapExceeded {
        cap,
        location: x.to_vec(),
        retention: retention.unwrap_or(f64::NAN),
    })
}

/// Retention data needed to thin a Poisson germ around a box.
pub struct GermThinning<'a> {
    /// `p(x)` in `[0, 1]`.
    pub retention: &'a dyn Fn(&[f64]) -> Result<f64>,
    /// Nonincreasing bound on `p` in terms of Chebyshev distance to the box.
    pub envelope: &'a dyn Fn(f64) -> f64,
    /// Chebyshev distance beyond which retained mass is negligible.
    pub truncation: f64,
    /// Box outside of which the germ intensity vanishes, if any.
    pub support: Option<&'a Window>,
}

/// Poisson process of intensity `p(x) mu(dx)`: the germ points that are
/// retained, in generation order.
///
/// Non-atomic germs are sampled from a dominating intensity that is constant
/// on Chebyshev shells around `w` and equal to `bound * envelope(inner
/// distance)` there, then thinned exactly by `mu(x) p(x) / dominating`.
pub fn sample_thinned_germ(
    germ: &IntensityMeasureSpec,
    w: &Window,
    thin: &GermThinning<'_>,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    if germ.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: germ.dim(),
        });
    }
    let mut out = Vec::new();
    if let IntensityMeasureSpec::Atomic { atoms, .. } = germ {
        for (x, m) in atoms {
            let p = (thin.retention)(x)?;
            for _ in 0..poisson_count(m * p, rng)? {
                out.push(x.clone());
            }
        }
        return Ok(out);
    }
    let bound = germ.bound().expect("non-atomic germ has a bound");
    if bound == 0.0 {
        return Ok(out);
    }
    let mut reach = thin.truncation;
    if let Some(s) = thin.support {
        let far = (0..w.dim())
            .map(|i| (w.lower()[i] - s.lower()[i]).max(s.upper()[i] - w.upper()[i]))
            .fold(0.0, f64::max);
        reach = reach.min(far.max(0.0));
    }
    if !reach.is_finite() {
        return Err(Error::RetentionDiverges);
    }

    let mut accept = |x: Vec<f64>, env: f64, d_lo: f64, rng: &mut RngStream| -> Result<()> {
        if let Some(s) = thin.support {
            if !s.contains(&x) {
                return Ok(());
            }
        }
        let p = (thin.retention)(&x)?;
        if p > env * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::EnvelopeViolated {
                distance: d_lo,
                prob: p,
                envelope: env,
            });
        }
        let mu = germ.density_at(&x)?;
        if rng.random::<f64>() * bound * env < mu * p {
            out.push(x);
        }
        Ok(())
    };

    // Inside the window.
    let env0 = (thin.envelope)(0.0).min(1.0);
    if env0 > 0.0 {
        for _ in 0..poisson_count(bound * env0 * w.volume(), rng)? {
            let x = w.sample_uniform(rng);
            accept(x, env0, 0.0, rng)?;
        }
    }
    if reach > 0.0 {
        let h = reach / SHELLS as f64;
        for k in 0..SHELLS {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            let env = (thin.envelope)(a).min(1.0);
            if env <= 0.0 {
                continue;
            }
            let vol = w.buffered_volume(b) - w.buffered_volume(a);
            for _ in 0..poisson_count(bound * env * vol, rng)? {
                let x = uniform_in_shell(w, a, b, rng);
                accept(x, env, a, rng)?;
            }
        }
    }
    Ok(out)
}

/// Uniform point in `(w grown by b) \ (w grown by a)`.
fn uniform_in_shell(w: &Window, a: f64, b: f64, rng: &mut RngStream) -> Vec<f64> {
    let m = w.dim();
    let inner: Vec<f64> = (0..m).map(|i| w.side(i) + 2.0 * a).collect();
    let outer: Vec<f64> = (0..m).map(|i| w.side(i) + 2.0 * b).collect();
    // Piece i: axes < i inside the inner range, axis i in the outer slabs,
    // axes > i anywhere in the outer range.
    let vols: Vec<f64> = (0..m)
        .map(|i| {
            inner[..i].iter().product::<f64>() * (outer[i] - inner[i]) * outer[i + 1..].iter().product::<f64>()
        })
        .collect();
    let total: f64 = vols.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut piece = m - 1;
    for (i, v) in vols.iter().enumerate() {
        if u < *v {
            piece = i;
            break;
        }
        u -= v;
    }
    (0..m)
        .map(|j| {
            let (lo, hi) = (w.lower()[j], w.upper()[j]);
            if j < piece {
                lo - a + inner[j] * rng.random::<f64>()
            } else if j == piece {
                let off = (b - a) * rng.random::<f64>();
                if rng.random::<bool>() {
                    lo - a - off
                } else {
                    hi + a + off
                }
            } else {
                lo - b + outer[j] * rng.random::<f64>()
            }
        })
        .collect()
}

/// Exact sample of a Poisson-germ cluster process restricted to `w`.
pub fn brix_kendall_sample(
    germ: &IntensityMeasureSpec,
    kernel: &dyn ClusterKernel,
    w: &Window,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    brix_kendall_sample_with_support(germ, None, kernel, w, rng)
}

/// As [`brix_kendall_sample`], with the germ intensity vanishing outside `support`.
pub fn brix_kendall_sample_with_support(
    germ: &IntensityMeasureSpec,
    support: Option<&Window>,
    kernel: &dyn ClusterKernel,
    w: &Window,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    if kernel.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: kernel.dim(),
        });
    }
    let retention = |x: &[f64]| match kernel.retention_prob(x, w) {
        Retention::ClosedForm(p) => Ok(p),
        Retention::Unavailable => Err(Error::RetentionUnavailable),
    };
    let envelope = |d: f64| kernel.retention_envelope(d, w);
    let truncation = match germ.bound() {
        Some(b) => kernel.truncation_radius(w, b),
        None => 0.0,
    };
    let germs = sample_thinned_germ(
        germ,
        w,
        &GermThinning {
            retention: &retention,
            envelope: &envelope,
            truncation,
            support,
        },
        rng,
    )?;
    attach_conditioned_clusters(&germs, kernel, w, rng)
}

/// Superposes conditioned clusters on already-thinned germ points and
/// restricts to `w`. Germ `i` uses child stream `i` of `rng`.
pub fn attach_conditioned_clusters(
    germs: &[Vec<f64>],
    kernel: &dyn ClusterKernel,
    w: &Window,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    let mut out = PointPattern::empty(w.dim());
    for (i, x) in germs.iter().enumerate() {
        let mut child = rng.child(i as u64);
        let c = sample_conditioned_cluster(kernel, x, w, &mut child)?;
        out.extend(&c.pattern.restrict(w))?;
    }
    Ok(out)
}

/// `integral of p(x) mu(dx)` for a homogeneous germ on the line, by quadrature.
pub fn retained_mass_1d(rate: f64, kernel: &dyn ClusterKernel, w: &Window) -> Result<f64> {
    if w.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: w.dim() });
    }
    let reach = kernel.truncation_radius(w, rate);
    let p = |t: f64| match kernel.retention_prob(&[t], w) {
        Retention::ClosedForm(p) => p,
        Retention::Unavailable => f64::NAN,
    };
    let (lo, hi) = (w.lower()[0], w.upper()[0]);
    let v = adaptive_simpson(p, lo - reach, lo, 1e-12).value
        + adaptive_simpson(p, lo, hi, 1e-12).value
        + adaptive_simpson(p, hi, hi + reach, 1e-12).value;
    if v.is_nan() {
        return Err(Error::RetentionUnavailable);
    }
    Ok(rate * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ac_kernel() -> CoxClusterKernel {
        CoxClusterKernel::uniform(2.0, vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn retention_prob_cox_examples() {
        assert_eq!(retention_prob_cox(0.0).unwrap(), 0.0);
        assert!((retention_prob_cox(std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-15);
        assert!((retention_prob_cox(1.0).unwrap() - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!(retention_prob_cox(-1.0).is_err());
    }

    #[test]
    fn cox_retention_is_one_minus_exp_of_kernel_mass() {
        let k = ac_kernel();
        let w = Window::interval(0.0, 10.0).unwrap();
        for x in [-0.7, -0.2, 0.3, 9.5, 9.99] {
            let kmass = k.kernel_mass(&[x], &w);
            let Retention::ClosedForm(p) = k.retention_prob(&[x], &w) else { unreachable!() };
            assert!((p - (1.0 - (-kmass).exp())).abs() < 1e-15);
        }
        assert_eq!(k.kernel_mass(&[-2.0], &w), 0.0);
        assert!((k.kernel_mass(&[-0.25], &w) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_dominates_retention() {
        let w = Window::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let kernels = [
            CoxClusterKernel::uniform(3.0, vec![-0.5, -1.0], vec![1.0, 0.25]).unwrap(),
            CoxClusterKernel::gaussian(2.0, 2, 0.4).unwrap(),
        ];
        let mut rng = RngStream::new(9, 0);
        for k in &kernels {
            for _ in 0..2000 {
                let x: Vec<f64> = vec![-3.0 + 8.0 * rng.random::<f64>(), -3.0 + 7.0 * rng.random::<f64>()];
                let d = w.linf_distance(&x);
                let Retention::ClosedForm(p) = k.retention_prob(&x, &w) else { unreachable!() };
                assert!(p <= k.retention_envelope(d, &w) + 1e-15, "x={x:?}");
            }
        }
    }

    #[test]
    fn monotone_in_window() {
        let k = CoxClusterKernel::gaussian(1.5, 2, 0.7).unwrap();
        let small = Window::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let big = Window::new(vec![-0.5, 0.0], vec![2.0, 1.5]).unwrap();
        let mut rng = RngStream::new(10, 0);
        for _ in 0..1000 {
            let x = vec![-3.0 + 6.0 * rng.random::<f64>(), -3.0 + 6.0 * rng.random::<f64>()];
            let (Retention::ClosedForm(a), Retention::ClosedForm(b)) =
                (k.retention_prob(&x, &small), k.retention_prob(&x, &big))
            else {
                unreachable!()
            };
            assert!(b >= a);
        }
    }

    #[test]
    fn deterministic_kernel_inside_window_needs_one_attempt() {
        let k = DeterministicKernel::germ_only(2);
        let w = Window::unit(2).unwrap();
        let mut rng = RngStream::new(1, 0);
        let c = sample_conditioned_cluster(&k, &[0.3, 0.4], &w, &mut rng).unwrap();
        assert_eq!(c.attempts, 1);
        assert_eq!(c.pattern.to_points(), vec![vec![0.3, 0.4]]);
    }

    #[test]
    fn rare_conditioning_is_refused() {
        let k = ac_kernel();
        let w = Window::interval(0.0, 10.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        let err = sample_conditioned_cluster(&k, &[-5.0], &w, &mut rng).unwrap_err();
        assert!(err.to_string().contains("conditioning event too rare"));
    }

    #[test]
    fn zero_germ_gives_empty_sample() {
        let germ = IntensityMeasureSpec::lebesgue(1, 0.0).unwrap();
        let w = Window::interval(0.0, 10.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert!(brix_kendall_sample(&germ, &ac_kernel(), &w, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn samples_stay_in_window_and_are_deterministic() {
        let germ = IntensityMeasureSpec::lebesgue(2, 2.0).unwrap();
        let k = CoxClusterKernel::gaussian(3.0, 2, 0.3).unwrap();
        let w = Window::unit(2).unwrap();
        let a = brix_kendall_sample(&germ, &k, &w, &mut RngStream::new(4, 2)).unwrap();
        let b = brix_kendall_sample(&germ, &k, &w, &mut RngStream::new(4, 2)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| w.contains(x)));
    }

    #[test]
    fn shells_are_uniform_and_inside() {
        let w = Window::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let mut rng = RngStream::new(3, 0);
        let mut left = 0usize;
        let n = 40_000;
        for _ in 0..n {
            let x = uniform_in_shell(&w, 0.5, 1.0, &mut rng);
            let d = w.linf_distance(&x);
            assert!((0.5..=1.0).contains(&d), "{x:?} at {d}");
            if x[0] < 1.0 {
                left += 1;
            }
        }
        // Shell is symmetric about x = 1.
        let frac = left as f64 / n as f64;
        assert!((frac - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn unavailable_retention_is_an_error() {
        struct Opaque;
        impl ClusterKernel for Opaque {
            fn dim(&self) -> usize {
                1
            }
            fn sample(&self, x: &[f64], _: &mut RngStream) -> Result<PointPattern> {
                PointPattern::from_times(&[x[0]])
            }
            fn retention_prob(&self, _: &[f64], _: &Window) -> Retention {
                Retention::Unavailable
            }
            fn retention_envelope(&self, _: f64, _: &Window) -> f64 {
                1.0
            }
            fn truncation_radius(&self, _: &Window, _: f64) -> f64 {
                0.0
            }
            fn support_radius(&self) -> Option<f64> {
                Some(0.0)
            }
            fn mean_mass(&self) -> Option<f64> {
                Some(1.0)
            }
        }
        let germ = IntensityMeasureSpec::lebesgue(1, 1.0).unwrap();
        let w = Window::interval(0.0, 10.0).unwrap();
        let err = brix_kendall_sample(&germ, &Opaque, &w, &mut RngStream::new(1, 0)).unwrap_err();
        assert!(matches!(err, Error::RetentionUnavailable));
    }

    #[test]
    fn retained_mass_of_reference_config() {
        // Germs in [-1, 0) contribute 1 - exp(-2(1+x)); germs in [9, 10] contribute
        // 1 - exp(-2(10-x)); interior germs retain with 1 - exp(-2).
        let m = retained_mass_1d(1.0, &ac_kernel(), &Window::interval(0.0, 10.0).unwrap()).unwrap();
        let edge = 1.0 - (1.0 - (-2.0f64).exp()) / 2.0; // integral of 1 - e^{-2u} over [0,1]
        let expected = 2.0 * edge + 9.0 * (1.0 - (-2.0f64).exp());
        assert!((m - expected).abs() < 1e-9, "{m} vs {expected}");
    }
}
