//! Poisson sampling on boxes and on the half-line.
//!
//! Three primitives live here: homogeneous Poisson on a box, the dominated
//! (Ogata / strip) construction for intensities bounded by a constant, and
//! finite-mass Poisson processes on `[0, inf)` sampled through an inverse-CDF
//! table.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::pattern::PointPattern;
use crate::quadrature::adaptive_simpson;
use crate::rng::RngStream;

/// Draws a Poisson count with the given mean.
pub fn poisson_count(mean: f64, rng: &mut RngStream) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::RetentionDiverges);
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| invalid("mean", e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// Homogeneous Poisson process of intensity `rate` on `w`.
pub fn sample_homogeneous(w: &Window, rate: f64, rng: &mut RngStream) -> Result<PointPattern> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(invalid("rate", format!("{rate} is not a finite nonnegative rate")));
    }
    let n = poisson_count(rate * w.volume(), rng)?;
    let mut p = PointPattern::empty(w.dim());
    for _ in 0..n {
        p.push(&w.sample_uniform(rng))?;
    }
    Ok(p)
}

/// Intensity bounded by a constant, possibly depending on the accepted
/// history (evaluated causally).
pub struct DominatedIntensity<F> {
    bound: f64,
    rate_fn: F,
}

impl<F> DominatedIntensity<F>
where
    F: Fn(f64, &[f64]) -> f64,
{
    pub fn new(bound: f64, rate_fn: F) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(invalid("bound", "dominating bound must be finite and nonnegative"));
        }
        Ok(Self { bound, rate_fn })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Rate at `t` given the accepted history; errors if it exceeds the bound.
    pub fn rate(&self, t: f64, history: &[f64]) -> Result<f64> {
        let r = (self.rate_fn)(t, history);
        if !(r >= 0.0) || r > self.bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                t,
                rate: r,
                bound: self.bound,
            });
        }
        Ok(r)
    }
}

/// Output of the strip construction: the full dominating pattern with its
/// heights, and which of its points were accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSample {
    pub times: Vec<f64>,
    /// Heights in `[0, bound)`.
    pub heights: Vec<f64>,
    pub accepted: Vec<bool>,
}

impl StripSample {
    pub fn accepted_times(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.accepted)
            .filter_map(|(&t, &a)| a.then_some(t))
            .collect()
    }

    pub fn accepted_pattern(&self) -> PointPattern {
        PointPattern::from_times(&self.accepted_times()).expect("finite times")
    }

    pub fn dominating_pattern(&self) -> PointPattern {
        PointPattern::from_times(&self.times)
            .and_then(|p| p.with_marks(self.heights.clone()))
            .expect("finite times")
    }
}

/// Rate-`bound` homogeneous Poisson stream on `[start, end)`, in time order.
pub(crate) fn homogeneous_times(start: f64, end: f64, rate: f64, rng: &mut RngStream) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = start;
    loop {
        t += exp.sample(rng);
        if t >= end {
            return out;
        }
        out.push(t);
    }
}

/// Points of a unit Poisson process under `y = rate(t)` on `[0, horizon)`,
/// generated from a rate-`bound` stream with uniform heights.
pub fn sample_inhomogeneous_strip<F>(
    horizon: f64,
    dom: &DominatedIntensity<F>,
    rng: &mut RngStream,
) -> Result<StripSample>
where
    F: Fn(f64, &[f64]) -> f64,
{
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be finite and nonnegative"));
    }
    let mut out = StripSample {
        times: Vec::new(),
        heights: Vec::new(),
        accepted: Vec::new(),
    };
    let mut history = Vec::new();
    for t in homogeneous_times(0.0, horizon, dom.bound, rng) {
        let height = dom.bound * rng.random::<f64>();
        let rate = dom.rate(t, &history)?;
        let keep = height < rate;
        if keep {
            history.push(t);
        }
        out.times.push(t);
        out.heights.push(height);
        out.accepted.push(keep);
    }
    Ok(out)
}

/// A finite-mass intensity on `[0, inf)`.
pub trait HalfLineDensity {
    fn density(&self, t: f64) -> f64;

    /// Closed-form `R(t) = integral of the density over [t, inf)`, when known.
    fn tail_mass(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Point beyond which the remaining mass is certified below `1e-12`
    /// (or the end of the support).
    fn truncation(&self) -> f64;
}

/// [`HalfLineDensity`] from closures.
pub struct FnDensity<D, T> {
    pub density: D,
    pub tail: Option<T>,
    pub truncation: f64,
}

impl<D: Fn(f64) -> f64> FnDensity<D, fn(f64) -> f64> {
    pub fn new(density: D, truncation: f64) -> Self {
        Self {
            density,
            tail: None,
            truncation,
        }
    }
}

impl<D: Fn(f64) -> f64, T: Fn(f64) -> f64> FnDensity<D, T> {
    pub fn with_tail(density: D, tail: T, truncation: f64) -> Self {
        Self {
            density,
            tail: Some(tail),
            truncation,
        }
    }
}

impl<D: Fn(f64) -> f64, T: Fn(f64) -> f64> HalfLineDensity for FnDensity<D, T> {
    fn density(&self, t: f64) -> f64 {
        (self.density)(t)
    }

    fn tail_mass(&self, t: f64) -> Option<f64> {
        self.tail.as_ref().map(|f| f(t))
    }

    fn truncation(&self) -> f64 {
        self.truncation
    }
}

/// Default table resolution as a fraction of the truncated support.
pub const DEFAULT_GRID_FRACTION: f64 = 1e-3;

/// Monotone piecewise-linear CDF table of a finite density on `[0, T]`.
///
/// Cell masses are exact when the density has a closed-form tail and come
/// from adaptive quadrature otherwise. Within a cell the density is treated
/// as constant, so the CDF error inside a cell of width `h` is at most
/// `h^2 * sup|r'| / 8`.
#[derive(Debug, Clone)]
pub struct CdfTable {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CdfTable {
    pub fn build(density: &dyn HalfLineDensity, grid_fraction: f64) -> Result<Self> {
        let end = density.truncation();
        if !(end.is_finite() && end >= 0.0) {
            return Err(Error::RetentionDiverges);
        }
        if let Some(total) = density.tail_mass(0.0) {
            if !total.is_finite() {
                return Err(Error::RetentionDiverges);
            }
        }
        if !(grid_fraction > 0.0 && grid_fraction <= 1.0) {
            return Err(invalid("grid_fraction", "must lie in (0, 1]"));
        }
        let cells = if end == 0.0 { 1 } else { (1.0 / grid_fraction).ceil() as usize };
        let h = end / cells as f64;
        let edges: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in edges.windows(2) {
            let mass = match (density.tail_mass(w[0]), density.tail_mass(w[1])) {
                (Some(a), Some(b)) => (a - b).max(0.0),
                _ => adaptive_simpson(|t| density.density(t), w[0], w[1], 1e-14).value.max(0.0),
            };
            if !mass.is_finite() {
                return Err(Error::RetentionDiverges);
            }
            acc += mass;
            cumulative.push(acc);
        }
        Ok(Self { edges, cumulative })
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().expect("nonempty table")
    }

    /// Draws one point from the normalised density.
    pub fn sample_point(&self, rng: &mut RngStream) -> f64 {
        let target = rng.random::<f64>() * self.total_mass();
        // First cell whose right cumulative exceeds the target.
        let i = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.edges.len() - 1);
        let (c0, c1) = (self.cumulative[i - 1], self.cumulative[i]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { rng.random::<f64>() };
        self.edges[i - 1] + frac.clamp(0.0, 1.0) * (self.edges[i] - self.edges[i - 1])
    }

    /// Poisson process with this intensity, points in increasing order.
    pub fn sample_poisson(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let n = poisson_count(self.total_mass(), rng)?;
        let mut pts: Vec<f64> = (0..n).map(|_| self.sample_point(rng)).collect();
        pts.sort_by(f64::total_cmp);
        Ok(pts)
    }
}

/// Poisson process on `[0, inf)` with a finite-mass intensity.
pub fn sample_poisson_finite_density(density: &dyn HalfLineDensity, rng: &mut RngStream) -> Result<PointPattern> {
    let table = CdfTable::build(density, DEFAULT_GRID_FRACTION)?;
    PointPattern::from_times(&table.sample_poisson(rng)?)
}
