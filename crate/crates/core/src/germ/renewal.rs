//! Renewal germs thinned before they are built.
//!
//! A renewal process with failure rate `r <= M` is the set of points of a
//! rate-`M` Poisson stream whose uniform height lies under `r(t - theta_t)`,
//! `theta_t` being the last renewal before `t`. Marking the stream points
//! independently with retention flags splits it into two independent
//! Poisson processes, of rates `M p` and `M (1 - p)`. The flagged one is
//! finite, so the renewal process only needs building up to its last point.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::pattern::PointPattern;
use crate::poisson::{homogeneous_times, CdfTable, HalfLineDensity, DEFAULT_GRID_FRACTION};
use crate::rng::RngStream;

pub type HazardFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Renewal process given by its failure rate as a function of age.
#[derive(Clone)]
pub struct RenewalSpec {
    hazard: HazardFn,
    /// Failure rate of the first interval, for a delayed process.
    delay_hazard: Option<HazardFn>,
    bound: f64,
}

impl fmt::Debug for RenewalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RenewalSpec")
            .field("bound", &self.bound)
            .field("delayed", &self.delay_hazard.is_some())
            .finish()
    }
}

impl RenewalSpec {
    pub fn new(hazard: HazardFn, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(invalid("bound", "failure-rate bound must be finite and positive"));
        }
        Ok(Self {
            hazard,
            delay_hazard: None,
            bound,
        })
    }

    /// Exponential interarrivals: a Poisson process of rate `rate`.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(Arc::new(move |_| rate), rate)
    }

    /// Gamma(2, scale) interarrivals, failure rate `a / (scale (scale + a))`.
    pub fn gamma2(scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(invalid("scale", "must be positive"));
        }
        Self::new(Arc::new(move |a: f64| a / (scale * (scale + a))), 1.0 / scale)
    }

    /// Uses `hazard` for the first interval only.
    pub fn delayed(mut self, hazard: HazardFn) -> Self {
        self.delay_hazard = Some(hazard);
        self
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn rate(&self, age: f64, first: bool) -> Result<f64> {
        let h = match (&self.delay_hazard, first) {
            (Some(d), true) => d(age),
            _ => (self.hazard)(age),
        };
        if !(h >= 0.0) || h > self.bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                t: age,
                rate: h,
                bound: self.bound,
            });
        }
        Ok(h)
    }

    /// Renewal points among stream `times` with heights in `[0, M)`.
    ///
    /// Returns the indices of the stream points that are renewals.
    pub fn renewals_under_strip(&self, times: &[f64], heights: &[f64]) -> Result<Vec<usize>> {
        let mut theta = 0.0;
        let mut first = true;
        let mut out = Vec::new();
        for (i, (&t, &y)) in times.iter().zip(heights).enumerate() {
            if y < self.rate(t - theta, first)? {
                out.push(i);
                theta = t;
                first = false;
            }
        }
        Ok(out)
    }
}

struct Scaled<'a> {
    inner: &'a dyn HalfLineDensity,
    factor: f64,
}

impl HalfLineDensity for Scaled<'_> {
    fn density(&self, t: f64) -> f64 {
        self.factor * self.inner.density(t)
    }

    fn tail_mass(&self, t: f64) -> Option<f64> {
        self.inner.tail_mass(t).map(|m| self.factor * m)
    }

    fn truncation(&self) -> f64 {
        self.inner.truncation()
    }
}

fn retention_at(retain: &dyn HalfLineDensity, t: f64) -> Result<f64> {
    let p = retain.density(t);
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("retain", format!("p({t}) = {p} is not a probability")));
    }
    Ok(p)
}

/// The retained renewal points for retention `p(t)` (with finite integral).
///
/// Steps: the flagged stream of rate `M p(t)`; the unflagged stream of rate
/// `M (1 - p(t))` up to the last flagged point; merge; uniform heights and
/// the renewal rule; keep flagged renewals.
pub fn renewal_thin_first(spec: &RenewalSpec, retain: &dyn HalfLineDensity, rng: &mut RngStream) -> Result<PointPattern> {
    let m = spec.bound;
    let table = CdfTable::build(
        &Scaled {
            inner: retain,
            factor: m,
        },
        DEFAULT_GRID_FRACTION,
    )?;
    let flagged = table.sample_poisson(rng)?;
    let Some(&last) = flagged.last() else {
        return Ok(PointPattern::empty(1));
    };
    let mut unflagged = Vec::new();
    for t in homogeneous_times(0.0, last, m, rng) {
        if rng.random::<f64>() >= retention_at(retain, t)? {
            unflagged.push(t);
        }
    }
    let mut stream: Vec<(f64, bool)> = flagged
        .iter()
        .map(|&t| (t, true))
        .chain(unflagged.into_iter().map(|t| (t, false)))
        .collect();
    stream.sort_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = stream.iter().map(|s| s.0).collect();
    let heights: Vec<f64> = (0..times.len()).map(|_| m * rng.random::<f64>()).collect();
    let kept: Vec<f64> = spec
        .renewals_under_strip(&times, &heights)?
        .into_iter()
        .filter(|&i| stream[i].1)
        .map(|i| times[i])
        .collect();
    PointPattern::from_times(&kept)
}
