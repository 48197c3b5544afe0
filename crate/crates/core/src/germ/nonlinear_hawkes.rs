//! Stationary non-linear Hawkes germ via regeneration points.
//!
//! With `0 <= phi <= Lambda` the process is a thinning of a rate-`Lambda`
//! Poisson stream. If a stream point has no stream point in the `a` time
//! units before it, where `[0, a]` carries the support of `h`, the intensity
//! there is `phi(0)` whatever happened earlier, so the process can be built
//! forward from that point with an empty history.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::pattern::PointPattern;
use crate::poisson::homogeneous_times;
use crate::rng::RngStream;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `lambda(t) = phi(sum_{s < t} h(t - s))` with `h` supported in `[0, a]`.
#[derive(Clone)]
pub struct NonlinearHawkes {
    phi: ScalarFn,
    bound: f64,
    h: ScalarFn,
    support: f64,
    /// How far left of the window the gap search may go.
    pub gap_horizon: f64,
}

impl fmt::Debug for NonlinearHawkes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearHawkes")
            .field("bound", &self.bound)
            .field("support", &self.support)
            .field("gap_horizon", &self.gap_horizon)
            .finish()
    }
}

impl NonlinearHawkes {
    pub fn new(phi: ScalarFn, bound: f64, h: ScalarFn, support: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(invalid("bound", "phi bound must be finite and positive"));
        }
        if !(support >= 0.0 && support.is_finite()) {
            return Err(invalid("support", "support of h must be a finite interval [0, a]"));
        }
        Ok(Self {
            phi,
            bound,
            h,
            support,
            gap_horizon: 1e6,
        })
    }

    /// `phi(u) = min(mu + u, Lambda)`, `h = beta` on `[0, a]`.
    pub fn clipped_linear(mu: f64, beta: f64, a: f64, cap: f64) -> Result<Self> {
        Self::new(
            Arc::new(move |u: f64| (mu + u).min(cap)),
            cap,
            Arc::new(move |t: f64| if (0.0..=a).contains(&t) { beta } else { 0.0 }),
            a,
        )
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// Mean distance to the first gap longer than `a` in the dominating stream.
    pub fn expected_gap_distance(&self) -> f64 {
        (self.bound * self.support).exp_m1() / self.bound
    }

    /// Intensity at `t` given the earlier points in `events` (sorted).
    pub fn conditional_intensity(&self, t: f64, events: &[f64]) -> Result<f64> {
        let from = events.partition_point(|&s| s < t - self.support);
        let to = events.partition_point(|&s| s < t);
        let u: f64 = events[from..to].iter().map(|&s| (self.h)(t - s)).sum();
        let v = (self.phi)(u);
        if !(v >= 0.0) || v > self.bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated {
                t,
                rate: v,
                bound: self.bound,
            });
        }
        Ok(v)
    }
}

/// Stationary sample of the process on the interval `w`.
pub fn nonlinear_hawkes_germ(model: &NonlinearHawkes, w: &Window, rng: &mut RngStream) -> Result<PointPattern> {
    if w.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: w.dim() });
    }
    let (s0, s1) = (w.lower()[0], w.upper()[0]);
    let lambda = model.bound;
    let gaps = Exp::new(lambda).expect("positive bound");
    // Walk left from the window until a stream point (or the window start)
    // has an empty stretch of length > a before it.
    let mut back: Vec<(f64, f64)> = Vec::new();
    let mut prev = s0;
    loop {
        let x = prev - gaps.sample(rng);
        if prev - x > model.support {
            break;
        }
        back.push((x, lambda * rng.random::<f64>()));
        prev = x;
        if s0 - prev > model.gap_horizon {
            return Err(Error::GapSearchExceeded {
                horizon: model.gap_horizon,
                expected: model.expected_gap_distance(),
            });
        }
    }
    let mut candidates: Vec<(f64, f64)> = back.into_iter().rev().collect();
    for t in homogeneous_times(s0, s1, lambda, rng) {
        candidates.push((t, lambda * rng.random::<f64>()));
    }
    let mut events: Vec<f64> = Vec::new();
    for (t, y) in candidates {
        if y < model.conditional_intensity(t, &events)? {
            events.push(t);
        }
    }
    let inside: Vec<f64> = events.into_iter().filter(|&t| t >= s0 && t <= s1).collect();
    PointPattern::from_times(&inside)
}
