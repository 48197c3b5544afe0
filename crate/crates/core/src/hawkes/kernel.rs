//! Fertility kernels of linear Hawkes processes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::rng::RngStream;

/// Shape of the fertility rate `h(t, z)` for one mark value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelShape {
    /// `beta * exp(-gamma t)`.
    Exponential { beta: f64, gamma: f64 },
    /// `beta * (1 - t / support)^power` on `[0, support]`.
    Polynomial { beta: f64, support: f64, power: u32 },
    /// Piecewise constant: `values[i]` on `[i step, (i + 1) step)`.
    Table { step: f64, values: Vec<f64> },
}

impl KernelShape {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Exponential { beta, gamma } => *beta >= 0.0 && *gamma > 0.0 && beta.is_finite() && gamma.is_finite(),
            Self::Polynomial { beta, support, .. } => *beta >= 0.0 && beta.is_finite() && *support > 0.0 && support.is_finite(),
            Self::Table { step, values } => {
                *step > 0.0 && step.is_finite() && values.iter().all(|v| *v >= 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("kernel", format!("invalid kernel shape {self:?}")))
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { beta, gamma } => beta * (-gamma * t).exp(),
            Self::Polynomial { beta, support, power } => {
                if t > *support {
                    0.0
                } else {
                    beta * (1.0 - t / support).powi(*power as i32)
                }
            }
            Self::Table { step, values } => values.get((t / step) as usize).copied().unwrap_or(0.0),
        }
    }

    /// `nu(t) = integral of h over [0, t]`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { beta, gamma } => beta / gamma * -(-gamma * t).exp_m1(),
            Self::Polynomial { beta, support, power } => {
                let k1 = (*power + 1) as f64;
                let rest = (1.0 - t.min(*support) / support).powi(*power as i32 + 1);
                beta * support / k1 * (1.0 - rest)
            }
            Self::Table { step, values } => {
                let full = ((t / step) as usize).min(values.len());
                let head: f64 = values[..full].iter().sum::<f64>() * step;
                let part = values.get(full).map_or(0.0, |v| v * (t - full as f64 * step));
                head + part
            }
        }
    }

    /// Total mass `nu(inf)`.
    pub fn mass(&self) -> f64 {
        match self {
            Self::Exponential { beta, gamma } => beta / gamma,
            Self::Polynomial { beta, support, power } => beta * support / (*power + 1) as f64,
            Self::Table { step, values } => values.iter().sum::<f64>() * step,
        }
    }

    /// `integral of t h(t) dt`.
    pub fn first_moment(&self) -> f64 {
        match self {
            Self::Exponential { beta, gamma } => beta / (gamma * gamma),
            Self::Polynomial { beta, support, power } => {
                let k = *power as f64;
                beta * support * support / ((k + 1.0) * (k + 2.0))
            }
            Self::Table { step, values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| v * step * step * (i as f64 + 0.5))
                .sum(),
        }
    }

    /// Right end of the support, infinite for exponential shapes.
    pub fn support_end(&self) -> f64 {
        match self {
            Self::Exponential { .. } => f64::INFINITY,
            Self::Polynomial { support, .. } => *support,
            Self::Table { step, values } => step * values.len() as f64,
        }
    }

    /// `integral of exp(delta s) h(s) ds`, infinite when it diverges.
    fn exp_moment(&self, delta: f64) -> f64 {
        match self {
            Self::Exponential { beta, gamma } => {
                if delta >= *gamma {
                    f64::INFINITY
                } else {
                    beta / (gamma - delta)
                }
            }
            Self::Polynomial { support, .. } => {
                adaptive_simpson(|s| (delta * s).exp() * self.rate(s), 0.0, *support, 1e-13).value
            }
            Self::Table { step, values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let a = i as f64 * step;
                    if delta == 0.0 {
                        v * step
                    } else {
                        v * (delta * a).exp() * (delta * step).exp_m1() / delta
                    }
                })
                .sum(),
        }
    }

    /// One offspring delay from the normalised rate `h / nu(inf)`.
    pub fn sample_delay(&self, rng: &mut RngStream) -> f64 {
        let u: f64 = rng.random();
        match self {
            Self::Exponential { gamma, .. } => -(1.0 - u).ln() / gamma,
            Self::Polynomial { support, power, .. } => support * (1.0 - (1.0 - u).powf(1.0 / (*power + 1) as f64)),
            Self::Table { step, values } => {
                let total: f64 = values.iter().sum();
                let mut target = u * total;
                for (i, v) in values.iter().enumerate() {
                    if target < *v {
                        return step * (i as f64 + target / v);
                    }
                    target -= v;
                }
                step * values.len() as f64
            }
        }
    }
}

/// Fertility rate `h(t, Z)` with `Z` drawn from a finite mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FertilityKernel {
    components: Vec<(f64, KernelShape)>,
}

impl FertilityKernel {
    /// Mixture of shapes with the given weights (normalised here).
    pub fn mixture(components: Vec<(f64, KernelShape)>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("kernel", "mixture needs at least one component"));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if !(total > 0.0) || components.iter().any(|c| !(c.0 >= 0.0)) {
            return Err(invalid("kernel", "mixture weights must be nonnegative with positive sum"));
        }
        for (_, s) in &components {
            s.validate()?;
        }
        let k = Self {
            components: components.into_iter().map(|(w, s)| (w / total, s)).collect(),
        };
        let rho = k.branching_ratio();
        if rho >= 1.0 {
            return Err(Error::Supercritical(rho));
        }
        if !k.first_moment().is_finite() {
            return Err(invalid("kernel", "first moment must be finite"));
        }
        Ok(k)
    }

    pub fn single(shape: KernelShape) -> Result<Self> {
        Self::mixture(vec![(1.0, shape)])
    }

    /// `beta * exp(-gamma t)`, unmarked.
    pub fn exponential(beta: f64, gamma: f64) -> Result<Self> {
        Self::single(KernelShape::Exponential { beta, gamma })
    }

    pub fn components(&self) -> &[(f64, KernelShape)] {
        &self.components
    }

    /// `rho = E[integral of h(t, Z) dt]`.
    pub fn branching_ratio(&self) -> f64 {
        self.components.iter().map(|(w, s)| w * s.mass()).sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.components.iter().map(|(w, s)| w * s.first_moment()).sum()
    }

    /// `E[h(t, Z)]`.
    pub fn mean_rate(&self, t: f64) -> f64 {
        self.components.iter().map(|(w, s)| w * s.rate(t)).sum()
    }

    /// Index of a mark drawn from the mixture.
    pub fn sample_mark(&self, rng: &mut RngStream) -> usize {
        let mut u: f64 = rng.random();
        for (j, (w, _)) in self.components.iter().enumerate() {
            if u < *w {
                return j;
            }
            u -= w;
        }
        self.components.len() - 1
    }

    /// Decay rate `delta` of the dominating tail `exp(-delta t)` for grids
    /// of step `dt`: the largest `delta` with
    /// `exp(delta dt) E[integral of exp(delta s) h(s, Z) ds] <= 1 - 1e-6`.
    ///
    /// The factor `exp(delta dt)` absorbs the loss of evaluating
    /// `1 - exp(-delta t)` at the left end of each grid cell, so the
    /// sub-solution property survives discretisation.
    pub fn decay_rate(&self, dt: f64) -> f64 {
        const TARGET: f64 = 1.0 - 1e-6;
        let fits = |d: f64| -> bool {
            let m: f64 = self.components.iter().map(|(w, s)| w * s.exp_moment(d)).sum();
            m * (d * dt).exp() <= TARGET
        };
        if self.branching_ratio() == 0.0 {
            return 1.0;
        }
        let mut hi = self
            .components
            .iter()
            .filter_map(|(w, s)| match s {
                KernelShape::Exponential { gamma, .. } if *w > 0.0 => Some(*gamma),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min);
        if !hi.is_finite() {
            hi = 1.0;
            while fits(hi) {
                hi *= 2.0;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}
