//! Perfect sampling of a linear Hawkes process on `[0, a]`.
//!
//! Immigrants before the window matter only through clusters that reach it.
//! On the reversed axis an immigrant at distance `t` before 0 is kept with
//! probability `P(L > t)`, so the kept ancestors form a Poisson process of
//! intensity `mu(-t) P(L > t)`. It is sampled by drawing a dominating
//! process of intensity `mu_bar exp(-delta t)` with uniform heights and
//! classifying each point against the sandwich bounds, refining the grid
//! until no point lies between them. Kept ancestors receive clusters
//! conditioned to reach `[0, inf)`; immigrants inside the window receive
//! unconditioned clusters.

use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use super::gw::{sample_gw_cluster, GwCluster};
use super::kernel::FertilityKernel;
use super::sandwich::{default_g, BoundPair, Grid};
use crate::cluster::{conditioned_by_rejection, ATTEMPT_CAP};
use crate::error::{invalid, Error, Result};
use crate::intensity::IntensityMeasureSpec;
use crate::pattern::PointPattern;
use crate::poisson::{homogeneous_times, poisson_count};
use crate::rng::RngStream;

/// Offset of the child streams used by in-window immigrants.
const IMMIGRANT_STREAMS: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrOptions {
    /// Grid step of the coarsest level; each further level halves it.
    pub dt: f64,
    /// Initial grid length; grids are extended on demand.
    pub t_max: Option<f64>,
    /// Iteration cap per level.
    pub n_max: usize,
    pub max_levels: usize,
}

impl Default for MrOptions {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_max: None,
            n_max: 1000,
            max_levels: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MrSample {
    pub pattern: PointPattern,
    /// Number of dominating pre-window points drawn.
    pub dominated: usize,
    /// Distances before 0 of the kept ancestors.
    pub retained_ancestors: Vec<f64>,
    /// Number of refinement levels needed (1 = coarsest grid sufficed).
    pub levels_used: usize,
    /// Total clusters drawn while conditioning kept ancestors.
    pub cluster_attempts: u64,
}

/// Reusable sampler; sandwich levels are built once and shared by all draws.
#[derive(Debug)]
pub struct MrSampler {
    kernel: FertilityKernel,
    immigrant: IntensityMeasureSpec,
    a: f64,
    mu_bar: f64,
    delta: f64,
    options: MrOptions,
    levels: Mutex<Vec<Option<Arc<BoundPair>>>>,
}

impl MrSampler {
    pub fn new(kernel: FertilityKernel, immigrant: IntensityMeasureSpec, a: f64, options: MrOptions) -> Result<Self> {
        if immigrant.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: immigrant.dim(),
            });
        }
        let mu_bar = immigrant
            .bound()
            .ok_or_else(|| invalid("immigrant", "immigrant intensity needs a declared bound"))?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("a", "window length must be finite and positive"));
        }
        if !(options.dt > 0.0) || options.max_levels == 0 {
            return Err(invalid("options", "need dt > 0 and at least one level"));
        }
        let delta = kernel.decay_rate(options.dt);
        Ok(Self {
            kernel,
            immigrant,
            a,
            mu_bar,
            delta,
            options,
            levels: Mutex::new(vec![None; options.max_levels]),
        })
    }

    pub fn kernel(&self) -> &FertilityKernel {
        &self.kernel
    }

    /// Decay of the dominating ancestor intensity `mu_bar exp(-delta t)`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn initial_t_max(&self) -> f64 {
        self.options.t_max.unwrap_or_else(|| {
            let mass = (self.mu_bar / self.delta).max(1.0);
            (mass / 1e-6).ln() / self.delta
        })
    }

    /// Sandwich at refinement `level`, covering at least `[0, need]`.
    pub fn level(&self, level: usize, need: f64) -> Result<Arc<BoundPair>> {
        let mut levels = self.levels.lock().expect("sandwich cache poisoned");
        if let Some(p) = &levels[level] {
            if p.grid.t_max >= need {
                return Ok(p.clone());
            }
        }
        let dt = self.options.dt / (1u64 << level) as f64;
        let old = levels[level].as_ref().map_or(0.0, |p| p.grid.t_max);
        let t_max = self.initial_t_max().max(1.5 * need).max(2.0 * old);
        let grid = Grid::new(dt, t_max)?;
        let g = default_g(&self.kernel, dt);
        let mut pair = BoundPair::start(&self.kernel, &g, grid, self.kernel.decay_rate(dt))?;
        pair.converge(&self.kernel, self.options.n_max)?;
        let pair = Arc::new(pair);
        levels[level] = Some(pair.clone());
        Ok(pair)
    }

    /// Kept-ancestor distances and the number of levels used.
    fn classify(&self, points: &[(f64, f64)]) -> Result<(Vec<f64>, usize)> {
        let mut kept = Vec::new();
        let mut open: Vec<(f64, f64, f64)> = Vec::with_capacity(points.len());
        for &(t, y) in points {
            open.push((t, y, self.immigrant.density_at(&[-t])?));
        }
        let mut used = 0;
        for level in 0..self.options.max_levels {
            if open.is_empty() {
                break;
            }
            used = level + 1;
            let need = open.iter().map(|p| p.0).fold(0.0, f64::max);
            let pair = self.level(level, need)?;
            open.retain(|&(t, y, mu)| {
                let (lo, hi) = pair.survival_bounds(t);
                if y < mu * lo {
                    kept.push(t);
                    false
                } else {
                    y < mu * hi
                }
            });
        }
        if !open.is_empty() {
            return Err(Error::Unclassified {
                points: open.iter().map(|p| -p.0).collect(),
            });
        }
        kept.sort_by(f64::total_cmp);
        Ok((kept, used))
    }

    fn immigrants_in_window(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let times = homogeneous_times(0.0, self.a, self.mu_bar, rng);
        if let IntensityMeasureSpec::Lebesgue { .. } = self.immigrant {
            return Ok(times);
        }
        let mut out = Vec::with_capacity(times.len());
        for t in times {
            let u: f64 = rng.random();
            if u * self.mu_bar < self.immigrant.density_at(&[t])? {
                out.push(t);
            }
        }
        Ok(out)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<MrSample> {
        let n = poisson_count(self.mu_bar / self.delta, rng)? as usize;
        let exp = Exp::new(self.delta).map_err(|e| invalid("delta", e.to_string()))?;
        let dominated: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let t = exp.sample(rng);
                let v: f64 = rng.random();
                (t, v * self.mu_bar * (-self.delta * t).exp())
            })
            .collect();
        let (kept, levels_used) = self.classify(&dominated)?;
        let immigrants = self.immigrants_in_window(rng)?;

        let conditioned: Vec<(GwCluster, u64)> = kept
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut r = rng.child(i as u64);
                let (_, upper) = self.level(0, t)?.survival_bounds(t);
                conditioned_by_rejection(&[-t], Some(upper), ATTEMPT_CAP, &mut r, |r| {
                    let c = sample_gw_cluster(&self.kernel, -t, r)?;
                    let hit = c.points.iter().any(|&s| s >= 0.0);
                    Ok((c, hit))
                })
            })
            .collect::<Result<_>>()?;
        let free: Vec<GwCluster> = immigrants
            .par_iter()
            .enumerate()
            .map(|(j, &t)| sample_gw_cluster(&self.kernel, t, &mut rng.child(IMMIGRANT_STREAMS + j as u64)))
            .collect::<Result<_>>()?;

        let mut times: Vec<f64> = conditioned
            .iter()
            .map(|(c, _)| c)
            .chain(free.iter())
            .flat_map(|c| c.points.iter().copied())
            .filter(|&s| (0.0..=self.a).contains(&s))
            .collect();
        times.sort_by(f64::total_cmp);
        Ok(MrSample {
            pattern: PointPattern::from_times(&times)?,
            dominated: n,
            retained_ancestors: kept,
            levels_used,
            cluster_attempts: conditioned.iter().map(|c| c.1).sum(),
        })
    }
}

/// One perfect sample on `[0, a]`; build an [`MrSampler`] to reuse the
/// sandwich across replicates.
pub fn mr_perfect_sample(
    immigrant: IntensityMeasureSpec,
    kernel: FertilityKernel,
    a: f64,
    options: MrOptions,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    Ok(MrSampler::new(kernel, immigrant, a, options)?.sample(rng)?.pattern)
}
