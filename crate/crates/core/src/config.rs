//! Run configurations: one document selects a sampler, its parameters, a
//! seed and a replicate count.
//!
//! Replicate `k` always draws from `RngStream::new(seed, k)`, so any
//! replicate can be regenerated on its own. Oracle replicates use a seed
//! derived from `seed` and never share streams with the sampler.

use serde::{Deserialize, Serialize};

use crate::boolean::{boolean_exact_sample, BooleanSample, GrainDistribution};
use crate::branching::{approx_branching_sample, certificate_generations_for};
use crate::cluster::{brix_kendall_sample_with_support, ClusterKernel, CoxClusterKernel, Displacement};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Region, Window};
use crate::germ::{
    matern_thin_first, nonlinear_hawkes_germ, renewal_thin_first, thin_grid, thin_z2, GridThinningSpec,
    NonlinearHawkes, RenewalSpec, SequenceFamily,
};
use crate::hawkes::{FertilityKernel, KernelShape, MrOptions, MrSampler};
use crate::intensity::IntensityMeasureSpec;
use crate::pattern::PointPattern;
use crate::poisson::{sample_homogeneous, FnDensity};
use crate::rng::RngStream;
use crate::validation::oracles;

pub const SCHEMA_VERSION: u32 = 1;

/// XOR-ed into the seed for oracle replicates.
const ORACLE_SEED_SALT: u64 = 0x6F72_6163_6C65_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Replicates per side for the statistical tests; defaults to `replicates`.
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            replicates: None,
            alpha: default_alpha(),
        }
    }
}

/// One mixture component of a fertility kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelComponent {
    #[serde(default = "unit_weight")]
    pub weight: f64,
    pub shape: KernelShape,
}

fn unit_weight() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    MrOptions::default().dt
}

fn default_levels() -> usize {
    MrOptions::default().max_levels
}

fn default_n_max() -> usize {
    MrOptions::default().n_max
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Homogeneous Poisson process.
    Poisson { window: Window, rate: f64 },
    /// Cox cluster process with a homogeneous Poisson germ.
    BrixKendall {
        window: Window,
        germ_rate: f64,
        kernel: CoxClusterKernel,
        #[serde(default)]
        support: Option<Window>,
    },
    /// Boolean model; the pattern holds the germs of the hitting grains.
    Boolean {
        region: Region,
        germ_rate: f64,
        grains: GrainDistribution,
        #[serde(default)]
        support: Option<Window>,
    },
    /// Linear Hawkes process on `[0, a]` with constant immigrant rate.
    HawkesMr {
        a: f64,
        mu: f64,
        kernel: Vec<KernelComponent>,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_levels")]
        max_levels: usize,
        #[serde(default = "default_n_max")]
        n_max: usize,
    },
    /// Gamma(2, scale) renewal process thinned by `exp(-decay t)`.
    Renewal { scale: f64, decay: f64 },
    /// Matérn hard-core process kept with constant probability `retention`.
    Matern {
        window: Window,
        rate: f64,
        r: f64,
        #[serde(default = "unit_weight")]
        retention: f64,
    },
    /// Thinned grid on the nonnegative integers, or on Z^2 when `z2`.
    Grid {
        retention: SequenceFamily,
        #[serde(default)]
        dominating: Option<SequenceFamily>,
        #[serde(default)]
        z2: bool,
    },
    /// Non-linear Hawkes `min(mu + beta N(t - a, t), cap)`.
    NonlinearHawkes {
        window: Window,
        mu: f64,
        beta: f64,
        support: f64,
        cap: f64,
    },
    /// Generation-truncated branching process; `generations` or `epsilon`.
    Branching {
        window: Window,
        germ_rate: f64,
        kernel: CoxClusterKernel,
        #[serde(default)]
        generations: Option<u32>,
        #[serde(default)]
        epsilon: Option<f64>,
    },
}

impl SamplerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Poisson { .. } => "poisson",
            Self::BrixKendall { .. } => "brix-kendall",
            Self::Boolean { .. } => "boolean",
            Self::HawkesMr { .. } => "hawkes-mr",
            Self::Renewal { .. } => "renewal",
            Self::Matern { .. } => "matern",
            Self::Grid { .. } => "grid",
            Self::NonlinearHawkes { .. } => "nonlinear-hawkes",
            Self::Branching { .. } => "branching",
        }
    }
}

/// Result of one replicate.
#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub pattern: PointPattern,
    pub boolean: Option<BooleanSample>,
    pub certificate: Option<serde_json::Value>,
}

impl SampleOutput {
    fn plain(pattern: PointPattern) -> Self {
        Self {
            pattern,
            boolean: None,
            certificate: None,
        }
    }
}

fn checked_cox(k: &CoxClusterKernel) -> Result<CoxClusterKernel> {
    CoxClusterKernel::new(k.mean, k.displacement.clone(), k.includes_germ)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, "must be finite and positive"))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, "must be finite and nonnegative"))
    }
}

enum Built {
    Poisson { window: Window, rate: f64 },
    BrixKendall {
        germ: IntensityMeasureSpec,
        window: Window,
        kernel: CoxClusterKernel,
        support: Option<Window>,
    },
    Boolean {
        germ: IntensityMeasureSpec,
        region: Region,
        grains: GrainDistribution,
        support: Option<Window>,
    },
    HawkesMr(Box<MrSampler>),
    Renewal { spec: RenewalSpec, scale: f64, decay: f64 },
    Matern { window: Window, rate: f64, r: f64, retention: f64 },
    Grid { spec: GridThinningSpec, z2: bool },
    NonlinearHawkes { model: NonlinearHawkes, window: Window },
    Branching {
        window: Window,
        germ_rate: f64,
        kernel: CoxClusterKernel,
        generations: u32,
    },
}

/// A validated configuration, ready to draw replicates.
pub struct Prepared {
    pub config: RunConfig,
    built: Built,
}

impl RunConfig {
    /// Checks the schema version and every parameter, and builds the sampler.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.replicates == 0 {
            return Err(invalid("replicates", "must be at least 1"));
        }
        if !(self.validation.alpha > 0.0 && self.validation.alpha < 1.0) {
            return Err(invalid("validation.alpha", "must lie in (0, 1)"));
        }
        let built = match &self.sampler {
            SamplerConfig::Poisson { window, rate } => {
                nonnegative("rate", *rate)?;
                Built::Poisson {
                    window: window.clone(),
                    rate: *rate,
                }
            }
            SamplerConfig::BrixKendall {
                window,
                germ_rate,
                kernel,
                support,
            } => {
                let kernel = checked_cox(kernel)?;
                if kernel.dim() != window.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: window.dim(),
                        got: kernel.dim(),
                    });
                }
                Built::BrixKendall {
                    germ: IntensityMeasureSpec::lebesgue(window.dim(), *germ_rate)?,
                    window: window.clone(),
                    kernel,
                    support: support.clone(),
                }
            }
            SamplerConfig::Boolean {
                region,
                germ_rate,
                grains,
                support,
            } => {
                grains.validate()?;
                Built::Boolean {
                    germ: IntensityMeasureSpec::lebesgue(region.bounding_box().dim(), *germ_rate)?,
                    region: region.clone(),
                    grains: *grains,
                    support: support.clone(),
                }
            }
            SamplerConfig::HawkesMr {
                a,
                mu,
                kernel,
                dt,
                max_levels,
                n_max,
            } => {
                positive("mu", *mu)?;
                let k = FertilityKernel::mixture(kernel.iter().map(|c| (c.weight, c.shape.clone())).collect())?;
                let options = MrOptions {
                    dt: *dt,
                    t_max: None,
                    n_max: *n_max,
                    max_levels: *max_levels,
                };
                Built::HawkesMr(Box::new(MrSampler::new(
                    k,
                    IntensityMeasureSpec::lebesgue(1, *mu)?,
                    *a,
                    options,
                )?))
            }
            SamplerConfig::Renewal { scale, decay } => {
                positive("decay", *decay)?;
                Built::Renewal {
                    spec: RenewalSpec::gamma2(*scale)?,
                    scale: *scale,
                    decay: *decay,
                }
            }
            SamplerConfig::Matern {
                window,
                rate,
                r,
                retention,
            } => {
                nonnegative("rate", *rate)?;
                nonnegative("r", *r)?;
                if !(0.0..=1.0).contains(retention) {
                    return Err(invalid("retention", "must lie in [0, 1]"));
                }
                Built::Matern {
                    window: window.clone(),
                    rate: *rate,
                    r: *r,
                    retention: *retention,
                }
            }
            SamplerConfig::Grid {
                retention,
                dominating,
                z2,
            } => {
                let spec = match dominating {
                    Some(d) => GridThinningSpec::with_dominating(retention.clone(), d.clone())?,
                    None => GridThinningSpec::new(retention.clone())?,
                };
                Built::Grid { spec, z2: *z2 }
            }
            SamplerConfig::NonlinearHawkes {
                window,
                mu,
                beta,
                support,
                cap,
            } => {
                if window.dim() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: window.dim(),
                    });
                }
                nonnegative("mu", *mu)?;
                nonnegative("beta", *beta)?;
                Built::NonlinearHawkes {
                    model: NonlinearHawkes::clipped_linear(*mu, *beta, *support, *cap)?,
                    window: window.clone(),
                }
            }
            SamplerConfig::Branching {
                window,
                germ_rate,
                kernel,
                generations,
                epsilon,
            } => {
                let kernel = checked_cox(kernel)?;
                let mass = kernel.mean_mass().unwrap_or(f64::INFINITY);
                let generations = match (generations, epsilon) {
                    (Some(n), None) => *n,
                    (None, Some(eps)) => certificate_generations_for(*eps, *germ_rate, mass, window.volume())?,
                    _ => return Err(invalid("branching", "give exactly one of generations and epsilon")),
                };
                Built::Branching {
                    window: window.clone(),
                    germ_rate: *germ_rate,
                    kernel,
                    generations,
                }
            }
        };
        Ok(Prepared {
            config: self.clone(),
            built,
        })
    }
}

impl Prepared {
    pub fn name(&self) -> &'static str {
        self.config.sampler.name()
    }

    pub fn rng(&self, replicate: u64) -> RngStream {
        RngStream::new(self.config.seed, replicate)
    }

    /// Replicate `k` of the configured sampler.
    pub fn sample(&self, replicate: u64) -> Result<SampleOutput> {
        let mut rng = self.rng(replicate);
        let rng = &mut rng;
        Ok(match &self.built {
            Built::Poisson { window, rate } => SampleOutput::plain(sample_homogeneous(window, *rate, rng)?),
            Built::BrixKendall {
                germ,
                window,
                kernel,
                support,
            } => SampleOutput::plain(brix_kendall_sample_with_support(germ, support.as_ref(), kernel, window, rng)?),
            Built::Boolean {
                germ,
                region,
                grains,
                support,
            } => {
                let b = boolean_exact_sample(germ, support.as_ref(), grains, region, rng)?;
                let dim = region.bounding_box().dim();
                SampleOutput {
                    pattern: PointPattern::from_points(dim, &b.germs)?,
                    boolean: Some(b),
                    certificate: None,
                }
            }
            Built::HawkesMr(s) => SampleOutput::plain(s.sample(rng)?.pattern),
            Built::Renewal { spec, decay, .. } => {
                let c = *decay;
                let retain = FnDensity::with_tail(move |t: f64| (-c * t).exp(), move |t: f64| (-c * t).exp() / c, 40.0 / c);
                SampleOutput::plain(renewal_thin_first(spec, &retain, rng)?)
            }
            Built::Matern {
                window,
                rate,
                r,
                retention,
            } => {
                let p = *retention;
                let inside = |x: &[f64]| if window.contains(x) { p } else { 0.0 };
                SampleOutput::plain(matern_thin_first(*rate, *r, &inside, window, rng)?)
            }
            Built::Grid { spec, z2 } => {
                if *z2 {
                    let pts: Vec<Vec<f64>> = thin_z2(spec, rng)?
                        .into_iter()
                        .map(|(i, j)| vec![i as f64, j as f64])
                        .collect();
                    SampleOutput::plain(PointPattern::from_points(2, &pts)?)
                } else {
                    let ts: Vec<f64> = thin_grid(spec, rng)?.into_iter().map(|n| n as f64).collect();
                    SampleOutput::plain(PointPattern::from_times(&ts)?)
                }
            }
            Built::NonlinearHawkes { model, window } => SampleOutput::plain(nonlinear_hawkes_germ(model, window, rng)?),
            Built::Branching {
                window,
                germ_rate,
                kernel,
                generations,
            } => {
                let (p, cert) = approx_branching_sample(*germ_rate, kernel, window, *generations, rng)?;
                SampleOutput {
                    pattern: p,
                    boolean: None,
                    certificate: Some(serde_json::to_value(cert)?),
                }
            }
        })
    }

    /// Window on which counts are compared.
    pub fn count_window(&self) -> Window {
        match &self.built {
            Built::Poisson { window, .. }
            | Built::BrixKendall { window, .. }
            | Built::Matern { window, .. }
            | Built::NonlinearHawkes { window, .. }
            | Built::Branching { window, .. } => window.clone(),
            Built::Boolean { region, .. } => region.bounding_box(),
            Built::HawkesMr(_) => {
                let a = match &self.config.sampler {
                    SamplerConfig::HawkesMr { a, .. } => *a,
                    _ => unreachable!("built from the same config"),
                };
                Window::interval(0.0, a).expect("validated length")
            }
            Built::Renewal { decay, .. } => Window::interval(0.0, 40.0 / decay).expect("positive decay"),
            Built::Grid { z2, .. } => {
                let dim = if *z2 { 2 } else { 1 };
                Window::new(vec![-1e18; dim], vec![1e18; dim]).expect("finite box")
            }
        }
    }

    /// Mean count in [`count_window`](Self::count_window), when known in
    /// closed form.
    pub fn expected_count(&self) -> Option<f64> {
        match &self.built {
            Built::Poisson { window, rate } => Some(rate * window.volume()),
            Built::BrixKendall {
                window, kernel, support, ..
            } if support.is_none() => {
                let rate = match &self.config.sampler {
                    SamplerConfig::BrixKendall { germ_rate, .. } => *germ_rate,
                    _ => return None,
                };
                let per = kernel.mean + f64::from(kernel.includes_germ);
                Some(rate * per * window.volume())
            }
            Built::HawkesMr(s) => {
                let (a, mu) = match &self.config.sampler {
                    SamplerConfig::HawkesMr { a, mu, .. } => (*a, *mu),
                    _ => return None,
                };
                Some(mu * a / (1.0 - s.kernel().branching_ratio()))
            }
            Built::Matern {
                window,
                rate,
                r,
                retention,
            } => {
                let m = window.dim() as i32;
                let ball = std::f64::consts::PI.powf(m as f64 / 2.0) / statrs::function::gamma::gamma(m as f64 / 2.0 + 1.0)
                    * r.powi(m);
                let lv = rate * ball;
                let survive = if lv > 0.0 { -(-lv).exp_m1() / lv } else { 1.0 };
                Some(rate * survive * retention * window.volume())
            }
            Built::Branching {
                window,
                germ_rate,
                kernel,
                generations,
            } => {
                let m = kernel.mean;
                let gens = if m == 1.0 {
                    (*generations + 1) as f64
                } else {
                    (1.0 - m.powi(*generations as i32 + 1)) / (1.0 - m)
                };
                Some(germ_rate * window.volume() * gens)
            }
            _ => None,
        }
    }

    /// Replicate `k` of an independent reference sampler, when one exists.
    pub fn oracle(&self, replicate: u64) -> Option<Result<PointPattern>> {
        let mut rng = RngStream::new(self.config.seed ^ ORACLE_SEED_SALT, replicate);
        let rng = &mut rng;
        match &self.built {
            Built::BrixKendall {
                window,
                kernel,
                support: None,
                ..
            } if !kernel.includes_germ => {
                let Displacement::Uniform { lower, upper } = &kernel.displacement else {
                    return None;
                };
                let rate = match &self.config.sampler {
                    SamplerConfig::BrixKendall { germ_rate, .. } => *germ_rate,
                    _ => return None,
                };
                Some(oracles::buffered_cox_uniform(rate, kernel.mean, lower, upper, window, rng))
            }
            Built::HawkesMr(s) => {
                let [(_, KernelShape::Exponential { beta, gamma })] = s.kernel().components() else {
                    return None;
                };
                let (a, mu) = match &self.config.sampler {
                    SamplerConfig::HawkesMr { a, mu, .. } => (*a, *mu),
                    _ => return None,
                };
                // The dependence on the start decays like rho^(B / mean delay).
                let burn = 60.0 / (gamma - beta);
                Some(oracles::hawkes_exponential_burn_in(mu, *beta, *gamma, a, burn, rng))
            }
            Built::Renewal { scale, decay, .. } => {
                let c = *decay;
                Some(oracles::renewal_gamma2_thin_after(*scale, &|t| (-c * t).exp(), 40.0 / c, rng))
            }
            Built::Matern {
                window,
                rate,
                r,
                retention,
            } if *retention == 1.0 => Some(oracles::matern_direct(*rate, *r, window, rng)),
            Built::NonlinearHawkes { model, window } => {
                let (mu, beta, support, cap) = match &self.config.sampler {
                    SamplerConfig::NonlinearHawkes {
                        mu, beta, support, cap, ..
                    } => (*mu, *beta, *support, *cap),
                    _ => return None,
                };
                let burn = 50.0 * (support + model.expected_gap_distance());
                let phi = move |u: f64| (mu + u).min(cap);
                let h = move |t: f64| if (0.0..=support).contains(&t) { beta } else { 0.0 };
                Some(oracles::nonlinear_hawkes_burn_in(&phi, cap, &h, support, window, burn, rng))
            }
            _ => None,
        }
    }

    /// Fertility kernel of a Hawkes configuration.
    pub fn hawkes_sampler(&self) -> Option<&MrSampler> {
        match &self.built {
            Built::HawkesMr(s) => Some(s),
            _ => None,
        }
    }
}
