//! Python bindings for the perfect-cluster samplers.
//!
//! Patterns come back as lists of coordinate lists; every sampling call takes
//! an explicit `(seed, stream)` pair, so results match the Rust API draw for
//! draw.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use perfect_cluster::boolean::{boolean_exact_sample, GrainDistribution, RadiusLaw};
use perfect_cluster::branching::{approx_branching_sample, certificate_generations_for as cert_gens};
use perfect_cluster::cluster::{brix_kendall_sample, CoxClusterKernel as CoreCox};
use perfect_cluster::config::RunConfig;
use perfect_cluster::hawkes::{
    build_sandwich, default_g, FertilityKernel as CoreKernel, Grid, KernelShape, MrOptions,
    MrSampler as CoreMr,
};
use perfect_cluster::{Error, IntensityMeasureSpec, PointPattern as CorePattern, Region, RngStream, Window as CoreWindow};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. }
        | Error::InvalidWindow(_)
        | Error::DimensionMismatch { .. }
        | Error::Supercritical(_)
        | Error::Incompatible(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Axis-aligned box.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Window {
    inner: CoreWindow,
}

#[pymethods]
impl Window {
    #[new]
    fn new(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreWindow::new(lower, upper).map_err(err)?,
        })
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.upper().to_vec()
    }

    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn __repr__(&self) -> String {
        format!("Window({:?}, {:?})", self.inner.lower(), self.inner.upper())
    }
}

/// Finite point pattern.
#[pyclass(frozen)]
struct PointPattern {
    inner: CorePattern,
}

#[pymethods]
impl PointPattern {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.to_points()
    }

    fn count_in(&self, w: &Window) -> usize {
        self.inner.count_in(&w.inner)
    }

    fn __repr__(&self) -> String {
        format!("PointPattern(dim={}, n={})", self.inner.dim(), self.inner.len())
    }
}

fn wrap(p: CorePattern) -> PointPattern {
    PointPattern { inner: p }
}

/// Cox cluster kernel: Poisson(`mean`) offspring, displaced uniformly on
/// `[lower, upper]` or by an isotropic Gaussian.
#[pyclass(frozen)]
struct CoxClusterKernel {
    inner: CoreCox,
}

#[pymethods]
impl CoxClusterKernel {
    #[staticmethod]
    fn uniform(mean: f64, lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreCox::uniform(mean, lower, upper).map_err(err)?,
        })
    }

    #[staticmethod]
    fn gaussian(mean: f64, dim: usize, sigma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreCox::gaussian(mean, dim, sigma).map_err(err)?,
        })
    }
}

/// Fertility kernel of a linear Hawkes process.
#[pyclass(frozen)]
struct FertilityKernel {
    inner: CoreKernel,
}

#[pymethods]
impl FertilityKernel {
    /// `beta * exp(-gamma t)`.
    #[staticmethod]
    fn exponential(beta: f64, gamma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreKernel::exponential(beta, gamma).map_err(err)?,
        })
    }

    /// `beta * (1 - t / support)^power` on `[0, support]`.
    #[staticmethod]
    fn polynomial(beta: f64, support: f64, power: u32) -> PyResult<Self> {
        Ok(Self {
            inner: CoreKernel::single(KernelShape::Polynomial { beta, support, power }).map_err(err)?,
        })
    }

    #[getter]
    fn branching_ratio(&self) -> f64 {
        self.inner.branching_ratio()
    }
}

/// Sandwich bounds on the cluster survival `P(L > t)` at the grid nodes.
#[pyclass(frozen)]
struct BoundPair {
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    lower: Vec<f64>,
    #[pyo3(get)]
    upper: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
}

/// Perfect sampler of a linear Hawkes process on `[0, a]`.
#[pyclass(frozen)]
struct MrSampler {
    inner: CoreMr,
}

#[pymethods]
impl MrSampler {
    #[new]
    #[pyo3(signature = (kernel, mu, a, dt = 0.05))]
    fn new(kernel: &FertilityKernel, mu: f64, a: f64, dt: f64) -> PyResult<Self> {
        let options = MrOptions {
            dt,
            ..MrOptions::default()
        };
        let immigrant = IntensityMeasureSpec::lebesgue(1, mu).map_err(err)?;
        Ok(Self {
            inner: CoreMr::new(kernel.inner.clone(), immigrant, a, options).map_err(err)?,
        })
    }

    #[pyo3(signature = (seed, stream = 0))]
    fn sample(&self, py: Python<'_>, seed: u64, stream: u64) -> PyResult<PointPattern> {
        let out = py.detach(|| self.inner.sample(&mut RngStream::new(seed, stream)));
        Ok(wrap(out.map_err(err)?.pattern))
    }
}

/// Cox cluster process with a homogeneous germ, restricted to `window`.
#[pyfunction]
#[pyo3(signature = (germ_rate, kernel, window, seed, stream = 0))]
fn brix_kendall(germ_rate: f64, kernel: &CoxClusterKernel, window: &Window, seed: u64, stream: u64) -> PyResult<PointPattern> {
    let germ = IntensityMeasureSpec::lebesgue(window.inner.dim(), germ_rate).map_err(err)?;
    let p = brix_kendall_sample(&germ, &kernel.inner, &window.inner, &mut RngStream::new(seed, stream)).map_err(err)?;
    Ok(wrap(p))
}

/// Boolean model of disks with fixed `radius`; returns the germs of the
/// disks that hit `window` and the covered fraction of `probes`.
#[pyfunction]
#[pyo3(signature = (germ_rate, radius, window, probes, seed, stream = 0))]
fn boolean_disks(
    germ_rate: f64,
    radius: f64,
    window: &Window,
    probes: Vec<Vec<f64>>,
    seed: u64,
    stream: u64,
) -> PyResult<(PointPattern, f64)> {
    let germ = IntensityMeasureSpec::lebesgue(window.inner.dim(), germ_rate).map_err(err)?;
    let grains = GrainDistribution::Disk {
        radius: RadiusLaw::Fixed { radius },
    };
    let region = Region::Box(window.inner.clone());
    let b = boolean_exact_sample(&germ, None, &grains, &region, &mut RngStream::new(seed, stream)).map_err(err)?;
    let cover = b.coverage_fraction(&probes);
    let germs = CorePattern::from_points(window.inner.dim(), &b.germs).map_err(err)?;
    Ok((wrap(germs), cover))
}

/// Iterates the sandwich on `[0, t_max]` until its gap is below `tol`.
#[pyfunction]
#[pyo3(signature = (kernel, dt, t_max, n_max = 1000, tol = 1e-6))]
fn sandwich(kernel: &FertilityKernel, dt: f64, t_max: f64, n_max: usize, tol: f64) -> PyResult<BoundPair> {
    let grid = Grid::new(dt, t_max).map_err(err)?;
    let g = default_g(&kernel.inner, dt);
    let pair = build_sandwich(&kernel.inner, &g, n_max, tol, grid).map_err(err)?;
    Ok(BoundPair {
        t: (0..pair.grid.nodes()).map(|i| pair.grid.node(i)).collect(),
        lower: pair.tail_lower(),
        upper: pair.tail_upper(),
        iterations: pair.iterations,
    })
}

/// Generation-truncated branching process and its variation-distance bound.
#[pyfunction]
#[pyo3(signature = (germ_rate, progeny, window, generations, seed, stream = 0))]
fn approx_branching(
    germ_rate: f64,
    progeny: &CoxClusterKernel,
    window: &Window,
    generations: u32,
    seed: u64,
    stream: u64,
) -> PyResult<(PointPattern, f64)> {
    let (p, cert) = approx_branching_sample(
        germ_rate,
        &progeny.inner,
        &window.inner,
        generations,
        &mut RngStream::new(seed, stream),
    )
    .map_err(err)?;
    Ok((wrap(p), cert.bound))
}

/// Smallest generation count whose certificate is at most `eps`.
#[pyfunction]
fn certificate_generations_for(eps: f64, germ_rate: f64, mass: f64, volume: f64) -> PyResult<u32> {
    cert_gens(eps, germ_rate, mass, volume).map_err(err)
}

/// Replicate `replicate` of a run configuration given as JSON.
#[pyfunction]
fn sample_config_json(config: &str, replicate: u64) -> PyResult<PointPattern> {
    let cfg: RunConfig = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let prepared = cfg.prepare().map_err(err)?;
    Ok(wrap(prepared.sample(replicate).map_err(err)?.pattern))
}

#[pymodule]
mod perfect_cluster_py {
    #[pymodule_export]
    use super::{
        approx_branching, boolean_disks, brix_kendall, certificate_generations_for, sample_config_json, sandwich,
        BoundPair, CoxClusterKernel, FertilityKernel, MrSampler, PointPattern, Window,
    };
}
