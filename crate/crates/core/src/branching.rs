//! Generation-truncated branching cluster processes.
//!
//! Every germ point starts a family tree in which each individual has
//! offspring drawn from a progeny kernel of mean mass `|nu| < 1`. Keeping
//! generations `0..=n` only, and only germs within `n R` of the window when
//! offspring never move farther than `R`, gives a finite simulation whose
//! variation distance to the full process on `W` is at most
//! `gamma |nu|^n` with `gamma = lambda0 vol(W) / (1 - |nu|)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterKernel;
use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::pattern::PointPattern;
use crate::poisson::sample_homogeneous;
use crate::rng::RngStream;

/// Individuals generated per germ before giving up.
const FAMILY_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCertificate {
    pub n: u32,
    pub gamma: f64,
    /// `gamma |nu|^n`, a bound on the variation distance on the window.
    pub bound: f64,
}

impl TruncationCertificate {
    pub fn new(n: u32, lambda0: f64, mass: f64, vol: f64) -> Result<Self> {
        let gamma = certificate_gamma(lambda0, mass, vol)?;
        Ok(Self {
            n,
            gamma,
            bound: gamma * mass.powi(n as i32),
        })
    }
}

fn certificate_gamma(lambda0: f64, mass: f64, vol: f64) -> Result<f64> {
    if !(lambda0 >= 0.0 && lambda0.is_finite() && vol >= 0.0 && vol.is_finite() && mass >= 0.0) {
        return Err(invalid("certificate", "rates, masses and volumes must be finite and nonnegative"));
    }
    if mass >= 1.0 {
        return Err(Error::Supercritical(mass));
    }
    Ok(lambda0 * vol / (1.0 - mass))
}

/// Smallest `n` with `gamma |nu|^n <= eps`.
pub fn certificate_generations_for(eps: f64, lambda0: f64, mass: f64, vol: f64) -> Result<u32> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "target distance must be positive"));
    }
    let gamma = certificate_gamma(lambda0, mass, vol)?;
    if eps >= gamma || mass == 0.0 {
        return Ok(if eps >= gamma { 0 } else { 1 });
    }
    let mut n = ((eps.ln() - gamma.ln()) / mass.ln()).ceil().max(0.0) as u32;
    // Guard the ceiling against rounding on exact powers.
    while n > 0 && gamma * mass.powi(n as i32 - 1) <= eps {
        n -= 1;
    }
    while gamma * mass.powi(n as i32) > eps {
        n += 1;
    }
    Ok(n)
}

/// Generations `0..=n` of the family of one germ at `x`.
fn family(x: &[f64], progeny: &dyn ClusterKernel, n: u32, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    let mut all = vec![x.to_vec()];
    let mut current = vec![x.to_vec()];
    for _ in 0..n {
        let mut next = Vec::new();
        for parent in &current {
            let kids = progeny.sample(parent, rng)?;
            for (i, y) in kids.iter().enumerate() {
                if progeny.includes_germ() && i == 0 {
                    continue;
                }
                next.push(y.to_vec());
            }
        }
        if all.len() + next.len() > FAMILY_CAP {
            return Err(Error::PointCapExceeded(FAMILY_CAP));
        }
        if next.is_empty() {
            break;
        }
        all.extend(next.iter().cloned());
        current = next;
    }
    Ok(all)
}

/// Branching process with a homogeneous Poisson germ of rate `lambda0`,
/// truncated after generation `n` and restricted to `w`.
pub fn approx_branching_sample(
    lambda0: f64,
    progeny: &dyn ClusterKernel,
    w: &Window,
    n: u32,
    rng: &mut RngStream,
) -> Result<(PointPattern, TruncationCertificate)> {
    if progeny.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: progeny.dim(),
        });
    }
    let r = progeny.support_radius().ok_or(Error::UnboundedSupport)?;
    let mass = progeny
        .mean_mass()
        .ok_or_else(|| invalid("progeny", "progeny kernel needs a known mean mass"))?;
    let certificate = TruncationCertificate::new(n, lambda0, mass, w.volume())?;
    let germ = sample_homogeneous(&w.buffered(n as f64 * r), lambda0, rng)?;
    let families: Vec<Vec<Vec<f64>>> = (0..germ.len())
        .into_par_iter()
        .map(|i| family(germ.point(i), progeny, n, &mut rng.child(i as u64)))
        .collect::<Result<_>>()?;
    let mut out = PointPattern::empty(w.dim());
    for y in families.iter().flatten() {
        if w.contains(y) {
            out.push(y)?;
        }
    }
    Ok((out, certificate))
}
