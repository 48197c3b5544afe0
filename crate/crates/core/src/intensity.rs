//! Germ intensity measures and the closed-form intensity calculus.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::quadrature::integrate_box;

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Intensity measure of a Poisson germ process.
#[derive(Clone)]
pub enum IntensityMeasureSpec {
    /// `rate` times Lebesgue measure on R^dim.
    Lebesgue { dim: usize, rate: f64 },
    /// Density `t -> density(t)` with a declared bound on its support.
    Density {
        dim: usize,
        density: DensityFn,
        bound: f64,
    },
    /// Finite list of atoms `(location, mass)`.
    Atomic { dim: usize, atoms: Vec<(Vec<f64>, f64)> },
}

impl fmt::Debug for IntensityMeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lebesgue { dim, rate } => write!(f, "Lebesgue {{ dim: {dim}, rate: {rate} }}"),
            Self::Density { dim, bound, .. } => write!(f, "Density {{ dim: {dim}, bound: {bound} }}"),
            Self::Atomic { dim, atoms } => write!(f, "Atomic {{ dim: {dim}, atoms: {} }}", atoms.len()),
        }
    }
}

impl IntensityMeasureSpec {
    pub fn lebesgue(dim: usize, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("{rate} is not a finite nonnegative rate")));
        }
        Ok(Self::Lebesgue { dim, rate })
    }

    pub fn density(dim: usize, density: DensityFn, bound: f64) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(invalid("bound", "density bound must be finite and nonnegative"));
        }
        Ok(Self::Density { dim, density, bound })
    }

    pub fn atomic(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        for (x, m) in &atoms {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            if !(*m >= 0.0 && m.is_finite()) {
                return Err(invalid("atoms", "atom masses must be finite and nonnegative"));
            }
        }
        Ok(Self::Atomic { dim, atoms })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lebesgue { dim, .. } | Self::Density { dim, .. } | Self::Atomic { dim, .. } => *dim,
        }
    }

    /// Upper bound of the density, `None` for atomic measures.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Self::Lebesgue { rate, .. } => Some(*rate),
            Self::Density { bound, .. } => Some(*bound),
            Self::Atomic { .. } => None,
        }
    }

    /// Density at `x`, checked against the declared bound.
    pub fn density_at(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Lebesgue { rate, .. } => Ok(*rate),
            Self::Density { density, bound, .. } => {
                let v = density(x);
                if !(v >= 0.0) || v > bound * (1.0 + 1e-12) {
                    return Err(Error::BoundViolated {
                        t: x[0],
                        rate: v,
                        bound: *bound,
                    });
                }
                Ok(v)
            }
            Self::Atomic { .. } => Err(Error::Incompatible("atomic measure has no density".into())),
        }
    }

    /// Mass assigned to the closed box `c`.
    pub fn total_on(&self, c: &Window) -> Result<f64> {
        if c.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: c.dim(),
            });
        }
        match self {
            Self::Lebesgue { rate, .. } => Ok(rate * c.volume()),
            Self::Density { density, .. } => {
                Ok(integrate_box(|x| density(x), c.lower(), c.upper(), 1e-10).value)
            }
            Self::Atomic { atoms, .. } => Ok(atoms
                .iter()
                .filter(|(x, _)| c.contains(x))
                .map(|(_, m)| m)
                .sum()),
        }
    }
}

/// Product of the window side lengths.
pub fn window_volume(w: &Window) -> f64 {
    w.volume()
}

/// Intensity of a stationary cluster process: germ rate times mean cluster mass.
pub fn cluster_intensity(germ_rate: f64, cluster_mean_mass: f64) -> Result<f64> {
    if !(germ_rate >= 0.0) || !(cluster_mean_mass >= 0.0 && cluster_mean_mass.is_finite()) {
        return Err(invalid("cluster_intensity", "rates and masses must be nonnegative"));
    }
    if germ_rate == 0.0 {
        return Ok(0.0);
    }
    Ok(germ_rate * cluster_mean_mass)
}

/// Intensity `rate / (1 - progeny_mass)` of a stationary branching process.
pub fn branching_total_intensity(germ_rate: f64, progeny_mass: f64) -> Result<f64> {
    if !(germ_rate >= 0.0 && germ_rate.is_finite()) || !(progeny_mass >= 0.0) {
        return Err(invalid("branching_total_intensity", "rates and masses must be nonnegative"));
    }
    if progeny_mass >= 1.0 {
        return Err(Error::Supercritical(progeny_mass));
    }
    Ok(germ_rate / (1.0 - progeny_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cluster_intensity_examples() {
        assert_eq!(cluster_intensity(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(cluster_intensity(0.0, 123.0).unwrap(), 0.0);
        assert_eq!(cluster_intensity(0.5, 3.0).unwrap(), 1.5);
    }

    #[test]
    fn branching_intensity_examples() {
        assert_eq!(branching_total_intensity(1.0, 0.5).unwrap(), 2.0);
        assert_eq!(branching_total_intensity(1.0, 0.0).unwrap(), 1.0);
        assert!((branching_total_intensity(2.0, 0.9).unwrap() - 20.0).abs() < 1e-12);
        assert!(matches!(branching_total_intensity(1.0, 1.0), Err(Error::Supercritical(_))));
        assert!(matches!(branching_total_intensity(1.0, 1.5), Err(Error::Supercritical(_))));
    }

    #[test]
    fn window_volume_examples() {
        assert_eq!(window_volume(&Window::unit(2).unwrap()), 1.0);
        assert_eq!(window_volume(&Window::new(vec![0.0, 0.0], vec![2.0, 3.0]).unwrap()), 6.0);
        assert_eq!(window_volume(&Window::interval(0.0, 2.0).unwrap()), 2.0);
    }

    #[test]
    fn total_on_each_form() {
        let w = Window::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(IntensityMeasureSpec::lebesgue(2, 3.0).unwrap().total_on(&w).unwrap(), 6.0);
        let dens = IntensityMeasureSpec::density(2, Arc::new(|x: &[f64]| x[0]), 10.0).unwrap();
        assert!((dens.total_on(&w).unwrap() - 2.0).abs() < 1e-8);
        let atoms = IntensityMeasureSpec::atomic(2, vec![(vec![0.5, 0.5], 1.5), (vec![5.0, 5.0], 2.0)]).unwrap();
        assert_eq!(atoms.total_on(&w).unwrap(), 1.5);
    }

    #[test]
    fn density_bound_is_enforced() {
        let dens = IntensityMeasureSpec::density(1, Arc::new(|x: &[f64]| x[0]), 1.0).unwrap();
        assert!(dens.density_at(&[0.5]).is_ok());
        assert!(matches!(dens.density_at(&[2.0]), Err(Error::BoundViolated { .. })));
    }

    proptest! {
        #[test]
        fn branching_intensity_strictly_increasing(l in 0.01f64..10.0, r in 0.0f64..0.98, dl in 0.001f64..1.0, dr in 0.0001f64..0.01) {
            let base = branching_total_intensity(l, r).unwrap();
            prop_assert!(branching_total_intensity(l + dl, r).unwrap() > base);
            prop_assert!(branching_total_intensity(l, r + dr).unwrap() > base);
        }
    }

    #[test]
    fn branching_intensity_diverges_near_one() {
        let vals: Vec<f64> = [0.9, 0.99, 0.999, 0.9999]
            .iter()
            .map(|&r| branching_total_intensity(1.0, r).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(vals[3] > 9_999.0);
    }
}
