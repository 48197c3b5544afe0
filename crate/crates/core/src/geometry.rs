//! Axis-aligned windows and disks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Axis-aligned bounded box `[lower, upper]` in R^m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<WindowRepr> for Window {
    type Error = Error;

    fn try_from(r: WindowRepr) -> Result<Self> {
        Window::new(r.lower, r.upper)
    }
}

impl From<Window> for WindowRepr {
    fn from(w: Window) -> Self {
        WindowRepr {
            lower: w.lower,
            upper: w.upper,
        }
    }
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidWindow("dimension must be positive".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidWindow(format!(
                "lower has {} coordinates, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::InvalidWindow(format!(
                    "side {i} is [{l}, {u}]; need finite lower < upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    /// Interval `[a, b]` on the line.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&c, (&l, &u))| c >= l && c <= u)
    }

    /// Per-coordinate distance from `x` to the box, zero inside the slab.
    fn axis_gaps<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&c, (&l, &u))| (l - c).max(c - u).max(0.0))
    }

    /// Euclidean distance from `x` to the box (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.axis_gaps(x).map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Chebyshev (L-infinity) distance from `x` to the box (0 inside).
    pub fn linf_distance(&self, x: &[f64]) -> f64 {
        self.axis_gaps(x).fold(0.0, f64::max)
    }

    /// The box grown by `r` on every side. Contains every point within
    /// Euclidean distance `r` of the original box.
    pub fn buffered(&self, r: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|l| l - r).collect(),
            upper: self.upper.iter().map(|u| u + r).collect(),
        }
    }

    /// Volume of the box grown by `d` on every side.
    pub fn buffered_volume(&self, d: f64) -> f64 {
        (0..self.dim()).map(|i| self.side(i) + 2.0 * d).product()
    }

    pub fn sample_uniform(&self, rng: &mut RngStream) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

/// Closed disk in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(crate::error::invalid("disk", "need finite center and radius > 0"));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// Target region of a Boolean model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Region {
    Box(Window),
    Disk(Disk),
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box(w) => w.contains(x),
            Region::Disk(d) => d.contains(x),
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Box(w) => w.distance(x),
            Region::Disk(d) => {
                let r = (x[0] - d.center[0]).hypot(x[1] - d.center[1]);
                (r - d.radius).max(0.0)
            }
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            Region::Box(w) => w.volume(),
            Region::Disk(d) => d.area(),
        }
    }

    /// Smallest box containing the region.
    pub fn bounding_box(&self) -> Window {
        match self {
            Region::Box(w) => w.clone(),
            Region::Disk(d) => Window {
                lower: vec![d.center[0] - d.radius, d.center[1] - d.radius],
                upper: vec![d.center[0] + d.radius, d.center[1] + d.radius],
            },
        }
    }
}
