//! Exact sampling of cluster point processes, Boolean models and Hawkes
//! processes restricted to a bounded window.
//!
//! The germ of a cluster process is thinned by the probability that its
//! cluster reaches the window, and each retained germ receives a cluster
//! conditioned on hitting it. When that probability is known in closed form
//! ([`cluster`], [`boolean`]) this is done directly; for linear Hawkes
//! processes the probability is bracketed by monotone bound sequences and
//! dominated points are classified against them ([`hawkes`]). Non-Poisson
//! germs are handled in [`germ`], generation-truncated approximations with a
//! variation-distance certificate in [`branching`], and [`validation`]
//! holds the statistical harness and the independent oracle samplers.

pub mod boolean;
pub mod branching;
pub mod cluster;
pub mod config;
pub mod error;
pub mod geometry;
pub mod germ;
pub mod hawkes;
pub mod intensity;
pub mod pattern;
pub mod poisson;
pub mod quadrature;
pub mod rng;
pub mod validation;

pub use error::{Error, Result};
pub use geometry::{Disk, Region, Window};
pub use intensity::{branching_total_intensity, cluster_intensity, window_volume, IntensityMeasureSpec};
pub use pattern::{PatternDocument, PatternMeta, PointPattern};
pub use rng::RngStream;
