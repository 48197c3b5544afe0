//! Exact thinning of non-Poisson germ processes.

pub mod grid;
pub mod matern;
pub mod nonlinear_hawkes;
pub mod renewal;

pub use grid::{grid_last_point, thin_grid, thin_z2, GridThinningSpec, LastPoint, SequenceFamily};
pub use matern::matern_thin_first;
pub use nonlinear_hawkes::{nonlinear_hawkes_germ, NonlinearHawkes};
pub use renewal::{renewal_thin_first, RenewalSpec};
