//! Linear Hawkes processes: fertility kernels, the sandwich bounds on the
//! cluster extinction time, branching clusters, and perfect sampling on a
//! window by dominated-Poisson classification.

pub mod gw;
pub mod kernel;
pub mod mr;
pub mod sandwich;

pub use gw::{sample_gw_cluster, GwCluster};
pub use kernel::{FertilityKernel, KernelShape};
pub use mr::{mr_perfect_sample, MrOptions, MrSample, MrSampler};
pub use sandwich::{build_sandwich, default_g, phi_apply, phi_apply_checked, BoundPair, Grid, Rounding};
