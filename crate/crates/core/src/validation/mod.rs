//! Statistical harness and independent oracle samplers.
//!
//! The oracles share nothing with the samplers they check except the random
//! streams: each draws directly from `rand_distr` laws over a window large
//! enough (or a burn-in long enough) to be exact or certifiably close.

pub mod oracles;
pub mod stats;

pub use stats::{
    chi_square, count_histogram_distance, empirical_intensity, empirical_laplace, holm, two_sample_ks,
    void_probability, z_test, Estimate, HistogramDistance, TestReport, MIN_TEST_SAMPLE,
};
