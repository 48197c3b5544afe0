//! The fixed-point operator of the cluster extinction time and its
//! sandwich bounds.
//!
//! For a cluster with one ancestor at 0, let `L` be the time of its last
//! point and `F(t) = P(L <= t)`. Conditioning on the ancestor's offspring,
//!
//! ```text
//! F(t) = E[ exp( -nu(inf, Z) + integral_0^t F(t - s) h(s, Z) ds ) ] = Phi(F)(t).
//! ```
//!
//! `Phi` is monotone and a contraction with modulus `rho` in the sup norm.
//! On a uniform grid, bounding `F(t - s)` over each cell by its values at the
//! cell ends (F is nondecreasing) gives two discrete operators, one below
//! and one above `Phi`. Iterating the lower one from a sub-solution `G` and
//! the upper one from 1 brackets `F` at every node, and therefore brackets
//! the survival `P(L > t) = 1 - F(t)`.

use serde::Serialize;

use super::kernel::{FertilityKernel, KernelShape};
use crate::error::{invalid, Error, Result};

/// Relative slack applied by directed rounding.
const ROUNDING_SLACK: f64 = 1e-12;

/// Which side of `Phi` a discrete evaluation must fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Down,
    Up,
    Nearest,
}

/// Cell weights `nu(m dt) - nu((m - 1) dt)` for `m = 1..=len`.
fn cell_weights(shape: &KernelShape, dt: f64, len: usize) -> Vec<f64> {
    let cells = match shape.support_end() {
        s if s.is_finite() => ((s / dt).ceil() as usize).min(len),
        _ => len,
    };
    let mut prev = 0.0;
    (1..=cells)
        .map(|m| {
            let c = shape.cumulative(m as f64 * dt);
            let w = (c - prev).max(0.0);
            prev = c;
            w
        })
        .collect()
}

/// `lower[k] = sum_{m=1..k} f[k-m] w_m` and `upper[k] = sum_{m=1..k} f[k-m+1] w_m`.
fn convolutions(f: &[f64], shape: &KernelShape, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    if n == 0 {
        return (lower, upper);
    }
    if let KernelShape::Exponential { beta, gamma } = shape {
        // Geometric weights: w_m = w_1 r^(m-1), so both sums obey a
        // first-order recursion.
        let r = (-gamma * dt).exp();
        let w1 = beta / gamma * -(-gamma * dt).exp_m1();
        for k in 1..n {
            lower[k] = r * lower[k - 1] + w1 * f[k - 1];
            upper[k] = r * upper[k - 1] + w1 * f[k];
        }
        return (lower, upper);
    }
    let w = cell_weights(shape, dt, n);
    for k in 1..n {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (m, wm) in w.iter().enumerate().take(k) {
            // m is zero-based here: cell m + 1.
            lo += f[k - m - 1] * wm;
            hi += f[k - m] * wm;
        }
        lower[k] = lo;
        upper[k] = hi;
    }
    (lower, upper)
}

/// Both directed discretisations of `Phi(f)` at the grid nodes `i dt`.
fn phi_both(f: &[f64], kernel: &FertilityKernel, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let n = f.len();
    let mut down = vec![0.0; n];
    let mut up = vec![0.0; n];
    for (weight, shape) in kernel.components() {
        let total = shape.mass();
        let (lo, hi) = convolutions(f, shape, dt);
        for k in 0..n {
            down[k] += weight * (lo[k] - total).min(0.0).exp();
            up[k] += weight * (hi[k] - total).min(0.0).exp();
        }
    }
    (down, up)
}

fn check_grid_function(f: &[f64], dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "grid step must be positive"));
    }
    if f.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("f", "grid function must take values in [0, 1]"));
    }
    Ok(())
}

/// `Phi(f)` at nodes `i dt`, for `f` given at the same nodes.
///
/// `Down` is at most `Phi(g)` for every nondecreasing `g >= f` agreeing with
/// `f` at the nodes; `Up` is at least it. `Nearest` averages the two.
pub fn phi_apply(f: &[f64], kernel: &FertilityKernel, dt: f64, rounding: Rounding) -> Result<Vec<f64>> {
    check_grid_function(f, dt)?;
    let (down, up) = phi_both(f, kernel, dt);
    Ok(match rounding {
        Rounding::Down => down.iter().map(|v| (v * (1.0 - ROUNDING_SLACK)).clamp(0.0, 1.0)).collect(),
        Rounding::Up => up.iter().map(|v| (v * (1.0 + ROUNDING_SLACK)).clamp(0.0, 1.0)).collect(),
        Rounding::Nearest => down.iter().zip(&up).map(|(a, b)| (0.5 * (a + b)).clamp(0.0, 1.0)).collect(),
    })
}

/// [`phi_apply`] with `Nearest`, refusing grids where the two directed
/// discretisations differ by more than `tol`.
pub fn phi_apply_checked(f: &[f64], kernel: &FertilityKernel, dt: f64, tol: f64) -> Result<Vec<f64>> {
    check_grid_function(f, dt)?;
    let (down, up) = phi_both(f, kernel, dt);
    let estimate = down.iter().zip(&up).map(|(a, b)| b - a).fold(0.0, f64::max);
    if estimate > tol {
        return Err(Error::GridTooCoarse { estimate, tol });
    }
    Ok(down.iter().zip(&up).map(|(a, b)| (0.5 * (a + b)).clamp(0.0, 1.0)).collect())
}

/// Uniform grid `0, dt, ..., t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub dt: f64,
    pub t_max: f64,
}

impl Grid {
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0 && t_max > 0.0 && t_max.is_finite()) {
            return Err(invalid("grid", "need dt > 0 and finite t_max > 0"));
        }
        let n = (t_max / dt).ceil();
        Ok(Self { dt, t_max: n * dt })
    }

    pub fn nodes(&self) -> usize {
        (self.t_max / self.dt).round() as usize + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// `G(t) = 1 - exp(-delta t)` with `delta = kernel.decay_rate(dt)`, a
/// sub-solution `G <= Phi(G)` that stays one on grids of step `dt` or finer.
///
/// With `E[integral of exp(delta s) h(s, Z) ds] <= 1`, the inequality
/// `exp(-x) >= 1 - x` gives `Phi(G)(t) >= 1 - exp(-delta t)`.
pub fn default_g(kernel: &FertilityKernel, dt: f64) -> impl Fn(f64) -> f64 {
    let delta = kernel.decay_rate(dt);
    move |t: f64| if t <= 0.0 { 0.0 } else { -(-delta * t).exp_m1() }
}

/// Grid bounds `l_n <= P(L > t) <= u_n` after `n` iterations.
#[derive(Debug, Clone, Serialize)]
pub struct BoundPair {
    pub grid: Grid,
    /// Decay of the dominating survival `1 - G`, used beyond the grid.
    pub delta: f64,
    /// `Phi`-iterates from `G`, rounded down: below `F`.
    pub cdf_lower: Vec<f64>,
    /// `Phi`-iterates from 1, rounded up: above `F`.
    pub cdf_upper: Vec<f64>,
    pub iterations: usize,
    /// `sup |D(f_0) - f_0|` for the lower and upper sequences.
    pub initial_residuals: (f64, f64),
    /// `sup (u_n - l_n)` after each iteration.
    pub gaps: Vec<f64>,
}

impl BoundPair {
    /// Starts both sequences and checks that `G` is a discrete sub-solution.
    pub fn start(kernel: &FertilityKernel, g: &dyn Fn(f64) -> f64, grid: Grid, delta: f64) -> Result<Self> {
        let n = grid.nodes();
        let f0: Vec<f64> = (0..n).map(|i| g(grid.node(i))).collect();
        check_grid_function(&f0, grid.dt)?;
        let f1 = phi_apply(&f0, kernel, grid.dt, Rounding::Down)?;
        for i in 0..n {
            if f1[i] < f0[i] {
                return Err(Error::BracketFailed {
                    t: grid.node(i),
                    deficit: f0[i] - f1[i],
                });
            }
        }
        let ones = vec![1.0; n];
        let u1 = phi_apply(&ones, kernel, grid.dt, Rounding::Up)?;
        let res_l = f1.iter().zip(&f0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let res_u = u1.iter().map(|a| 1.0 - a).fold(0.0, f64::max);
        Ok(Self {
            grid,
            delta,
            cdf_lower: f0,
            cdf_upper: ones,
            iterations: 0,
            initial_residuals: (res_l, res_u),
            gaps: Vec::new(),
        })
    }

    /// One application of the directed operators; returns the largest change.
    pub fn step(&mut self, kernel: &FertilityKernel) -> Result<f64> {
        let lo = phi_apply(&self.cdf_lower, kernel, self.grid.dt, Rounding::Down)?;
        let hi = phi_apply(&self.cdf_upper, kernel, self.grid.dt, Rounding::Up)?;
        let mut change: f64 = 0.0;
        // Keeping the better of old and new preserves both the bracket and
        // monotonicity in n against floating-point noise.
        for (old, new) in self.cdf_lower.iter_mut().zip(lo) {
            let v = old.max(new);
            change = change.max(v - *old);
            *old = v;
        }
        for (old, new) in self.cdf_upper.iter_mut().zip(hi) {
            let v = old.min(new);
            change = change.max(*old - v);
            *old = v;
        }
        self.iterations += 1;
        self.gaps.push(self.gap());
        Ok(change)
    }

    /// `l_n` at the nodes: lower bound on `P(L > t)`.
    pub fn tail_lower(&self) -> Vec<f64> {
        self.cdf_upper.iter().map(|v| 1.0 - v).collect()
    }

    /// `u_n` at the nodes: upper bound on `P(L > t)`.
    pub fn tail_upper(&self) -> Vec<f64> {
        self.cdf_lower.iter().map(|v| 1.0 - v).collect()
    }

    pub fn gap(&self) -> f64 {
        self.cdf_upper
            .iter()
            .zip(&self.cdf_lower)
            .map(|(u, l)| u - l)
            .fold(0.0, f64::max)
    }

    /// Bounds on `P(L > t)` for any `t >= 0`, using monotonicity of `F`
    /// between nodes and the dominating tail beyond the grid.
    pub fn survival_bounds(&self, t: f64) -> (f64, f64) {
        if t < 0.0 {
            return (1.0, 1.0);
        }
        let n = self.cdf_lower.len();
        let i = (t / self.grid.dt).floor() as usize;
        if i + 1 >= n {
            if i < n && t == self.grid.node(i) {
                return (1.0 - self.cdf_upper[i], 1.0 - self.cdf_lower[i]);
            }
            return (0.0, (-self.delta * t).exp());
        }
        (1.0 - self.cdf_upper[i + 1], 1.0 - self.cdf_lower[i])
    }

    /// Iterates until both sequences stop moving or `n_max` is reached.
    pub fn converge(&mut self, kernel: &FertilityKernel, n_max: usize) -> Result<()> {
        while self.iterations < n_max {
            if self.step(kernel)? <= 0.0 {
                break;
            }
        }
        Ok(())
    }
}

/// Iterates the sandwich until `sup (u_n - l_n) <= tol`.
pub fn build_sandwich(
    kernel: &FertilityKernel,
    g: &dyn Fn(f64) -> f64,
    n_max: usize,
    tol: f64,
    grid: Grid,
) -> Result<BoundPair> {
    let mut pair = BoundPair::start(kernel, g, grid, kernel.decay_rate(grid.dt))?;
    while pair.iterations < n_max {
        let change = pair.step(kernel)?;
        if pair.gap() <= tol {
            return Ok(pair);
        }
        // Stalled at the grid's resolution: more iterations cannot help.
        if change <= 0.0 {
            break;
        }
    }
    Err(Error::SandwichNotConverged {
        iterations: pair.iterations,
        gap: pair.gap(),
    })
}
