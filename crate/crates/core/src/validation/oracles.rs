//! Brute-force samplers used as ground truth.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};

use crate::error::{invalid, Result};
use crate::geometry::Window;
use crate::pattern::PointPattern;
use crate::rng::RngStream;

fn poisson(mean: f64, rng: &mut RngStream) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite mean").sample(rng) as usize
    }
}

fn uniform_box(lower: &[f64], upper: &[f64], rng: &mut RngStream) -> Vec<f64> {
    lower.iter().zip(upper).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect()
}

/// Cox cluster process with offspring uniform on `[lower, upper]` around
/// each germ: every germ whose cluster can reach `w` lies in `w` grown by the
/// displacement extent, so simulating that box is exact.
pub fn buffered_cox_uniform(
    lambda0: f64,
    mean: f64,
    lower: &[f64],
    upper: &[f64],
    w: &Window,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    let m = w.dim();
    if lower.len() != m || upper.len() != m {
        return Err(invalid("displacement", "dimension differs from the window"));
    }
    let glo: Vec<f64> = (0..m).map(|i| w.lower()[i] - upper[i].max(0.0)).collect();
    let ghi: Vec<f64> = (0..m).map(|i| w.upper()[i] - lower[i].min(0.0)).collect();
    let vol: f64 = glo.iter().zip(&ghi).map(|(a, b)| b - a).product();
    let mut out = PointPattern::empty(m);
    for _ in 0..poisson(lambda0 * vol, rng) {
        let x = uniform_box(&glo, &ghi, rng);
        for _ in 0..poisson(mean, rng) {
            let d = uniform_box(lower, upper, rng);
            let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            if w.contains(&y) {
                out.push(&y)?;
            }
        }
    }
    Ok(out)
}

/// Renewal process with Gamma(2, scale) gaps started at 0, each point kept
/// independently with probability `retain(t)`, simulated up to `horizon`.
pub fn renewal_gamma2_thin_after(
    scale: f64,
    retain: &dyn Fn(f64) -> f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    let gap = Gamma::new(2.0, scale).map_err(|e| invalid("scale", e.to_string()))?;
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += gap.sample(rng);
        if t > horizon {
            break;
        }
        if rng.random::<f64>() < retain(t) {
            out.push(t);
        }
    }
    PointPattern::from_times(&out)
}

/// Matérn hard-core process on `w` by direct construction: Poisson points on
/// `w` grown by `r`, each surviving when its mark is smallest within `r`.
pub fn matern_direct(rate: f64, r: f64, w: &Window, rng: &mut RngStream) -> Result<PointPattern> {
    let big = w.buffered(r);
    let n = poisson(rate * big.volume(), rng);
    let pts: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| (uniform_box(big.lower(), big.upper(), rng), rng.random::<f64>()))
        .collect();
    let r2 = r * r;
    let mut out = PointPattern::empty(w.dim());
    for (x, u) in &pts {
        if !w.contains(x) {
            continue;
        }
        let beaten = pts.iter().any(|(y, v)| {
            v < u && x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r2
        });
        if !beaten {
            out.push(x)?;
        }
    }
    Ok(out)
}

/// Linear Hawkes process with immigrant rate `mu` and kernel
/// `beta exp(-gamma t)`, by Ogata thinning from `-burn_in`, kept on `[0, a]`.
pub fn hawkes_exponential_burn_in(
    mu: f64,
    beta: f64,
    gamma: f64,
    a: f64,
    burn_in: f64,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    if !(mu > 0.0 && beta >= 0.0 && gamma > 0.0 && beta < gamma) {
        return Err(invalid("hawkes", "need mu > 0 and 0 <= beta < gamma"));
    }
    let mut t = -burn_in;
    // Excitation sum at the current time, decaying between events.
    let mut excite = 0.0;
    let mut out = Vec::new();
    loop {
        let bound = mu + excite;
        let w = Exp::new(bound).expect("positive rate").sample(rng);
        excite *= (-gamma * w).exp();
        t += w;
        if t > a {
            break;
        }
        if rng.random::<f64>() * bound < mu + excite {
            excite += beta;
            if t >= 0.0 {
                out.push(t);
            }
        }
    }
    PointPattern::from_times(&out)
}

/// Non-linear Hawkes process `phi(sum h(t - s))` with `phi <= bound` and `h`
/// supported in `[0, support]`, by thinning from `-burn_in`.
pub fn nonlinear_hawkes_burn_in(
    phi: &dyn Fn(f64) -> f64,
    bound: f64,
    h: &dyn Fn(f64) -> f64,
    support: f64,
    w: &Window,
    burn_in: f64,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    let (s0, s1) = (w.lower()[0], w.upper()[0]);
    let gaps = Exp::new(bound).map_err(|e| invalid("bound", e.to_string()))?;
    let mut t = s0 - burn_in;
    let mut events: Vec<f64> = Vec::new();
    loop {
        t += gaps.sample(rng);
        if t > s1 {
            break;
        }
        let u: f64 = events.iter().rev().take_while(|&&s| t - s <= support).map(|&s| h(t - s)).sum();
        if rng.random::<f64>() * bound < phi(u) {
            events.push(t);
        }
    }
    let inside: Vec<f64> = events.into_iter().filter(|&s| s >= s0).collect();
    PointPattern::from_times(&inside)
}

/// Extinction times `L` of `n` single-ancestor clusters with fertility
/// `beta exp(-gamma t)`.
pub fn gw_extinction_times_exponential(beta: f64, gamma: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let delay = Exp::new(gamma).expect("positive gamma");
    let kids = beta / gamma;
    let mut stack = Vec::new();
    (0..n)
        .map(|_| {
            let mut last: f64 = 0.0;
            stack.clear();
            stack.push(0.0);
            while let Some(t) = stack.pop() {
                last = last.max(t);
                for _ in 0..poisson(kids, rng) {
                    stack.push(t + delay.sample(rng));
                }
            }
            last
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burn_in_hawkes_mean_rate() {
        let reps = 2000;
        let total: usize = (0..reps)
            .map(|k| hawkes_exponential_burn_in(1.0, 0.5, 1.0, 10.0, 60.0, &mut RngStream::new(1, k)).unwrap().len())
            .sum();
        let mean = total as f64 / reps as f64;
        // Var of N[0, 10] is about mu a / (1 - rho)^3 = 80.
        assert!((mean - 20.0).abs() < 3.0 * (80.0f64 / reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn direct_matern_respects_hard_core() {
        let w = Window::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap();
        let p = matern_direct(4.0, 0.25, &w, &mut RngStream::new(2, 0)).unwrap();
        assert!(p.nearest_neighbour_distances().iter().all(|&d| d > 0.25));
    }

    #[test]
    fn extinction_times_nonnegative() {
        let ls = gw_extinction_times_exponential(0.5, 1.0, 1000, &mut RngStream::new(3, 0));
        let zero = ls.iter().filter(|&&l| l == 0.0).count() as f64 / 1000.0;
        assert!((zero - (-0.5f64).exp()).abs() < 0.05);
    }
}
