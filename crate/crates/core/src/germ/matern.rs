//! Matérn hard-core germ, thinned first.
//!
//! A point of a rate-`lambda` Poisson process with an independent uniform
//! mark survives when its mark is the smallest among all points within
//! distance `r`. Survivors are then kept with probability `p(x)`. Because
//! the retention flag is independent of the marks, the flagged points can be
//! drawn first and competitors generated only within `r` of them.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::Window;
use crate::pattern::PointPattern;
use crate::poisson::sample_homogeneous;
use crate::rng::RngStream;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn retention(p: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<f64> {
    let v = p(x);
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid("retain", format!("p = {v} is not a probability")));
    }
    Ok(v)
}

/// Matérn hard-core points that survive retention `p`, which vanishes
/// outside `w`.
pub fn matern_thin_first(
    rate: f64,
    r: f64,
    p: &dyn Fn(&[f64]) -> f64,
    w: &Window,
    rng: &mut RngStream,
) -> Result<PointPattern> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid("r", "hard-core distance must be finite and nonnegative"));
    }
    let mut flagged = Vec::new();
    for x in sample_homogeneous(w, rate, rng)?.iter() {
        if rng.random::<f64>() < retention(p, x)? {
            flagged.push(x.to_vec());
        }
    }
    if flagged.is_empty() {
        return Ok(PointPattern::empty(w.dim()));
    }
    let m = w.dim();
    let lower: Vec<f64> = (0..m)
        .map(|i| flagged.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min) - r)
        .collect();
    let upper: Vec<f64> = (0..m)
        .map(|i| flagged.iter().map(|x| x[i]).fold(f64::NEG_INFINITY, f64::max) + r)
        .collect();
    let r2 = r * r;
    let mut others = Vec::new();
    if r > 0.0 {
        let bbox = Window::new(lower, upper)?;
        for y in sample_homogeneous(&bbox, rate, rng)?.iter() {
            if !flagged.iter().any(|x| dist2(x, y) <= r2) {
                continue;
            }
            let q = if w.contains(y) { retention(p, y)? } else { 0.0 };
            if rng.random::<f64>() >= q {
                others.push(y.to_vec());
            }
        }
    }
    let marks_flagged: Vec<f64> = (0..flagged.len()).map(|_| rng.random()).collect();
    let marks_others: Vec<f64> = (0..others.len()).map(|_| rng.random()).collect();
    let mut out = PointPattern::empty(m);
    for (i, x) in flagged.iter().enumerate() {
        let u = marks_flagged[i];
        let beaten = flagged
            .iter()
            .zip(&marks_flagged)
            .enumerate()
            .any(|(j, (y, &v))| j != i && v < u && dist2(x, y) <= r2)
            || others.iter().zip(&marks_others).any(|(y, &v)| v < u && dist2(x, y) <= r2);
        if !beaten {
            out.push(x)?;
        }
    }
    Ok(out)
}
