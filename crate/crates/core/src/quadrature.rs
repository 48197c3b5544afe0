//! Adaptive Simpson quadrature.

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Richardson estimate of the absolute error.
    pub error: f64,
}

const MAX_DEPTH: u32 = 40;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
        };
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut err = 0.0;
    let value = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut err);
    Integral { value, error: err }
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let settled = delta.abs() <= 15.0 * tol || delta.abs() <= 1e-14 * (left + right).abs();
    if depth == 0 || (depth < MAX_DEPTH - 4 && settled) {
        *err += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err)
}

/// Iterated adaptive Simpson over a box given by `lower`/`upper`.
///
/// The reported error sums the outer-axis estimates only; it is a guide,
/// not a bound.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: F, lower: &[f64], upper: &[f64], tol: f64) -> Integral {
    let mut prefix = Vec::with_capacity(lower.len());
    nested(&f, lower, upper, tol, &mut prefix)
}

fn nested<F: Fn(&[f64]) -> f64>(f: &F, lower: &[f64], upper: &[f64], tol: f64, prefix: &mut Vec<f64>) -> Integral {
    let axis = prefix.len();
    if axis == lower.len() {
        return Integral {
            value: f(prefix),
            error: 0.0,
        };
    }
    let width = upper[axis] - lower[axis];
    let inner_tol = tol / width.max(1.0);
    let fixed = prefix.clone();
    adaptive_simpson(
        |t| {
            let mut xs = fixed.clone();
            xs.push(t);
            nested(f, lower, upper, inner_tol, &mut xs).value
        },
        lower[axis],
        upper[axis],
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((r.value - 0.0).abs() < 1e-12);
    }

    #[test]
    fn exponential() {
        let r = adaptive_simpson(|x| (-x).exp(), 0.0, 30.0, 1e-12);
        assert!((r.value - (1.0 - (-30.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn two_dimensional_box() {
        let r = integrate_box(|x| x[0] * x[1], &[0.0, 0.0], &[1.0, 2.0], 1e-10);
        assert!((r.value - 1.0).abs() < 1e-9);
    }
}
