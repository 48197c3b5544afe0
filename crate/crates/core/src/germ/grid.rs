//! Thinning of a deterministic grid germ.
//!
//! Site `n` is retained independently with probability `p_n`, and only
//! finitely many sites are retained when `sum p_n < inf`. The last retained
//! index `T` has `P(T <= n) = prod_{k > n} (1 - p_k)`, so it can be drawn
//! first; the earlier sites are then independent of `T`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// A retention sequence indexed by `n = 0, 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceFamily {
    /// Listed values, zero beyond the table.
    Table { values: Vec<f64> },
    /// `first * ratio^n`.
    Geometric { first: f64, ratio: f64 },
    /// `1 - exp(-scale * ratio^n)`.
    ExpGeometric { scale: f64, ratio: f64 },
    /// `1 - exp(-c / (n + 1)^2)`.
    InverseSquare { c: f64 },
}

impl SequenceFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Table { values } => values.iter().all(|p| (0.0..=1.0).contains(p)),
            Self::Geometric { first, ratio } => (0.0..=1.0).contains(first) && (0.0..1.0).contains(ratio),
            Self::ExpGeometric { scale, ratio } => *scale >= 0.0 && scale.is_finite() && (0.0..1.0).contains(ratio),
            Self::InverseSquare { c } => *c >= 0.0 && c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("sequence", format!("{self:?} is not a summable probability sequence")))
        }
    }

    pub fn value(&self, n: u64) -> f64 {
        match self {
            Self::Table { values } => values.get(n as usize).copied().unwrap_or(0.0),
            Self::Geometric { first, ratio } => first * ratio.powf(n as f64),
            Self::ExpGeometric { scale, ratio } => -(-scale * ratio.powf(n as f64)).exp_m1(),
            Self::InverseSquare { c } => -(-c / ((n + 1) as f64).powi(2)).exp_m1(),
        }
    }

    /// `ln prod_{k >= n} (1 - p_k)` in closed form, when available.
    pub fn log_tail_product(&self, n: u64) -> Option<f64> {
        match self {
            Self::Table { values } => Some(
                values
                    .iter()
                    .skip(n as usize)
                    .map(|p| (-p).ln_1p())
                    .sum(),
            ),
            Self::Geometric { .. } => None,
            Self::ExpGeometric { scale, ratio } => Some(-scale * ratio.powf(n as f64) / (1.0 - ratio)),
            Self::InverseSquare { c } => Some(-c * trigamma((n + 1) as f64)),
        }
    }

    /// A dominating sequence with closed-form tail products.
    fn default_dominating(&self) -> Option<SequenceFamily> {
        match self {
            // 1 - exp(-c x) is concave in x, so it lies above first * x on
            // [0, 1] once it does at x = 1.
            Self::Geometric { first, ratio } if *first < 1.0 => Some(Self::ExpGeometric {
                scale: -(-first).ln_1p(),
                ratio: *ratio,
            }),
            _ => None,
        }
    }
}

/// `psi'(x) = sum_{k >= 0} 1 / (x + k)^2` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 30.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    acc + 1.0 / x + z / 2.0
        + z / x * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z / 30.0)))
}

/// Retention sequence with an optional dominating sequence `q >= p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridThinningSpec {
    pub retention: SequenceFamily,
    #[serde(default)]
    pub dominating: Option<SequenceFamily>,
}

/// Outcome of drawing the last retained index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LastPoint {
    Empty,
    At(u64),
}

const SEARCH_LIMIT: u64 = 1 << 52;
const DOMINATION_CHECK: u64 = 10_000;

impl GridThinningSpec {
    pub fn new(retention: SequenceFamily) -> Result<Self> {
        retention.validate()?;
        Ok(Self {
            retention,
            dominating: None,
        })
    }

    pub fn with_dominating(retention: SequenceFamily, dominating: SequenceFamily) -> Result<Self> {
        retention.validate()?;
        dominating.validate()?;
        for n in 0..DOMINATION_CHECK {
            if dominating.value(n) < retention.value(n) {
                return Err(invalid("dominating", format!("q_{n} < p_{n}")));
            }
        }
        Ok(Self {
            retention,
            dominating: Some(dominating),
        })
    }

    /// Sequence whose tail products drive the draw of `T`, and whether it
    /// differs from the retention sequence.
    fn driver(&self) -> Result<(SequenceFamily, bool)> {
        if self.retention.log_tail_product(0).is_some() {
            return Ok((self.retention.clone(), false));
        }
        if let Some(q) = &self.dominating {
            if q.log_tail_product(0).is_some() {
                return Ok((q.clone(), true));
            }
        }
        match self.retention.default_dominating() {
            Some(q) => Ok((q, true)),
            None => Err(Error::TailNotComputable),
        }
    }

    /// `P(T = n)` for `n < max_n` and `P(empty)`, computed from the
    /// retention sequence's closed-form tails.
    pub fn last_point_pmf(&self, max_n: u64) -> Result<(Vec<f64>, f64)> {
        let s = &self.retention;
        let tail = |n| s.log_tail_product(n).ok_or(Error::TailNotComputable);
        let empty = tail(0)?.exp();
        let mut pmf = Vec::with_capacity(max_n as usize);
        for n in 0..max_n {
            pmf.push(s.value(n) * tail(n + 1)?.exp());
        }
        Ok((pmf, empty))
    }
}

/// Draws `T` for the sequence `s` from its tail products.
fn draw_last(s: &SequenceFamily, rng: &mut RngStream) -> Result<LastPoint> {
    let cdf = |n: u64| s.log_tail_product(n).map(f64::exp).ok_or(Error::TailNotComputable);
    let u: f64 = rng.random();
    // P(T <= n) = cdf(n + 1); P(empty) = cdf(0).
    if u < cdf(0)? {
        return Ok(LastPoint::Empty);
    }
    let mut hi = 1u64;
    while u >= cdf(hi + 1)? {
        hi *= 2;
        if hi > SEARCH_LIMIT {
            return Err(Error::TailNotComputable);
        }
    }
    let mut lo = 0u64;
    // Invariant: u >= cdf(lo) and u < cdf(hi + 1).
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if u < cdf(mid + 1)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(LastPoint::At(lo))
}

/// The last retained index of the thinned grid.
pub fn grid_last_point(spec: &GridThinningSpec, rng: &mut RngStream) -> Result<LastPoint> {
    let (driver, dominated) = spec.driver()?;
    if dominated {
        return match thin_grid(spec, rng)?.last() {
            Some(&n) => Ok(LastPoint::At(n)),
            None => Ok(LastPoint::Empty),
        };
    }
    draw_last(&driver, rng)
}

/// Retained indices of the thinned grid, increasing.
///
/// With a dominating sequence the grid is first thinned by `q` and each
/// survivor is then kept with probability `p_k / q_k`.
pub fn thin_grid(spec: &GridThinningSpec, rng: &mut RngStream) -> Result<Vec<u64>> {
    let (driver, dominated) = spec.driver()?;
    let last = match draw_last(&driver, rng)? {
        LastPoint::Empty => return Ok(Vec::new()),
        LastPoint::At(n) => n,
    };
    let mut kept: Vec<u64> = (0..last).filter(|&k| rng.random::<f64>() < driver.value(k)).collect();
    kept.push(last);
    if dominated {
        kept.retain(|&k| {
            let q = driver.value(k);
            q > 0.0 && rng.random::<f64>() * q < spec.retention.value(k)
        });
    }
    Ok(kept)
}

/// Enumeration of Z^2: zigzag on each axis composed with Cantor pairing.
pub fn z2_from_index(n: u64) -> (i64, i64) {
    let w = ((((8 * n as u128 + 1) as f64).sqrt() - 1.0) / 2.0).floor() as u64;
    // Guard the float estimate of the diagonal.
    let mut w = w;
    while w * (w + 1) / 2 > n {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= n {
        w += 1;
    }
    let b = n - w * (w + 1) / 2;
    let a = w - b;
    (unzigzag(a), unzigzag(b))
}

pub fn z2_to_index(i: i64, j: i64) -> u64 {
    let (a, b) = (zigzag(i), zigzag(j));
    (a + b) * (a + b + 1) / 2 + b
}

fn zigzag(i: i64) -> u64 {
    if i >= 0 {
        2 * i as u64
    } else {
        2 * i.unsigned_abs() - 1
    }
}

fn unzigzag(a: u64) -> i64 {
    if a % 2 == 0 {
        (a / 2) as i64
    } else {
        -(a.div_ceil(2) as i64)
    }
}

/// Thinned grid on Z^2, with site `(i, j)` carrying `p` at its enumeration index.
pub fn thin_z2(spec: &GridThinningSpec, rng: &mut RngStream) -> Result<Vec<(i64, i64)>> {
    Ok(thin_grid(spec, rng)?.into_iter().map(z2_from_index).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_half() -> GridThinningSpec {
        GridThinningSpec::new(SequenceFamily::Table { values: vec![0.5, 0.5] }).unwrap()
    }

    #[test]
    fn trigamma_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-14, "{}", trigamma(1.0) - pi2_6);
        assert!((trigamma(2.0) - (pi2_6 - 1.0)).abs() < 1e-14);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn enumeration_pmf() {
        let (pmf, empty) = half_half().last_point_pmf(4).unwrap();
        assert_eq!(pmf, vec![0.25, 0.5, 0.0, 0.0]);
        assert_eq!(empty, 0.25);
    }

    #[test]
    fn zero_sequence_is_always_empty() {
        let spec = GridThinningSpec::new(SequenceFamily::Table { values: vec![0.0; 5] }).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert_eq!(grid_last_point(&spec, &mut rng).unwrap(), LastPoint::Empty);
        }
    }

    #[test]
    fn certain_single_site() {
        let spec = GridThinningSpec::new(SequenceFamily::Table { values: vec![1.0] }).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert_eq!(thin_grid(&spec, &mut rng).unwrap(), vec![0]);
        }
    }

    #[test]
    fn inverse_square_pmf_sums_to_one() {
        let spec = GridThinningSpec::new(SequenceFamily::InverseSquare { c: 2.0 }).unwrap();
        let (pmf, empty) = spec.last_point_pmf(2_000_000).unwrap();
        let mut total = empty;
        // Neumaier summation.
        let mut comp = 0.0;
        for p in pmf {
            let t = total + p;
            comp += if total.abs() >= p.abs() { (total - t) + p } else { (p - t) + total };
            total = t;
        }
        // Mass beyond n is 1 - exp(-c psi'(n + 1)) <= c / n.
        let beyond = -(-2.0 * trigamma(2_000_001.0)).exp_m1();
        assert!((total + comp + beyond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_needs_domination_and_gets_it() {
        let spec = GridThinningSpec::new(SequenceFamily::Geometric { first: 0.6, ratio: 0.5 }).unwrap();
        assert!(matches!(spec.last_point_pmf(3), Err(Error::TailNotComputable)));
        let mut rng = RngStream::new(4, 0);
        let n = 100_000;
        let mut hits = [0usize; 3];
        for _ in 0..n {
            for k in thin_grid(&spec, &mut rng).unwrap() {
                if k < 3 {
                    hits[k as usize] += 1;
                }
            }
        }
        for (k, h) in hits.iter().enumerate() {
            let p = 0.6 * 0.5f64.powi(k as i32);
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*h as f64 / n as f64 - p).abs() < 4.0 * sd, "site {k}");
        }
    }

    #[test]
    fn undominated_sequence_is_rejected() {
        let err = GridThinningSpec::with_dominating(
            SequenceFamily::Table { values: vec![0.5, 0.5] },
            SequenceFamily::Table { values: vec![0.5, 0.4] },
        )
        .unwrap_err();
        assert!(err.to_string().contains("q_1"));
    }

    #[test]
    fn z2_bijection_round_trips() {
        for n in 0..10_000 {
            let (i, j) = z2_from_index(n);
            assert_eq!(z2_to_index(i, j), n);
        }
        for i in -20..=20 {
            for j in -20..=20 {
                assert_eq!(z2_from_index(z2_to_index(i, j)), (i, j));
            }
        }
    }
}
