//! Exact sampling of Boolean models on a window.
//!
//! Germs are thinned by the probability that their grain hits the target
//! region and each retained germ then receives a grain conditioned to hit
//! it. Line-like grains are handled as half-lines (rays) and segments
//! anchored at the germ with a uniform direction on `[0, 2 pi)`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{conditioned_by_rejection, sample_thinned_germ, truncation_by_envelope, GermThinning, ATTEMPT_CAP};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Region, Window};
use crate::intensity::IntensityMeasureSpec;
use crate::rng::RngStream;

/// Law of the radius of disk (ball) grains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadiusLaw {
    Fixed { radius: f64 },
    Exponential { rate: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl RadiusLaw {
    /// `P(R >= r)`.
    pub fn tail(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Fixed { radius } => f64::from(r <= radius),
            Self::Exponential { rate } => (-rate * r).exp(),
            Self::Uniform { lower, upper } => ((upper - r.max(lower)) / (upper - lower)).clamp(0.0, 1.0),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Self::Fixed { radius } => radius,
            Self::Exponential { rate } => -(1.0 - rng.random::<f64>()).ln() / rate,
            Self::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Fixed { radius } => radius >= 0.0 && radius.is_finite(),
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Self::Uniform { lower, upper } => lower >= 0.0 && lower < upper && upper.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("radius", format!("invalid radius law {self:?}")))
        }
    }
}

/// Random closed grain attached to each germ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GrainDistribution {
    /// Ball centred at the germ.
    Disk { radius: RadiusLaw },
    /// Segment from the germ in a uniform direction, fattened by `fatten`.
    Segment { length: f64, fatten: f64 },
    /// Half-line from the germ in a uniform direction.
    Ray,
}

/// A hit probability, tagged by how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitProb {
    pub value: f64,
    /// `false` when the value comes from a numerical root search.
    pub closed_form: bool,
}

/// A realized grain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Grain {
    Disk { center: Vec<f64>, radius: f64 },
    Segment { start: [f64; 2], end: [f64; 2], fatten: f64 },
    Ray { origin: [f64; 2], angle: f64 },
}

impl GrainDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Disk { radius } => radius.validate(),
            Self::Segment { length, fatten } => {
                if *length > 0.0 && length.is_finite() && *fatten >= 0.0 && fatten.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("segment", "need finite length > 0 and fatten >= 0"))
                }
            }
            Self::Ray => Ok(()),
        }
    }

    /// Grain of a germ at `x`.
    pub fn sample_grain(&self, x: &[f64], rng: &mut RngStream) -> Grain {
        match self {
            Self::Disk { radius } => Grain::Disk {
                center: x.to_vec(),
                radius: radius.sample(rng),
            },
            Self::Segment { length, fatten } => {
                let a = TAU * rng.random::<f64>();
                Grain::Segment {
                    start: [x[0], x[1]],
                    end: [x[0] + length * a.cos(), x[1] + length * a.sin()],
                    fatten: *fatten,
                }
            }
            Self::Ray => Grain::Ray {
                origin: [x[0], x[1]],
                angle: TAU * rng.random::<f64>(),
            },
        }
    }

    /// `P((S + x) hits region)`.
    pub fn hit_prob(&self, x: &[f64], region: &Region) -> HitProb {
        match self {
            Self::Disk { radius } => HitProb {
                value: radius.tail(region.distance(x)),
                closed_form: true,
            },
            Self::Ray => HitProb {
                value: match region {
                    Region::Disk(d) => {
                        hit_prob_poisson_line(&[x[0] - d.center[0], x[1] - d.center[1]], d.radius)
                    }
                    Region::Box(w) => ray_hit_prob_box(x, w),
                },
                closed_form: true,
            },
            Self::Segment { length, fatten } => HitProb {
                value: segment_hit_prob(x, *length, *fatten, region),
                closed_form: false,
            },
        }
    }

    /// Nonincreasing bound on the hit probability for germs at Chebyshev
    /// distance at least `d` from the bounding box of `region`.
    fn envelope(&self, d: f64, region: &Region) -> f64 {
        match self {
            Self::Disk { radius } => radius.tail(d),
            Self::Segment { length, fatten } => f64::from(d <= length + fatten),
            Self::Ray => {
                let b = region.bounding_box();
                let half: Vec<f64> = (0..2).map(|i| 0.5 * b.side(i)).collect();
                let circum = half[0].hypot(half[1]);
                let near = half[0].min(half[1]) + d;
                if circum >= near {
                    1.0
                } else {
                    (circum / near).asin() / PI
                }
            }
        }
    }

    fn truncation(&self, region: &Region, bound: f64) -> f64 {
        match self {
            Self::Disk { radius } => match *radius {
                RadiusLaw::Fixed { radius } => radius,
                RadiusLaw::Uniform { upper, .. } => upper,
                RadiusLaw::Exponential { rate } => {
                    let env = |d: f64| radius.tail(d);
                    truncation_by_envelope(&env, &region.bounding_box(), bound, 1.0 / rate)
                }
            },
            Self::Segment { length, fatten } => length + fatten,
            Self::Ray => f64::INFINITY,
        }
    }

    fn planar(&self) -> bool {
        !matches!(self, Self::Disk { .. })
    }
}

/// `P(R >= d(x, w))` for a disk grain centred at `x`.
pub fn hit_prob_disk_grain(x: &[f64], radius_law: &RadiusLaw, w: &Window) -> f64 {
    radius_law.tail(w.distance(x))
}

/// Probability that a ray from `x` with uniform direction hits the disk of
/// radius `r` at the origin: `arcsin(r / |x|) / pi` outside the disk.
pub fn hit_prob_poisson_line(x: &[f64], r: f64) -> f64 {
    let norm = x[0].hypot(x[1]);
    if norm < r {
        1.0
    } else {
        (r / norm).min(1.0).asin() / PI
    }
}

/// Angle subtended by the box at `x`, over `2 pi`.
fn ray_hit_prob_box(x: &[f64], w: &Window) -> f64 {
    if w.contains(x) {
        return 1.0;
    }
    let c = [0.5 * (w.lower()[0] + w.upper()[0]), 0.5 * (w.lower()[1] + w.upper()[1])];
    let base = (c[1] - x[1]).atan2(c[0] - x[0]);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for cx in [w.lower()[0], w.upper()[0]] {
        for cy in [w.lower()[1], w.upper()[1]] {
            let a = wrap_angle((cy - x[1]).atan2(cx - x[0]) - base);
            lo = lo.min(a);
            hi = hi.max(a);
        }
    }
    (hi - lo) / TAU
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Nearest point of the region to `x`.
fn nearest_point(x: &[f64], region: &Region) -> [f64; 2] {
    match region {
        Region::Box(w) => [x[0].clamp(w.lower()[0], w.upper()[0]), x[1].clamp(w.lower()[1], w.upper()[1])],
        Region::Disk(d) => {
            let (dx, dy) = (x[0] - d.center[0], x[1] - d.center[1]);
            let n = dx.hypot(dy);
            if n <= d.radius {
                [x[0], x[1]]
            } else {
                [d.center[0] + d.radius * dx / n, d.center[1] + d.radius * dy / n]
            }
        }
    }
}

/// Hit probability of a segment of length `len` from `x` with uniform
/// direction, fattened by `eps`.
///
/// The directions that hit form one arc around the direction of the
/// nearest point (directions into a convex set intersected with a ball);
/// its two ends are found by bisection to machine precision.
fn segment_hit_prob(x: &[f64], len: f64, eps: f64, region: &Region) -> f64 {
    let d = region.distance(x);
    if d <= eps {
        return 1.0;
    }
    if d > len + eps {
        return 0.0;
    }
    let near = nearest_point(x, region);
    let base = (near[1] - x[1]).atan2(near[0] - x[0]);
    let hits = |a: f64| {
        let end = [x[0] + len * a.cos(), x[1] + len * a.sin()];
        segment_region_distance([x[0], x[1]], end, region) <= eps
    };
    let edge = |sign: f64| {
        if hits(base + sign * PI) {
            return PI;
        }
        let (mut inside, mut outside) = (0.0, PI);
        for _ in 0..64 {
            let mid = 0.5 * (inside + outside);
            if hits(base + sign * mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    ((edge(1.0) + edge(-1.0)) / TAU).min(1.0)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * vx).hypot(p[1] - a[1] - t * vy)
}

/// Parameter range `[t0, t1]` of `a + t (b - a)` inside the box, `t` in `[0, t_max]`.
fn clip_param(a: [f64; 2], dir: [f64; 2], t_max: f64, w: &Window) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, t_max);
    for i in 0..2 {
        let (lo, hi) = (w.lower()[i], w.upper()[i]);
        if dir[i] == 0.0 {
            if a[i] < lo || a[i] > hi {
                return None;
            }
        } else {
            let (mut s0, mut s1) = ((lo - a[i]) / dir[i], (hi - a[i]) / dir[i]);
            if s0 > s1 {
                std::mem::swap(&mut s0, &mut s1);
            }
            t0 = t0.max(s0);
            t1 = t1.min(s1);
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

fn segment_region_distance(a: [f64; 2], b: [f64; 2], region: &Region) -> f64 {
    match region {
        Region::Disk(d) => (point_segment_distance(d.center, a, b) - d.radius).max(0.0),
        Region::Box(w) => {
            if clip_param(a, [b[0] - a[0], b[1] - a[1]], 1.0, w).is_some() {
                return 0.0;
            }
            // Disjoint convex polygons: the distance is attained at a vertex.
            let mut m = w.distance(&a).min(w.distance(&b));
            for cx in [w.lower()[0], w.upper()[0]] {
                for cy in [w.lower()[1], w.upper()[1]] {
                    m = m.min(point_segment_distance([cx, cy], a, b));
                }
            }
            m
        }
    }
}

fn ray_region_distance(o: [f64; 2], angle: f64, region: &Region) -> f64 {
    let dir = [angle.cos(), angle.sin()];
    match region {
        Region::Disk(d) => {
            let (px, py) = (d.center[0] - o[0], d.center[1] - o[1]);
            let t = (px * dir[0] + py * dir[1]).max(0.0);
            ((px - t * dir[0]).hypot(py - t * dir[1]) - d.radius).max(0.0)
        }
        Region::Box(w) => {
            let far = w.distance(&o) + w.side(0) + w.side(1) + 1.0;
            let end = [o[0] + far * dir[0], o[1] + far * dir[1]];
            segment_region_distance(o, end, region)
        }
    }
}

impl Grain {
    /// Whether the grain meets the closed region.
    pub fn intersects(&self, region: &Region) -> bool {
        match self {
            Grain::Disk { center, radius } => region.distance(center) <= *radius,
            Grain::Segment { start, end, fatten } => segment_region_distance(*start, *end, region) <= *fatten,
            Grain::Ray { origin, angle } => ray_region_distance(*origin, *angle, region) <= 0.0,
        }
    }

    /// Whether `y` lies in the grain.
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Grain::Disk { center, radius } => {
                center.iter().zip(y).map(|(c, v)| (c - v) * (c - v)).sum::<f64>() <= radius * radius
            }
            Grain::Segment { start, end, fatten } => point_segment_distance([y[0], y[1]], *start, *end) <= *fatten,
            Grain::Ray { origin, angle } => {
                let far = [origin[0] + angle.cos() * 1e12, origin[1] + angle.sin() * 1e12];
                point_segment_distance([y[0], y[1]], *origin, far) == 0.0
            }
        }
    }

    /// The part of a segment or ray inside `w`, as a segment. Disks are
    /// returned unchanged; their clip is the disk intersected with `w`.
    pub fn clip(&self, w: &Window) -> Option<Grain> {
        match self {
            Grain::Disk { center, radius } => (w.distance(center) <= *radius).then(|| self.clone()),
            Grain::Segment { start, end, fatten } => {
                let dir = [end[0] - start[0], end[1] - start[1]];
                let (t0, t1) = clip_param(*start, dir, 1.0, &w.buffered(*fatten))?;
                Some(Grain::Segment {
                    start: [start[0] + t0 * dir[0], start[1] + t0 * dir[1]],
                    end: [start[0] + t1 * dir[0], start[1] + t1 * dir[1]],
                    fatten: *fatten,
                })
            }
            Grain::Ray { origin, angle } => {
                let dir = [angle.cos(), angle.sin()];
                let (t0, t1) = clip_param(*origin, dir, f64::INFINITY, w)?;
                Some(Grain::Segment {
                    start: [origin[0] + t0 * dir[0], origin[1] + t0 * dir[1]],
                    end: [origin[0] + t1 * dir[0], origin[1] + t1 * dir[1]],
                    fatten: 0.0,
                })
            }
        }
    }
}

/// Grains hitting the target region, with their germs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanSample {
    pub region: Region,
    pub germs: Vec<Vec<f64>>,
    pub grains: Vec<Grain>,
}

impl BooleanSample {
    /// Coverage indicator `B(y)` on the region; `false` outside it.
    pub fn covers(&self, y: &[f64]) -> bool {
        self.region.contains(y) && self.grains.iter().any(|g| g.contains(y))
    }

    /// Fraction of `probes` that are covered.
    pub fn coverage_fraction(&self, probes: &[Vec<f64>]) -> f64 {
        if probes.is_empty() {
            return 0.0;
        }
        probes.iter().filter(|y| self.covers(y)).count() as f64 / probes.len() as f64
    }

    /// Grains clipped to the bounding box of the region.
    pub fn clipped(&self) -> Vec<Grain> {
        let b = self.region.bounding_box();
        self.grains.iter().filter_map(|g| g.clip(&b)).collect()
    }
}

/// Exact sample of the Boolean model restricted to `region`.
///
/// `support`, when given, is a box outside of which the germ intensity is
/// zero; ray grains need it, since otherwise infinitely many rays hit.
pub fn boolean_exact_sample(
    germ: &IntensityMeasureSpec,
    support: Option<&Window>,
    grains: &GrainDistribution,
    region: &Region,
    rng: &mut RngStream,
) -> Result<BooleanSample> {
    grains.validate()?;
    let bbox = region.bounding_box();
    if germ.dim() != bbox.dim() {
        return Err(Error::DimensionMismatch {
            expected: bbox.dim(),
            got: germ.dim(),
        });
    }
    if grains.planar() && bbox.dim() != 2 {
        return Err(Error::Incompatible("segment and ray grains live in the plane".into()));
    }
    let retention = |x: &[f64]| Ok(grains.hit_prob(x, region).value);
    let envelope = |d: f64| grains.envelope(d, region);
    let truncation = germ.bound().map_or(0.0, |b| grains.truncation(region, b));
    let germs = sample_thinned_germ(
        germ,
        &bbox,
        &GermThinning {
            retention: &retention,
            envelope: &envelope,
            truncation,
            support,
        },
        rng,
    )?;
    let mut out = Vec::with_capacity(germs.len());
    for (i, x) in germs.iter().enumerate() {
        let mut child = rng.child(i as u64);
        let p = grains.hit_prob(x, region).value;
        let (grain, _) = conditioned_by_rejection(x, Some(p), ATTEMPT_CAP, &mut child, |r| {
            let g = grains.sample_grain(x, r);
            let hit = g.intersects(region);
            Ok((g, hit))
        })?;
        out.push(grain);
    }
    Ok(BooleanSample {
        region: region.clone(),
        germs,
        grains: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Disk;

    #[test]
    fn disk_grain_examples() {
        let w = Window::unit(2).unwrap();
        let fixed = RadiusLaw::Fixed { radius: 1.0 };
        assert_eq!(hit_prob_disk_grain(&[0.5, 0.5], &fixed, &w), 1.0);
        assert_eq!(hit_prob_disk_grain(&[3.0, 0.5], &fixed, &w), 0.0);
        let exp = RadiusLaw::Exponential { rate: 1.0 };
        assert!((hit_prob_disk_grain(&[2.0, 0.5], &exp, &w) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn poisson_line_examples() {
        assert!((hit_prob_poisson_line(&[1.0, 0.0], 1.0) - 0.5).abs() < 1e-15);
        assert!((hit_prob_poisson_line(&[0.0, 2.0], 1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!(hit_prob_poisson_line(&[1e9, 0.0], 1.0) < 1e-9);
        assert_eq!(hit_prob_poisson_line(&[0.2, 0.1], 1.0), 1.0);
    }

    #[test]
    fn ray_box_probability_matches_angle() {
        // From (-1, 0.5) the unit square spans atan(0.5) above and below.
        let w = Window::unit(2).unwrap();
        let p = ray_hit_prob_box(&[-1.0, 0.5], &w);
        assert!((p - 2.0 * 0.5f64.atan() / TAU).abs() < 1e-14);
    }

    #[test]
    fn ray_hits_agree_with_probability() {
        let region = Region::Disk(Disk::new([0.0, 0.0], 1.0).unwrap());
        let x = [0.0, 3.0];
        let g = GrainDistribution::Ray;
        let mut rng = RngStream::new(2, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| g.sample_grain(&x, &mut rng).intersects(&region)).count();
        let p = g.hit_prob(&x, &region).value;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * sd);
    }

    #[test]
    fn segment_probability_is_monotone_in_fattening() {
        let region = Region::Box(Window::unit(2).unwrap());
        let x = [-0.5, 1.7];
        let exact = segment_hit_prob(&x, 1.5, 0.0, &region);
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let p = segment_hit_prob(&x, 1.5, eps, &region);
            assert!(p >= exact && p <= prev, "eps={eps}: {p} vs {exact}, prev {prev}");
            prev = p;
        }
        assert!(prev - exact < 5e-3);
    }

    #[test]
    fn segment_probability_matches_sampling() {
        let region = Region::Box(Window::unit(2).unwrap());
        let g = GrainDistribution::Segment { length: 1.2, fatten: 0.05 };
        let x = [1.6, -0.3];
        let mut rng = RngStream::new(5, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| g.sample_grain(&x, &mut rng).intersects(&region)).count();
        let p = g.hit_prob(&x, &region).value;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 4.0 * sd, "{} vs {p}", hits as f64 / n as f64);
    }

    #[test]
    fn envelope_bounds_hit_probability() {
        let regions = [
            Region::Box(Window::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap()),
            Region::Disk(Disk::new([0.0, 0.0], 1.0).unwrap()),
        ];
        let laws = [
            GrainDistribution::Ray,
            GrainDistribution::Segment { length: 0.7, fatten: 0.1 },
            GrainDistribution::Disk {
                radius: RadiusLaw::Exponential { rate: 2.0 },
            },
        ];
        let mut rng = RngStream::new(6, 0);
        for r in &regions {
            let b = r.bounding_box();
            for g in &laws {
                for _ in 0..2000 {
                    let x = [-4.0 + 8.0 * rng.random::<f64>(), -4.0 + 8.0 * rng.random::<f64>()];
                    let p = g.hit_prob(&x, r).value;
                    assert!(p <= g.envelope(b.linf_distance(&x), r) + 1e-12, "{g:?} {x:?}");
                }
            }
        }
    }

    #[test]
    fn zero_rate_gives_no_grains() {
        let germ = IntensityMeasureSpec::lebesgue(2, 0.0).unwrap();
        let g = GrainDistribution::Disk {
            radius: RadiusLaw::Fixed { radius: 0.5 },
        };
        let region = Region::Box(Window::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap());
        let s = boolean_exact_sample(&germ, None, &g, &region, &mut RngStream::new(1, 0)).unwrap();
        assert!(s.grains.is_empty());
        assert!(!s.covers(&[1.0, 1.0]));
    }

    #[test]
    fn unbounded_line_germ_diverges() {
        let germ = IntensityMeasureSpec::lebesgue(2, 1.0).unwrap();
        let region = Region::Disk(Disk::new([0.0, 0.0], 1.0).unwrap());
        let err = boolean_exact_sample(&germ, None, &GrainDistribution::Ray, &region, &mut RngStream::new(1, 0))
            .unwrap_err();
        assert!(matches!(err, Error::RetentionDiverges));
    }

    #[test]
    fn sampled_grains_all_hit() {
        let germ = IntensityMeasureSpec::lebesgue(2, 1.0).unwrap();
        let support = Window::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let region = Region::Disk(Disk::new([0.0, 0.0], 1.0).unwrap());
        let s = boolean_exact_sample(&germ, Some(&support), &GrainDistribution::Ray, &region, &mut RngStream::new(3, 0))
            .unwrap();
        assert!(!s.grains.is_empty());
        assert!(s.grains.iter().all(|g| g.intersects(&region)));
        assert!(s.germs.iter().all(|x| support.contains(x)));
    }

    #[test]
    fn ray_clip_is_inside_window() {
        let w = Window::unit(2).unwrap();
        let g = Grain::Ray {
            origin: [-1.0, 0.5],
            angle: 0.0,
        };
        assert_eq!(
            g.clip(&w),
            Some(Grain::Segment {
                start: [0.0, 0.5],
                end: [1.0, 0.5],
                fatten: 0.0
            })
        );
    }
}
