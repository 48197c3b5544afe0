//! Acceptance suite: one line per criterion, all hypothesis tests adjusted
//! together with Holm at family level 5%.
//!
//! Run with `cargo test -p perfect-cluster --test acceptance -- --nocapture`
//! to see the report.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use perfect_cluster::boolean::{boolean_exact_sample, GrainDistribution, RadiusLaw};
use perfect_cluster::branching::{approx_branching_sample, certificate_generations_for};
use perfect_cluster::cluster::{brix_kendall_sample, CoxClusterKernel};
use perfect_cluster::config::RunConfig;
use perfect_cluster::germ::{matern_thin_first, renewal_thin_first, thin_grid, GridThinningSpec, RenewalSpec, SequenceFamily};
use perfect_cluster::hawkes::{phi_apply, BoundPair, FertilityKernel, Grid, KernelShape, MrOptions, MrSampler, Rounding};
use perfect_cluster::hawkes::default_g;
use perfect_cluster::poisson::FnDensity;
use perfect_cluster::quadrature::integrate_box;
use perfect_cluster::validation::oracles;
use perfect_cluster::validation::{
    chi_square, count_histogram_distance, empirical_laplace, holm, two_sample_ks, Estimate, TestReport,
};
use perfect_cluster::{Disk, IntensityMeasureSpec, PatternDocument, PatternMeta, PointPattern, Region, RngStream, Window};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

const ALPHA: f64 = 0.05;

struct Criterion {
    id: &'static str,
    ok: bool,
    detail: String,
    /// Indices into the shared list of hypothesis tests.
    tests: Vec<usize>,
}

#[derive(Default)]
struct Suite {
    criteria: Vec<Criterion>,
    tests: Vec<TestReport>,
}

impl Suite {
    fn test(&mut self, r: TestReport) -> usize {
        self.tests.push(r);
        self.tests.len() - 1
    }

    fn record(&mut self, id: &'static str, ok: bool, detail: String, tests: Vec<usize>) {
        self.criteria.push(Criterion { id, ok, detail, tests });
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn counts(ps: &[PointPattern]) -> Vec<f64> {
    ps.iter().map(|p| p.len() as f64).collect()
}

fn uniform_cox() -> CoxClusterKernel {
    CoxClusterKernel::uniform(2.0, vec![-1.0], vec![1.0]).unwrap()
}

/// AC-1 to AC-3: Cox cluster process with uniform displacements on a line.
fn cox_cluster(s: &mut Suite) {
    let reps = 10_000;
    let w = Window::interval(0.0, 10.0).unwrap();
    let germ = IntensityMeasureSpec::lebesgue(1, 1.0).unwrap();
    let k = uniform_cox();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let exact: Vec<PointPattern> = pool.install(|| {
        (0..reps)
            .map(|r| brix_kendall_sample(&germ, &k, &w, &mut RngStream::new(101, r)).unwrap())
            .collect()
    });
    let secs = start.elapsed().as_secs_f64();
    let (m, sd) = mean_sd(&counts(&exact));
    let se = sd / (reps as f64).sqrt();
    s.record(
        "AC-1",
        (m - 20.0).abs() <= 3.0 * se && secs < 60.0,
        format!("mean count {m:.4} vs 20 (3 se = {:.4}), {reps} replicates in {secs:.2} s on one thread", 3.0 * se),
        vec![],
    );

    let oracle: Vec<PointPattern> = (0..reps)
        .into_par_iter()
        .map(|r| oracles::buffered_cox_uniform(1.0, 2.0, &[-1.0], &[1.0], &w, &mut RngStream::new(102, r)).unwrap())
        .collect();
    let t = s.test(two_sample_ks("AC-2 counts", &counts(&exact), &counts(&oracle), ALPHA).unwrap());
    s.record("AC-2", true, format!("KS p = {:.4}", s.tests[t].p_value), vec![t]);

    let cs = [0.1, 1.0, 10.0];
    let le = empirical_laplace(&exact, &w, &cs, 3.0).unwrap();
    let lo = empirical_laplace(&oracle, &w, &cs, 3.0).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for ((c, a), b) in cs.iter().zip(&le).zip(&lo) {
        let d = (a.value - b.value).abs();
        let allowed = a.half_width() + b.half_width();
        ok &= d <= allowed;
        parts.push(format!("c={c}: |diff| {d:.2e} <= {allowed:.2e}"));
    }
    s.record("AC-3", ok, parts.join("; "), vec![]);
}

/// AC-4: stationary disk Boolean model on a box.
fn boolean_disks(s: &mut Suite) {
    let reps = 2000u64;
    let side = 10.0;
    let region = Region::Box(Window::new(vec![0.0, 0.0], vec![side, side]).unwrap());
    let germ = IntensityMeasureSpec::lebesgue(2, 1.0).unwrap();
    let grains = GrainDistribution::Disk {
        radius: RadiusLaw::Fixed { radius: 0.5 },
    };
    let n = 50;
    let probes: Vec<Vec<f64>> = (0..n * n)
        .map(|i| vec![((i / n) as f64 + 0.5) * side / n as f64, ((i % n) as f64 + 0.5) * side / n as f64])
        .collect();
    let strip = |lo: f64, hi: f64| -> Vec<Vec<f64>> { probes.iter().filter(|p| (lo..hi).contains(&p[0])).cloned().collect() };
    let (centre, edge) = (strip(4.5, 5.5), strip(0.0, 1.0));
    let rows: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let b = boolean_exact_sample(&germ, None, &grains, &region, &mut RngStream::new(401, r)).unwrap();
            (b.coverage_fraction(&probes), b.coverage_fraction(&centre) - b.coverage_fraction(&edge))
        })
        .collect();
    let cover: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let target = 1.0 - (-std::f64::consts::PI * 0.25f64).exp();
    let (m, _) = mean_sd(&cover);
    let (dm, dsd) = mean_sd(&diff);
    let ci = 1.96 * dsd / (reps as f64).sqrt();
    s.record(
        "AC-4",
        (m - target).abs() <= 0.01 && dm.abs() < 2.0 * ci,
        format!("coverage {m:.4} vs {target:.4} (tol 0.01); centre - edge strip {dm:.4} (2 CI = {:.4})", 2.0 * ci),
        vec![],
    );
}

/// AC-5: ray grains hitting a disk, germ supported on a box.
fn rays(s: &mut Suite) {
    let reps = 10_000u64;
    let support = Window::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
    let radius = 1.0;
    let region = Region::Disk(Disk::new([0.0, 0.0], radius).unwrap());
    let germ = IntensityMeasureSpec::lebesgue(2, 1.0).unwrap();
    let kept: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let b = boolean_exact_sample(&germ, Some(&support), &GrainDistribution::Ray, &region, &mut RngStream::new(501, r))
                .unwrap();
            b.germs.len() as f64
        })
        .collect();
    let hit = |x: &[f64]| {
        let d = x[0].hypot(x[1]);
        if d <= radius {
            1.0
        } else {
            (radius / d).asin() / std::f64::consts::PI
        }
    };
    let expected = integrate_box(hit, support.lower(), support.upper(), 1e-7).value;
    let (m, sd) = mean_sd(&kept);
    let se = sd / (reps as f64).sqrt();
    s.record(
        "AC-5",
        (m - expected).abs() <= 3.0 * se,
        format!("retained germs {m:.4} vs quadrature {expected:.4} (3 se = {:.4})", 3.0 * se),
        vec![],
    );
}

/// AC-6: grid thinning with two sites of probability one half.
fn grid(s: &mut Suite) {
    let reps = 10_000u64;
    let spec = GridThinningSpec::new(SequenceFamily::Table { values: vec![0.5, 0.5] }).unwrap();
    let mut observed = [0u64; 4];
    for r in 0..reps {
        let kept = thin_grid(&spec, &mut RngStream::new(601, r)).unwrap();
        let idx = kept.iter().fold(0usize, |acc, &k| acc | (1 << k));
        observed[idx] += 1;
    }
    let t = s.test(chi_square("AC-6 subsets", &observed, &[0.25; 4], ALPHA).unwrap());
    let mut worst: f64 = 0.0;
    for (fam, max_n) in [
        (SequenceFamily::Table { values: vec![0.5, 0.5] }, 2),
        (SequenceFamily::ExpGeometric { scale: 1.0, ratio: 0.5 }, 200),
    ] {
        let (pmf, empty) = GridThinningSpec::new(fam).unwrap().last_point_pmf(max_n).unwrap();
        worst = worst.max((pmf.iter().sum::<f64>() + empty - 1.0).abs());
    }
    s.record(
        "AC-6",
        worst <= 1e-12,
        format!("subset counts {observed:?}, chi2 p = {:.4}; |sum pmf - 1| = {worst:.1e}", s.tests[t].p_value),
        vec![t],
    );
}

/// AC-7: renewal thin-first against thin-after.
fn renewal(s: &mut Suite) {
    let reps = 100_000u64;
    let spec = RenewalSpec::gamma2(1.0).unwrap();
    let retain = FnDensity::with_tail(|t: f64| (-t).exp(), |t: f64| (-t).exp(), 40.0);
    let first: Vec<PointPattern> = (0..reps)
        .into_par_iter()
        .map(|r| renewal_thin_first(&spec, &retain, &mut RngStream::new(701, r)).unwrap())
        .collect();
    let after: Vec<PointPattern> = (0..reps)
        .into_par_iter()
        .map(|r| oracles::renewal_gamma2_thin_after(1.0, &|t| (-t).exp(), 40.0, &mut RngStream::new(702, r)).unwrap())
        .collect();
    let earliest = |ps: &[PointPattern]| -> Vec<f64> { ps.iter().filter(|p| !p.is_empty()).map(|p| p.point(0)[0]).collect() };
    let a = s.test(two_sample_ks("AC-7 counts", &counts(&first), &counts(&after), ALPHA).unwrap());
    let b = s.test(two_sample_ks("AC-7 first point", &earliest(&first), &earliest(&after), ALPHA).unwrap());
    s.record(
        "AC-7",
        true,
        format!("KS counts p = {:.4}, first point p = {:.4}", s.tests[a].p_value, s.tests[b].p_value),
        vec![a, b],
    );
}

/// AC-8: Matérn hard-core, thin-first with p = 1 against the direct construction.
fn matern(s: &mut Suite) {
    let reps = 4000u64;
    let (rate, r) = (4.0, 0.2);
    let w = Window::new(vec![0.0, 0.0], vec![3.0, 3.0]).unwrap();
    let inside = |x: &[f64]| if w.contains(x) { 1.0 } else { 0.0 };
    let first: Vec<PointPattern> = (0..reps)
        .into_par_iter()
        .map(|k| matern_thin_first(rate, r, &inside, &w, &mut RngStream::new(801, k)).unwrap())
        .collect();
    let direct: Vec<PointPattern> = (0..reps)
        .into_par_iter()
        .map(|k| oracles::matern_direct(rate, r, &w, &mut RngStream::new(802, k)).unwrap())
        .collect();
    // One summary per replicate keeps the KS samples independent.
    let nn = |ps: &[PointPattern]| -> Vec<f64> {
        ps.iter()
            .filter(|p| p.len() >= 2)
            .map(|p| {
                let d = p.nearest_neighbour_distances();
                d.iter().sum::<f64>() / d.len() as f64
            })
            .collect()
    };
    let min_nn = first
        .iter()
        .flat_map(|p| p.nearest_neighbour_distances())
        .fold(f64::INFINITY, f64::min);
    let a = s.test(two_sample_ks("AC-8 counts", &counts(&first), &counts(&direct), ALPHA).unwrap());
    let b = s.test(two_sample_ks("AC-8 mean nn distance", &nn(&first), &nn(&direct), ALPHA).unwrap());
    s.record(
        "AC-8",
        min_nn > r,
        format!(
            "KS counts p = {:.4}, nn p = {:.4}; smallest nn distance {min_nn:.4} > r",
            s.tests[a].p_value, s.tests[b].p_value
        ),
        vec![a, b],
    );
}

fn random_kernel(rng: &mut RngStream) -> FertilityKernel {
    let parts = rng.random_range(1..=3);
    let rho = rng.random_range(0.05..0.95);
    let comps: Vec<(f64, KernelShape)> = (0..parts)
        .map(|_| {
            let gamma = rng.random_range(0.3..3.0);
            let shape = match rng.random_range(0..2) {
                0 => KernelShape::Exponential { beta: rho * gamma, gamma },
                _ => {
                    let support = rng.random_range(0.5..4.0);
                    let power = rng.random_range(0..3u32);
                    KernelShape::Polynomial {
                        beta: rho * (power + 1) as f64 / support,
                        support,
                        power,
                    }
                }
            };
            (1.0 / parts as f64, shape)
        })
        .collect();
    FertilityKernel::mixture(comps).unwrap()
}

fn random_cdf(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// AC-9: the discretised operators contract at rate rho.
fn contraction(s: &mut Suite) {
    let mut rng = RngStream::new(901, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let k = random_kernel(&mut rng);
        let rho = k.branching_ratio();
        let dt = rng.random_range(0.01..0.2);
        let n = rng.random_range(20..400);
        let (f, g) = (random_cdf(n, &mut rng), random_cdf(n, &mut rng));
        let dist = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        for rounding in [Rounding::Down, Rounding::Up, Rounding::Nearest] {
            let pf = phi_apply(&f, &k, dt, rounding).unwrap();
            let pg = phi_apply(&g, &k, dt, rounding).unwrap();
            let d = pf.iter().zip(&pg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(d - rho * dist);
        }
    }
    s.record(
        "AC-9",
        worst <= 1e-12,
        format!("max of |Phi f - Phi g| - rho |f - g| over 100 pairs: {worst:.2e} (tol 1e-12)"),
        vec![],
    );
}

/// AC-10: geometric convergence of both sequences and a Monte Carlo tail
/// inside the bracket.
fn sandwich(s: &mut Suite) {
    let (beta, gamma) = (0.5, 1.0);
    let rho = beta / gamma;
    let k = FertilityKernel::exponential(beta, gamma).unwrap();
    let dt = 0.05;
    let grid = Grid::new(dt, 30.0).unwrap();
    let g = default_g(&k, dt);
    let mut pair = BoundPair::start(&k, &g, grid, k.decay_rate(dt)).unwrap();
    let (res_l, res_u) = pair.initial_residuals;
    let mut history = vec![(pair.cdf_lower.clone(), pair.cdf_upper.clone())];
    let steps = 60;
    for _ in 0..steps {
        pair.step(&k).unwrap();
        history.push((pair.cdf_lower.clone(), pair.cdf_upper.clone()));
    }
    let mut limit = pair.clone();
    limit.converge(&k, 2000).unwrap();
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let mut excess = f64::NEG_INFINITY;
    for (n, (lo, hi)) in history.iter().enumerate() {
        let factor = rho.powi(n as i32) / (1.0 - rho);
        excess = excess.max(sup(lo, &limit.cdf_lower) - factor * res_l);
        excess = excess.max(sup(hi, &limit.cdf_upper) - factor * res_u);
    }

    let reps = 1_000_000;
    let mut times = oracles::gw_extinction_times_exponential(beta, gamma, reps, &mut RngStream::new(1001, 0));
    times.sort_by(f64::total_cmp);
    let (lo, hi) = (pair.tail_lower(), pair.tail_upper());
    let nodes = lo.len();
    let z = Normal::standard().inverse_cdf(1.0 - ALPHA / (2.0 * nodes as f64));
    let mut outside = 0;
    for i in 0..nodes {
        let t = grid.node(i);
        let p = (reps - times.partition_point(|&l| l <= t)) as f64 / reps as f64;
        // Binomial spread evaluated at the bracket edge being tested.
        let slack = |q: f64| z * (q * (1.0 - q) / reps as f64).sqrt();
        if p < lo[i] - slack(lo[i]) || p > hi[i] + slack(hi[i]) {
            outside += 1;
        }
    }
    s.record(
        "AC-10",
        excess <= 1e-12 && outside == 0,
        format!(
            "max excess over rho^n/(1-rho) residual bound in {steps} steps: {excess:.2e}; \
             gap after {steps}: {:.2e}; MC tail outside bracket at {outside} of {nodes} nodes (z = {z:.2})",
            pair.gap()
        ),
        vec![],
    );
}

/// AC-11: dominated-CFTP Hawkes sampler against mean and a burn-in oracle.
fn hawkes(s: &mut Suite) {
    let reps = 10_000u64;
    let (mu, beta, gamma, a) = (1.0, 0.5, 1.0, 10.0);
    let sampler = MrSampler::new(
        FertilityKernel::exponential(beta, gamma).unwrap(),
        IntensityMeasureSpec::lebesgue(1, mu).unwrap(),
        a,
        MrOptions::default(),
    )
    .unwrap();
    let exact: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| sampler.sample(&mut RngStream::new(1101, r)).unwrap().pattern.len() as f64)
        .collect();
    let burn = 60.0 / (gamma - beta);
    let oracle: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            oracles::hawkes_exponential_burn_in(mu, beta, gamma, a, burn, &mut RngStream::new(1102, r))
                .unwrap()
                .len() as f64
        })
        .collect();
    let e = Estimate::from_samples(&exact, 3.0).unwrap();
    let target = mu * a / (1.0 - beta / gamma);
    let t = s.test(two_sample_ks("AC-11 counts", &exact, &oracle, ALPHA).unwrap());
    s.record(
        "AC-11",
        e.contains(target),
        format!(
            "mean count {:.4} vs {target} (3 se = {:.4}); KS vs burn-in p = {:.4}",
            e.value,
            e.half_width(),
            s.tests[t].p_value
        ),
        vec![t],
    );
}

/// AC-12: truncation at the certified generation count.
fn branching(s: &mut Suite) {
    let reps = 10_000u64;
    let w = Window::interval(0.0, 1.0).unwrap();
    let k = CoxClusterKernel::uniform(0.5, vec![-1.0], vec![1.0]).unwrap();
    let n = certificate_generations_for(0.25, 1.0, 0.5, w.volume()).unwrap();
    let run = |gens: u32, seed: u64| -> (Vec<usize>, f64) {
        let out: Vec<(usize, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let (p, c) = approx_branching_sample(1.0, &k, &w, gens, &mut RngStream::new(seed, r)).unwrap();
                (p.len(), c.bound)
            })
            .collect();
        (out.iter().map(|o| o.0).collect(), out[0].1)
    };
    let (short, bound) = run(n, 1201);
    let (long, long_bound) = run(40, 1202);
    let d = count_histogram_distance(&short, &long).unwrap();
    let ci = 1.96 * d.stderr;
    s.record(
        "AC-12",
        n == 3 && bound <= 0.25 && d.total_variation <= 0.25 + 2.0 * ci,
        format!(
            "n = {n}, certificate {bound}; plug-in variation distance to n = 40 (certificate {long_bound:.1e}): {:.4} <= 0.25 + {:.4}",
            d.total_variation,
            2.0 * ci
        ),
        vec![],
    );
}

fn render(cfg: &RunConfig) -> Vec<u8> {
    let prepared = cfg.prepare().unwrap();
    let mut bytes = Vec::new();
    for k in 0..cfg.replicates as u64 {
        let out = prepared.sample(k).unwrap();
        out.pattern.write_csv(&mut bytes).unwrap();
        let meta = PatternMeta {
            seed: cfg.seed,
            stream_id: k,
            sampler: prepared.name().to_string(),
            config_hash: String::new(),
            certificate: out.certificate.clone(),
        };
        bytes.extend(serde_json::to_vec(&PatternDocument::new(&out.pattern, meta)).unwrap());
        if let Some(b) = &out.boolean {
            bytes.extend(serde_json::to_vec(b).unwrap());
        }
    }
    bytes
}

/// AC-13: every demo configuration reproduces byte for byte.
fn determinism(s: &mut Suite) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut differing = Vec::new();
    for p in &paths {
        let cfg: RunConfig = toml::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        if render(&cfg) != render(&cfg) {
            differing.push(p.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    s.record(
        "AC-13",
        !paths.is_empty() && differing.is_empty(),
        format!("{} demo configs rerun, differing: {differing:?}", paths.len()),
        vec![],
    );
}

#[test]
fn acceptance_criteria() {
    let mut s = Suite::default();
    cox_cluster(&mut s);
    boolean_disks(&mut s);
    rays(&mut s);
    grid(&mut s);
    renewal(&mut s);
    matern(&mut s);
    contraction(&mut s);
    sandwich(&mut s);
    hawkes(&mut s);
    branching(&mut s);
    determinism(&mut s);

    holm(&mut s.tests, ALPHA);
    let mut failed = Vec::new();
    let mut report = String::new();
    for c in &s.criteria {
        let ok = c.ok && c.tests.iter().all(|&i| s.tests[i].accept);
        if !ok {
            failed.push(c.id);
        }
        let verdict = if ok { "PASS" } else { "FAIL" };
        report.push_str(&format!("{} {verdict}: {}\n", c.id, c.detail));
    }
    for t in &s.tests {
        let decision = if t.accept { "accept" } else { "reject" };
        report.push_str(&format!(
            "  holm {}: p = {:.4}, level {:.4}, {decision}\n",
            t.name, t.p_value, t.threshold
        ));
    }
    // Straight to stdout so the report shows without --nocapture.
    let mut out = std::io::stdout().lock();
    out.write_all(report.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
