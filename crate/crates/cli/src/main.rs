//! `perfect-cluster`: run samplers from a TOML config, emit plot data and
//! run the validation tests.
//!
//! Exit codes: 0 success, 1 a validation test rejected, 2 the config is
//! invalid (or the plot kind does not fit it), 3 a sampler failed.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use perfect_cluster::config::{OutputFormat, Prepared, RunConfig, SampleOutput};
use perfect_cluster::hawkes::sample_gw_cluster;
use perfect_cluster::hawkes::KernelShape;
use perfect_cluster::validation::oracles::gw_extinction_times_exponential;
use perfect_cluster::validation::{holm, two_sample_ks, z_test, Estimate, TestReport, MIN_TEST_SAMPLE};
use perfect_cluster::{Error, PatternDocument, PatternMeta, RngStream};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable holding the worker count.
const WORKERS_ENV: &str = "PERFECT_CLUSTER_WORKERS";

#[derive(Parser)]
#[command(name = "perfect-cluster", version, about = "Exact sampling of cluster point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the configured replicates and write one pattern file per replicate.
    Sample {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the statistical checks available for the configured sampler.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Write CSV plot data to stdout or a file.
    Plotdata {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    #[value(name = "points-2d")]
    Points2d,
    CountsHistogram,
    SandwichCurves,
    CoverageRaster,
}

enum Failure {
    Config(String),
    Sampler(String),
    Rejected(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Rejected(_) => 1,
            Failure::Config(_) => 2,
            Failure::Sampler(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Sampler(m) | Failure::Rejected(m) => m,
        }
    }
}

fn sampler_failure(e: Error) -> Failure {
    Failure::Sampler(e.to_string())
}

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure::Sampler(format!("write failed: {e}"))
}

struct Loaded {
    prepared: Prepared,
    hash: String,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Config("config is not UTF-8".into()))?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let prepared = config
        .prepare()
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { prepared, hash })
}

fn draw(p: &Prepared, n: usize) -> Result<Vec<SampleOutput>, Failure> {
    (0..n as u64)
        .into_par_iter()
        .map(|k| p.sample(k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(sampler_failure)
}

fn run_sample(config: &Path, out: &Path) -> Result<(), Failure> {
    let Loaded { prepared, hash } = load(config)?;
    let outputs = draw(&prepared, prepared.config.replicates)?;
    fs::create_dir_all(out).map_err(io_failure)?;
    let format = prepared.config.output.format;
    for (k, o) in outputs.iter().enumerate() {
        let stem = out.join(format!("pattern_{k:06}"));
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let f = fs::File::create(stem.with_extension("csv")).map_err(io_failure)?;
            o.pattern.write_csv(io::BufWriter::new(f)).map_err(io_failure)?;
        }
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let meta = PatternMeta {
                seed: prepared.config.seed,
                stream_id: k as u64,
                sampler: prepared.name().to_string(),
                config_hash: hash.clone(),
                certificate: o.certificate.clone(),
            };
            let doc = PatternDocument::new(&o.pattern, meta);
            let text = serde_json::to_string_pretty(&doc).map_err(io_failure)?;
            fs::write(stem.with_extension("json"), text + "\n").map_err(io_failure)?;
        }
        if let Some(b) = &o.boolean {
            let text = serde_json::to_string_pretty(b).map_err(io_failure)?;
            fs::write(out.join(format!("grains_{k:06}.json")), text + "\n").map_err(io_failure)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationSummary<'a> {
    sampler: &'a str,
    config_hash: &'a str,
    alpha: f64,
    reports: Vec<TestReport>,
}

fn run_validate(config: &Path) -> Result<(), Failure> {
    let Loaded { prepared, hash } = load(config)?;
    let cfg = &prepared.config;
    let n = cfg.validation.replicates.unwrap_or(cfg.replicates);
    let alpha = cfg.validation.alpha;
    let w = prepared.count_window();
    let counts: Vec<f64> = draw(&prepared, n)?
        .iter()
        .map(|o| o.pattern.count_in(&w) as f64)
        .collect();
    let mut reports = Vec::new();
    if let Some(target) = prepared.expected_count() {
        let e = Estimate::from_samples(&counts, 3.0).map_err(|e| Failure::Config(e.to_string()))?;
        reports.push(z_test("mean-count", &e, target, alpha).with_seeds(vec![cfg.seed]));
    }
    if n >= MIN_TEST_SAMPLE {
        let oracle: Option<Vec<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|k| prepared.oracle(k).map(|r| r.map(|p| p.count_in(&w) as f64)))
            .collect::<Option<Result<Vec<_>, _>>>()
            .transpose()
            .map_err(sampler_failure)?;
        if let Some(o) = oracle {
            let r = two_sample_ks("counts-vs-oracle", &counts, &o, alpha).map_err(sampler_failure)?;
            reports.push(r.with_seeds(vec![cfg.seed]));
        }
    }
    holm(&mut reports, alpha);
    let summary = ValidationSummary {
        sampler: prepared.name(),
        config_hash: &hash,
        alpha,
        reports,
    };
    println!("{}", serde_json::to_string_pretty(&summary).map_err(io_failure)?);
    let rejected: Vec<&str> = summary.reports.iter().filter(|r| !r.accept).map(|r| r.name.as_str()).collect();
    if rejected.is_empty() {
        Ok(())
    } else {
        Err(Failure::Rejected(format!("rejected: {}", rejected.join(", "))))
    }
}

fn plot_rows(prepared: &Prepared, kind: PlotKind) -> Result<String, Failure> {
    let mut s = String::new();
    let incompatible = |what: &str| Failure::Config(format!("plot kind {what} does not fit sampler {}", prepared.name()));
    match kind {
        PlotKind::Points2d => {
            s.push_str("replicate,x1,x2\n");
            for (k, o) in draw(prepared, prepared.config.replicates)?.iter().enumerate() {
                if o.pattern.dim() != 2 {
                    return Err(incompatible("points-2d"));
                }
                for x in o.pattern.iter() {
                    s.push_str(&format!("{k},{},{}\n", x[0], x[1]));
                }
            }
        }
        PlotKind::CountsHistogram => {
            let w = prepared.count_window();
            let outs = draw(prepared, prepared.config.replicates)?;
            let counts: Vec<usize> = outs.iter().map(|o| o.pattern.count_in(&w)).collect();
            let top = counts.iter().copied().max().unwrap_or(0);
            let mut hist = vec![0usize; top + 1];
            for c in &counts {
                hist[*c] += 1;
            }
            s.push_str("count,frequency\n");
            for (c, f) in hist.iter().enumerate() {
                s.push_str(&format!("{c},{}\n", *f as f64 / counts.len() as f64));
            }
        }
        PlotKind::SandwichCurves => {
            let sampler = prepared.hawkes_sampler().ok_or_else(|| incompatible("sandwich-curves"))?;
            let pair = sampler.level(0, 0.0).map_err(sampler_failure)?;
            let kernel = sampler.kernel();
            let mut rng = RngStream::new(prepared.config.seed, u64::MAX);
            let reps = 20_000;
            let mut ls: Vec<f64> = match kernel.components() {
                [(_, KernelShape::Exponential { beta, gamma })] => {
                    gw_extinction_times_exponential(*beta, *gamma, reps, &mut rng)
                }
                _ => (0..reps)
                    .map(|_| sample_gw_cluster(kernel, 0.0, &mut rng).map(|c| c.extinction_time()))
                    .collect::<Result<_, _>>()
                    .map_err(sampler_failure)?,
            };
            ls.sort_by(f64::total_cmp);
            let (lo, hi) = (pair.tail_lower(), pair.tail_upper());
            let stride = (lo.len() / 400).max(1);
            s.push_str("t,l_n,u_n,oracle_tail\n");
            for i in (0..lo.len()).step_by(stride) {
                let t = pair.grid.node(i);
                let above = ls.len() - ls.partition_point(|&l| l <= t);
                s.push_str(&format!("{t},{},{},{}\n", lo[i], hi[i], above as f64 / reps as f64));
            }
        }
        PlotKind::CoverageRaster => {
            let out = prepared.sample(0).map_err(sampler_failure)?;
            let b = out.boolean.ok_or_else(|| incompatible("coverage-raster"))?;
            let bbox = b.region.bounding_box();
            if bbox.dim() != 2 {
                return Err(incompatible("coverage-raster"));
            }
            let n = 100;
            s.push_str("x,y,covered\n");
            for i in 0..n {
                for j in 0..n {
                    let x = bbox.lower()[0] + (i as f64 + 0.5) / n as f64 * bbox.side(0);
                    let y = bbox.lower()[1] + (j as f64 + 0.5) / n as f64 * bbox.side(1);
                    s.push_str(&format!("{x},{y},{}\n", u8::from(b.covers(&[x, y]))));
                }
            }
        }
    }
    Ok(s)
}

fn run_plotdata(config: &Path, kind: PlotKind, out: Option<&Path>) -> Result<(), Failure> {
    let Loaded { prepared, .. } = load(config)?;
    let text = plot_rows(&prepared, kind)?;
    match out {
        Some(p) => fs::write(p, text).map_err(io_failure),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_failure),
    }
}

fn configure_workers() -> Result<(), Failure> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_workers().and_then(|()| match &cli.command {
        Command::Sample { config, out } => run_sample(config, out),
        Command::Validate { config } => run_validate(config),
        Command::Plotdata { config, kind, out } => run_plotdata(config, *kind, out.as_deref()),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
