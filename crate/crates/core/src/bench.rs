//! Timing of the objective over a grid of problem sizes, used to check that
//! one optimizer iteration costs `O(K·M·N)`.

use std::time::Instant;

use serde::Serialize;

use crate::clf::ClfParams;
use crate::dataset::{generate_synthetic, Shape, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gmm::kmeans_init;
use crate::learn::{fit, LearnConfig, Problem};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    /// State dimensions; 2 (planar) and 3 (planar + heading) are supported.
    pub ds: Vec<usize>,
    pub demos: usize,
    pub reps: usize,
    pub seed: u64,
    /// Also time a complete fit for every combination.
    pub full_fit: bool,
    /// Minimum wall time spent per objective measurement.
    pub min_seconds: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ks: vec![4, 8],
            ns: vec![100, 200],
            ds: vec![2],
            demos: 3,
            reps: 1,
            seed: 1,
            full_fit: false,
            min_seconds: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub rep: usize,
    pub kmn: usize,
    /// Seconds per single-threaded objective evaluation.
    pub objective_seconds: f64,
    pub fit_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub tool_version: String,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub machine: MachineInfo,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log(objective time) against log(K·M·N).
    pub slope: f64,
}

fn time_objective(problem: &Problem, k: usize, seed: u64, min_seconds: f64) -> Result<f64> {
    let layout = problem.objective.layout();
    let gmm = kmeans_init(&problem.data.joint_points(), k, seed)?;
    let clf = ClfParams::init_identity(layout.dim, layout.l);
    let theta = layout.encode(&gmm, &clf)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| {
        std::hint::black_box(problem.objective.value(&theta));
        let start = Instant::now();
        let mut evals = 0usize;
        while evals < 3 || start.elapsed().as_secs_f64() < min_seconds {
            std::hint::black_box(problem.objective.value(&theta));
            evals += 1;
        }
        start.elapsed().as_secs_f64() / evals as f64
    }))
}

/// Least-squares slope of `y` against `x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.ks.is_empty() || cfg.ns.is_empty() || cfg.ds.is_empty() || cfg.reps == 0 {
        return Err(Error::InvalidConfig("benchmark grid is empty".into()));
    }
    let mut rows = Vec::new();
    for &d in &cfg.ds {
        let heading = match d {
            2 => false,
            3 => true,
            _ => return Err(Error::InvalidConfig(format!("benchmark supports d = 2 or 3, got {d}"))),
        };
        for &n in &cfg.ns {
            let spec = SyntheticSpec::new(Shape::SCurve, cfg.demos, n, 0.5, cfg.seed).with_heading(heading);
            let data = generate_synthetic(&spec)?;
            for &k in &cfg.ks {
                let learn = LearnConfig::new(k, 1, cfg.seed);
                let problem = Problem::new(&data, &learn)?;
                for rep in 0..cfg.reps {
                    let objective_seconds = time_objective(&problem, k, cfg.seed, cfg.min_seconds)?;
                    let fit_seconds = if cfg.full_fit {
                        let start = Instant::now();
                        fit(&data, &learn)?;
                        Some(start.elapsed().as_secs_f64())
                    } else {
                        None
                    };
                    rows.push(BenchRow {
                        k,
                        n,
                        m: cfg.demos,
                        d,
                        rep,
                        kmn: k * cfg.demos * n,
                        objective_seconds,
                        fit_seconds,
                    });
                }
            }
        }
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.kmn as f64, r.objective_seconds))
        .collect();
    let distinct = {
        let mut k: Vec<usize> = rows.iter().map(|r| r.kmn).collect();
        k.sort_unstable();
        k.dedup();
        k.len()
    };
    let slope = if distinct >= 2 { log_log_slope(&pts) } else { f64::NAN };
    Ok(BenchReport {
        machine: MachineInfo::current(),
        rows,
        slope,
    })
}
