//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line; the process exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use stable_lfd::clf::ClfParams;
use stable_lfd::controller::ControllerConfig;
use stable_lfd::dataset::{Dataset, Demonstration, Shape, SyntheticSpec, PreprocessConfig, preprocess, synthetic_trajectories};
use stable_lfd::gmm::{fit_em, EmConfig, GaussianComponent, GmmModel};
use stable_lfd::gmr::GmrCache;
use stable_lfd::learn::{fit, LearnConfig, Objective, ThetaLayout};
use stable_lfd::linalg::Matrix;
use stable_lfd::metrics::{sea, sea_with_resolution, tetragon_area};
use stable_lfd::model::StableModel;
use stable_lfd::sim::{rollout, streamline_bundle, Disturbance, LocalizedMode, RolloutConfig, RolloutTrace};

const BIN: &str = env!("CARGO_BIN_EXE_stable-lfd");

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

struct Fitted {
    data: Dataset,
    model: StableModel,
    seconds: f64,
}

fn fit_synthetic(spec: &SyntheticSpec, cfg: &LearnConfig, polar: bool) -> Fitted {
    let trajs = synthetic_trajectories(spec).expect("synthetic data");
    let pre = PreprocessConfig {
        polar,
        ..Default::default()
    };
    let data = preprocess(&trajs, &pre).expect("preprocess");
    let start = Instant::now();
    let model = fit(&data, cfg).expect("fit");
    Fitted {
        data,
        model,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ------------------------------------------------------------------ 1

fn em_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let means = [vec![0.0, 0.0, 0.0, 0.0], vec![2.0, 1.5, -1.0, 1.5]];
    let factors = [
        Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.3, 0.7, 0.0, 0.0],
            vec![0.0, 0.2, 0.9, 0.0],
            vec![0.1, 0.0, 0.3, 0.6],
        ])
        .unwrap(),
        Matrix::from_rows(&[
            vec![0.8, 0.0, 0.0, 0.0],
            vec![-0.2, 0.9, 0.0, 0.0],
            vec![0.1, 0.1, 0.7, 0.0],
            vec![0.0, 0.4, -0.1, 1.0],
        ])
        .unwrap(),
    ];
    let data: Vec<Vec<f64>> = (0..2000)
        .map(|_| {
            let k = usize::from(rng.random::<f64>() < 0.6);
            let z: Vec<f64> = (0..4).map(|_| gaussian(&mut rng)).collect();
            let lz = factors[k].mul_vec(&z);
            means[k].iter().zip(lz).map(|(m, e)| m + e).collect()
        })
        .collect();
    let cfg = EmConfig {
        tol: 1e-10,
        ..EmConfig::new(2, 7)
    };
    let (model, report) = fit_em(&data, &cfg).map_err(|e| e.to_string())?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let m = &model.components;
    let direct = dist(&m[0].mean, &means[0]).max(dist(&m[1].mean, &means[1]));
    let swapped = dist(&m[0].mean, &means[1]).max(dist(&m[1].mean, &means[0]));
    let err = direct.min(swapped);
    ensure!(err < 0.3, "mean error {err:.4} ≥ 0.3");
    let worst = report
        .loglik_history
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::NEG_INFINITY, f64::max);
    ensure!(worst <= 1e-9, "log-likelihood decreased by {worst:e}");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2} s");
    Ok(format!(
        "max mean error {err:.4}, {} EM iterations, largest loglik drop {worst:.2e}, {secs:.2} s",
        report.iterations
    ))
}

// ------------------------------------------------------------------ 2

fn gmr_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = Matrix::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
    let cov = a.gram().add_diagonal(0.5);
    let mean: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
    let gmm = GmmModel::new(
        2,
        vec![GaussianComponent {
            prior: 1.0,
            mean: mean.clone(),
            cov: cov.clone(),
        }],
    )
    .unwrap();
    let cache = GmrCache::new(&gmm).map_err(|e| e.to_string())?;
    // Explicit 2×2 inverse of the state block.
    let (s00, s01, s11) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = s00 * s11 - s01 * s01;
    let inv = [[s11 / det, -s01 / det], [-s01 / det, s00 / det]];
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
        let dx = [x[0] - mean[0], x[1] - mean[1]];
        let w = [
            inv[0][0] * dx[0] + inv[0][1] * dx[1],
            inv[1][0] * dx[0] + inv[1][1] * dx[1],
        ];
        let oracle: Vec<f64> = (0..2)
            .map(|i| mean[2 + i] + cov[(2 + i, 0)] * w[0] + cov[(2 + i, 1)] * w[1])
            .collect();
        let got = cache.estimate(&x);
        let num = ((got[0] - oracle[0]).powi(2) + (got[1] - oracle[1]).powi(2)).sqrt();
        let den = (oracle[0].powi(2) + oracle[1].powi(2)).sqrt().max(1e-300);
        worst = worst.max(num / den);
    }
    ensure!(worst < 1e-10, "relative error {worst:e}");
    Ok(format!("worst relative error {worst:.2e} over 100 points"))
}

// ------------------------------------------------------------------ 3

fn random_clf(rng: &mut ChaCha8Rng, d: usize, l: usize) -> ClfParams<f64> {
    let factors = (0..=l)
        .map(|_| Matrix::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let centers = (0..l)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    ClfParams::new(d, factors, centers).unwrap()
}

fn clf_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut positive = 0usize;
    for d in 1..=3 {
        for l in 0..=2 {
            let c = random_clf(&mut rng, d, l);
            ensure!(c.value(&vec![0.0; d]) == 0.0, "V(0) ≠ 0 for d={d} L={l}");
            let mut n = 0;
            while n < 100 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                if c.sigmas(&x).iter().any(|s| s.abs() < 1e-3) {
                    continue;
                }
                n += 1;
                let g = c.gradient(&x);
                let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for i in 0..d {
                    let h = 1e-5;
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (c.value(&xp) - c.value(&xm)) / (2.0 * h);
                    worst = worst.max((fd - g[i]).abs() / scale);
                }
                checked += 1;
            }
            for _ in 0..100_000 {
                let mag = 10f64.powf(rng.random_range(-3.0..2.0));
                let x: Vec<f64> = (0..d).map(|_| mag * gaussian(&mut rng)).collect();
                if x.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let (v, g) = c.value_and_gradient(&x);
                let xg: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
                ensure!(v > 0.0 && xg > 0.0, "V={v:e}, x·∇V={xg:e} at {x:?} (d={d}, L={l})");
                positive += 1;
            }
        }
    }
    ensure!(worst < 1e-5, "gradient relative error {worst:e}");
    Ok(format!(
        "{checked} gradient checks, worst relative error {worst:.2e}; V>0 and x·∇V>0 at {positive} points"
    ))
}

// ------------------------------------------------------------------ 4

fn bounding_box(data: &Dataset, pad: f64) -> (Vec<f64>, Vec<f64>) {
    let d = data.dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for x in data.states() {
        for a in 0..d {
            lo[a] = lo[a].min(x[a]);
            hi[a] = hi[a].max(x[a]);
        }
    }
    for a in 0..d {
        let w = hi[a] - lo[a];
        lo[a] -= pad * w;
        hi[a] += pad * w;
    }
    (lo, hi)
}

fn sontag_identity(s: &Fitted) -> Outcome {
    let field = s.model.field().map_err(|e| e.to_string())?;
    let (lo, hi) = bounding_box(&s.data, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut active, mut inactive, mut tries) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    while active < 1000 {
        tries += 1;
        ensure!(tries < 1_000_000, "only {active} active states found");
        let x: Vec<f64> = (0..lo.len()).map(|a| rng.random_range(lo[a]..hi[a])).collect();
        let xm = s.model.to_model(&x);
        let smp = field.sample(&xm);
        if smp.active {
            let lhs: f64 = smp.b.iter().zip(&smp.v_total).map(|(a, b)| a * b).sum();
            worst = worst.max((lhs + smp.rho).abs() / smp.rho);
            active += 1;
        } else {
            ensure!(
                smp.u.iter().all(|v| v.to_bits() == 0),
                "inactive control is not bitwise zero at {x:?}"
            );
            inactive += 1;
        }
    }
    ensure!(worst < 1e-9, "relative identity error {worst:e}");
    Ok(format!(
        "{active} active states, worst relative error {worst:.2e}; {inactive} inactive states with û = 0"
    ))
}

// ------------------------------------------------------------------ 5 / 6 / 11

fn hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut h: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = h.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
    }
    h
}

fn inside(h: &[[f64; 2]], q: [f64; 2]) -> bool {
    (0..h.len()).all(|i| {
        let (a, b) = (h[i], h[(i + 1) % h.len()]);
        (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]) >= 0.0
    })
}

fn hull_starts(data: &Dataset, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let pts: Vec<[f64; 2]> = data.states().map(|x| [x[0], x[1]]).collect();
    let h = hull(&pts);
    let (lo, hi) = bounding_box(data, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let q = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        if inside(&h, q) {
            out.push(q.to_vec());
        }
    }
    out
}

fn demo_starts(data: &Dataset) -> Vec<Vec<f64>> {
    data.demos.iter().map(|d| d.start().to_vec()).collect()
}

/// Largest energy increase between consecutive steps.
fn worst_rise(t: &RolloutTrace) -> f64 {
    t.energies()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn converges(s: &Fitted, hull_seed: u64) -> Outcome {
    let mut starts = demo_starts(&s.data);
    starts.extend(hull_starts(&s.data, 5, hull_seed));
    let traces = streamline_bundle(&s.model, &starts, 0.1, 10_000, true).map_err(|e| e.to_string())?;
    let mut rise = f64::NEG_INFINITY;
    let mut longest = 0;
    for (i, t) in traces.iter().enumerate() {
        ensure!(
            t.reached_target,
            "start {i} {:?} did not reach the target ({} steps, diverged={})",
            starts[i],
            t.steps_used,
            t.diverged
        );
        rise = rise.max(worst_rise(t));
        longest = longest.max(t.steps_used);
    }
    ensure!(rise <= 1e-6, "energy rose by {rise:e} in one step");
    Ok(format!(
        "{} starts reached |x| ≤ {} (max {longest} steps), largest V step change {rise:.2e}, fit {:.1} s",
        starts.len(),
        s.model.controller.target_radius,
        s.seconds
    ))
}

fn gmr_only_contrast(s: &Fitted) -> Outcome {
    let mut starts = demo_starts(&s.data);
    starts.extend(hull_starts(&s.data, 5, 21));
    let open = streamline_bundle(&s.model, &starts, 0.1, 10_000, false).map_err(|e| e.to_string())?;
    let closed = streamline_bundle(&s.model, &starts, 0.1, 10_000, true).map_err(|e| e.to_string())?;
    let missed = open.iter().filter(|t| !t.reached_target).count();
    ensure!(missed >= 1, "every uncontrolled rollout reached the target");
    let reached = closed.iter().filter(|t| t.reached_target).count();
    ensure!(reached == starts.len(), "controlled: only {reached}/{} reached", starts.len());
    Ok(format!(
        "spiral set: uncontrolled missed {missed}/{n}, controlled reached {reached}/{n}",
        n = starts.len()
    ))
}

// ------------------------------------------------------------------ 7

fn perturbation_recovery(s: &Fitted) -> Outcome {
    let x0 = s.data.demos[0].start().to_vec();
    let base = rollout(&s.model, &x0, &RolloutConfig::default()).map_err(|e| e.to_string())?;
    let t0 = (0.5 * base.steps_used as f64 * 0.1).round();
    let cfg = RolloutConfig {
        disturbance: Disturbance::Localized {
            t_start: t0,
            duration: 5.0,
            mode: LocalizedMode::FreezeDynamics(vec![1.0, 0.5]),
        },
        ..Default::default()
    };
    let tr = rollout(&s.model, &x0, &cfg).map_err(|e| e.to_string())?;
    ensure!(tr.reached_target, "perturbed rollout did not reach the target");
    let flagged: Vec<f64> = tr.steps.iter().filter(|st| st.disturbed).map(|st| st.t).collect();
    ensure!(
        !flagged.is_empty() && flagged[0] >= t0 - 1e-9 && *flagged.last().unwrap() < t0 + 5.0,
        "disturbance flags outside [{t0}, {})",
        t0 + 5.0
    );
    let during = tr
        .steps
        .windows(2)
        .filter(|w| w[0].disturbed)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let after: Vec<f64> = tr
        .steps
        .iter()
        .filter(|st| st.t >= t0 + 5.0)
        .map(|st| st.energy)
        .collect();
    let rise = after
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    ensure!(rise <= 1e-6, "energy rose by {rise:e} after the window");
    Ok(format!(
        "engine-off at t={t0} s for 5 s (largest V rise while drifting {during:.2e}); V non-increasing afterwards (max change {rise:.2e}), reached after {} steps",
        tr.steps_used
    ))
}

// ------------------------------------------------------------------ 8

fn sea_oracle(s: &Fitted) -> Outcome {
    let sq = tetragon_area([0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]);
    let rect = tetragon_area([0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]);
    let line = tetragon_area([0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]);
    ensure!((sq - 1.0).abs() <= 1e-12, "unit square {sq}");
    ensure!((rect - 2.0).abs() <= 1e-12, "rectangle {rect}");
    ensure!(line.abs() <= 1e-12, "collinear {line}");
    let demo = &s.data.demos[0].x;
    let same = sea(demo, demo).map_err(|e| e.to_string())?.area;
    ensure!(same == 0.0, "sea(c, c) = {same}");
    let seg = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
    let off = vec![vec![0.0, 0.0], vec![0.0, 0.1], vec![1.0, 0.1], vec![1.0, 0.0]];
    let par = sea(&seg, &off).map_err(|e| e.to_string())?.area;
    ensure!((par - 0.1).abs() <= 1e-6, "parallel offset area {par}");
    let tr = rollout(&s.model, demo[0].as_slice(), &RolloutConfig::default()).map_err(|e| e.to_string())?;
    let a1 = sea_with_resolution(demo, &tr.positions(), 500).map_err(|e| e.to_string())?.area;
    let a2 = sea_with_resolution(demo, &tr.positions(), 1000).map_err(|e| e.to_string())?.area;
    let change = (a2 - a1).abs() / a1;
    ensure!(change < 0.01, "refinement changed the area by {:.3}%", 100.0 * change);
    Ok(format!(
        "shoelace values exact, offset pair {par:.12}, demo-vs-reproduction {a1:.2} m² with {:.4}% refinement change",
        100.0 * change
    ))
}

// ------------------------------------------------------------------ 9

fn optimization_improvement(fits: &[(&str, &Fitted)]) -> Outcome {
    let mut parts = Vec::new();
    for (name, f) in fits {
        let m = &f.model;
        ensure!(m.j_final <= m.j_init, "{name}: J_final {} > J_init {}", m.j_final, m.j_init);
        parts.push(format!("{name} {:.3e}→{:.3e}", m.j_init, m.j_final));
    }
    let s = &fits[0].1.model;
    let ratio = s.j_final / s.j_init;
    ensure!(ratio <= 0.8, "s-curve J_final/J_init = {ratio:.3}");
    Ok(format!("{}; s-curve ratio {ratio:.2e}", parts.join(", ")))
}

// ------------------------------------------------------------------ 10

fn objective_gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x: Vec<Vec<f64>> = (0..5).map(|i| vec![2.0 - 0.45 * i as f64]).collect();
    let v: Vec<Vec<f64>> = x.iter().map(|p| vec![-0.8 * p[0] + 0.05 * gaussian(&mut rng)]).collect();
    let demo = Demonstration::new((0..5).map(f64::from).collect(), x, v).unwrap();
    let data = Dataset::from_demos(vec![demo]).unwrap();
    let layout = ThetaLayout::new(1, 1, 1);
    let obj = Objective::new(&data, layout, ControllerConfig::new(0.2, 0.0).unwrap(), None)
        .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let theta: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-0.7..0.7)).collect();
        let g = obj.gradient(&theta);
        let scale = g.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
        for i in 0..theta.len() {
            let h = 1e-6;
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[i] += h;
            tm[i] -= h;
            let fd = (obj.value(&tp) - obj.value(&tm)) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / scale);
        }
    }
    ensure!(worst < 1e-4, "relative error {worst:e}");
    Ok(format!(
        "{} coordinates × 10 random θ, worst relative error {worst:.2e}",
        layout.len()
    ))
}

// ------------------------------------------------------------------ 11

fn run_cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`stable-lfd {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn polar_pipeline() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    run_cli(p, &["--seed", "3", "generate", "--shape", "port-approach", "-M", "3", "-N", "500", "--heading", "-o", "boat.csv"])?;
    let start = Instant::now();
    run_cli(p, &["--seed", "3", "--quiet", "fit", "-i", "boat.csv", "--polar", "-o", "polar.json"])?;
    let seconds = start.elapsed().as_secs_f64();
    let model = StableModel::load(p.join("polar.json")).map_err(|e| e.to_string())?;
    ensure!(model.gmm.k() == 12, "default K for polar data was {}", model.gmm.k());
    ensure!(model.dim() == 2 && model.meta.polar, "model is {}-dimensional", model.dim());
    let raw = stable_lfd::dataset::load_csv(p.join("boat.csv"), None).map_err(|e| e.to_string())?;
    ensure!(raw[0].dim() == 2 && raw[0].heading.is_some(), "generated data lacks heading");
    let pre = PreprocessConfig {
        polar: true,
        ..Default::default()
    };
    let data = preprocess(&raw, &pre).map_err(|e| e.to_string())?;
    let fitted = Fitted { data, model, seconds };
    let conv = converges(&fitted, 31)?;
    Ok(format!("3D (x, y, heading) → 2D (ρ, heading), K=12 by default; {conv}"))
}

// ------------------------------------------------------------------ 12

fn pipeline_files(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    run_cli(dir, &["--seed", "11", "generate", "--shape", "s-curve", "-M", "3", "-N", "300", "-o", "demos.csv"])?;
    run_cli(dir, &["--seed", "11", "--quiet", "fit", "-i", "demos.csv", "-o", "model.json"])?;
    run_cli(dir, &["--seed", "11", "--quiet", "eval", "-m", "model.json", "-d", "demos.csv", "-o", "report.json"])?;
    ["demos.csv", "model.json", "report.json"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = pipeline_files(a.path())?;
    let fb = pipeline_files(b.path())?;
    for (name, (x, y)) in ["demos.csv", "model.json", "report.json"].iter().zip(fa.iter().zip(&fb)) {
        ensure!(x == y, "{name} differs between runs");
    }
    let model = StableModel::load(a.path().join("model.json")).map_err(|e| e.to_string())?;
    ensure!(model.gmm.k() == 5, "default K for planar data was {}", model.gmm.k());
    let text = model.to_json_string().map_err(|e| e.to_string())?;
    ensure!(text.as_bytes() == fa[1].as_slice(), "model save→load→save is not byte-identical");
    Ok(format!(
        "generate→fit→eval twice: demos {} B, model {} B, report {} B identical; default K=5; model round trip identical",
        fa[0].len(),
        fa[1].len(),
        fa[2].len()
    ))
}

// ------------------------------------------------------------------ 13

fn scaling_report() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(dir.path(), &["--quiet", "bench", "--ks", "4,8", "--ns", "100,200", "-o", "bench.csv"])?;
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).map_err(|e| e.to_string())?;
    let slope: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# slope_vs_KMN: "))
        .ok_or("bench output lacks a slope line")?
        .trim()
        .parse()
        .map_err(|e| format!("{e}"))?;
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    ensure!(rows == 4, "expected 4 grid rows, got {rows}");
    ensure!((0.5..=1.5).contains(&slope), "log-log slope {slope:.3} outside [0.5, 1.5]");
    Ok(format!(
        "objective time vs K·M·N log-log slope {slope:.3} over {rows} grid points"
    ))
}

// ------------------------------------------------------------------ runner

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = Duration::from_secs_f64(start.elapsed().as_secs_f64()).as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {id:>2} {name}: {detail} [{secs:.1} s]");
            true
        }
        Err(why) => {
            println!("FAIL criterion {id:>2} {name}: {why} [{secs:.1} s]");
            false
        }
    }
}

fn main() {
    let mut ok = Vec::new();
    ok.push(report(1, "EM correctness", em_correctness));
    ok.push(report(2, "GMR oracle equivalence", gmr_oracle));
    ok.push(report(3, "CLF gradient check", clf_gradient));

    let total = Instant::now();
    let s_curve = fit_synthetic(
        &SyntheticSpec::new(Shape::SCurve, 3, 500, 0.5, 1),
        &LearnConfig::new(5, 1, 1),
        false,
    );
    ok.push(report(4, "Sontag decrease identity", || sontag_identity(&s_curve)));
    ok.push(report(5, "convergence", || {
        let r = converges(&s_curve, 5)?;
        let secs = total.elapsed().as_secs_f64();
        ensure!(secs < 300.0, "fit plus rollouts took {secs:.1} s");
        Ok(format!("{r}; total {secs:.1} s"))
    }));
    let spiral = fit_synthetic(
        &SyntheticSpec::new(Shape::Spiral, 3, 500, 0.5, 1),
        &LearnConfig::new(5, 1, 1),
        false,
    );
    ok.push(report(6, "GMR-only contrast", || gmr_only_contrast(&spiral)));
    ok.push(report(7, "perturbation recovery", || perturbation_recovery(&s_curve)));
    ok.push(report(8, "SEA oracle", || sea_oracle(&s_curve)));
    ok.push(report(9, "optimization improvement", || {
        optimization_improvement(&[("s-curve", &s_curve), ("spiral", &spiral)])
    }));
    ok.push(report(10, "objective gradient oracle", objective_gradient_oracle));
    ok.push(report(11, "polar pipeline", polar_pipeline));
    ok.push(report(12, "determinism", determinism));
    ok.push(report(13, "scaling report", scaling_report));

    let passed = ok.iter().filter(|&&b| b).count();
    println!("acceptance: {passed}/{} criteria passed", ok.len());
    if passed != ok.len() {
        std::process::exit(1);
    }
}
