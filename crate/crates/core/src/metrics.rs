//! Swept error area between a demonstration and its reproduction, and
//! velocity RMSE of a model on recorded data.

use serde::Serialize;

use crate::dataset::{Dataset, Demonstration};
use crate::error::{Error, Result};
use crate::model::StableModel;
use crate::sim::{rollout, RolloutConfig};

type P2 = [f64; 2];

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn triangle(a: P2, b: P2, c: P2) -> f64 {
    0.5 * cross(a, b, c).abs()
}

/// Proper crossing point of segments `ab` and `cd`, if any.
fn crossing(a: P2, b: P2, c: P2, d: P2) -> Option<P2> {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        let t = d1 / (d1 - d2);
        Some([c[0] + t * (d[0] - c[0]), c[1] + t * (d[1] - c[1])])
    } else {
        None
    }
}

/// Unsigned area of the quadrilateral `p1 → p2 → q2 → q1`. Self-crossing
/// (bow-tie) quads are split at the crossing and both lobes counted.
pub fn tetragon_area(p1: P2, p2: P2, q2: P2, q1: P2) -> f64 {
    if let Some(x) = crossing(p1, p2, q2, q1) {
        return triangle(p1, x, q1) + triangle(x, p2, q2);
    }
    if let Some(x) = crossing(p2, q2, q1, p1) {
        return triangle(p1, p2, x) + triangle(x, q2, q1);
    }
    let pts = [p1, p2, q2, q1];
    let twice: f64 = (0..4)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % 4]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeaResult {
    pub area: f64,
    pub per_segment: Vec<f64>,
    /// Common normalized arc-length parameters at which both curves were
    /// sampled; segment `t` spans `pairing[t]..pairing[t + 1]`.
    pub pairing: Vec<f64>,
}

/// Cumulative arc length normalized to `[0, 1]`.
fn arc_fractions(c: &[P2]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in c.windows(2) {
        let l = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        acc.push(acc.last().unwrap() + l);
    }
    let total = *acc.last().unwrap();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    } else {
        let n = (c.len() - 1) as f64;
        acc.iter_mut().enumerate().for_each(|(i, a)| *a = i as f64 / n);
    }
    *acc.last_mut().unwrap() = 1.0;
    acc
}

fn sample(c: &[P2], frac: &[f64], s: f64) -> P2 {
    let i = frac.partition_point(|&f| f <= s).clamp(1, c.len() - 1);
    let (f0, f1) = (frac[i - 1], frac[i]);
    let w = if f1 > f0 { ((s - f0) / (f1 - f0)).clamp(0.0, 1.0) } else { 1.0 };
    [
        c[i - 1][0] + w * (c[i][0] - c[i - 1][0]),
        c[i - 1][1] + w * (c[i][1] - c[i - 1][1]),
    ]
}

fn to_planar(c: &[Vec<f64>]) -> Result<Vec<P2>> {
    if c.len() < 2 {
        return Err(Error::Validation("a polyline needs at least 2 points".into()));
    }
    c.iter()
        .map(|p| {
            if p.len() < 2 {
                Err(Error::Dimension("swept area needs at least 2 coordinates".into()))
            } else {
                Ok([p[0], p[1]])
            }
        })
        .collect()
}

/// Swept error area with the two curves paired by normalized arc length at
/// the union of their vertices.
pub fn sea(demo: &[Vec<f64>], estimate: &[Vec<f64>]) -> Result<SeaResult> {
    sea_with_resolution(demo, estimate, 0)
}

/// As [`sea`], additionally sampling `resolution + 1` uniform parameters.
/// Only the first two coordinates of each point are used.
pub fn sea_with_resolution(
    demo: &[Vec<f64>],
    estimate: &[Vec<f64>],
    resolution: usize,
) -> Result<SeaResult> {
    let a = to_planar(demo)?;
    let b = to_planar(estimate)?;
    let (fa, fb) = (arc_fractions(&a), arc_fractions(&b));
    let mut params: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    if resolution > 0 {
        params.extend((0..=resolution).map(|i| i as f64 / resolution as f64));
    }
    params.sort_by(f64::total_cmp);
    params.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    let pa: Vec<P2> = params.iter().map(|&s| sample(&a, &fa, s)).collect();
    let pb: Vec<P2> = params.iter().map(|&s| sample(&b, &fb, s)).collect();
    let per_segment: Vec<f64> = (0..params.len() - 1)
        .map(|t| tetragon_area(pa[t], pa[t + 1], pb[t + 1], pb[t]))
        .collect();
    Ok(SeaResult {
        area: per_segment.iter().sum(),
        per_segment,
        pairing: params,
    })
}

/// Squared closed-loop velocity errors of `model` on one demonstration,
/// in recording units.
fn squared_errors(model: &StableModel, demo: &Demonstration) -> Result<Vec<f64>> {
    if demo.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "model is {}-dimensional, data is {}-dimensional",
            model.dim(),
            demo.dim()
        )));
    }
    let field = model.field()?;
    Ok(demo
        .x
        .iter()
        .zip(&demo.v)
        .map(|(x, v)| {
            let vh = model.to_physical(&field.closed_loop_velocity(&model.to_model(x)));
            v.iter().zip(&vh).map(|(a, b)| (a - b).powi(2)).sum()
        })
        .collect())
}

/// `√(mean |v − v̂|²)` over one demonstration.
pub fn velocity_rmse(model: &StableModel, demo: &Demonstration) -> Result<f64> {
    let e = squared_errors(model, demo)?;
    Ok((e.iter().sum::<f64>() / e.len() as f64).sqrt())
}

/// RMSE pooled over every point of the dataset.
pub fn dataset_velocity_rmse(model: &StableModel, dataset: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for d in &dataset.demos {
        total += squared_errors(model, d)?.iter().sum::<f64>();
    }
    Ok((total / dataset.num_points() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoEvaluation {
    pub demo: usize,
    pub sea: f64,
    pub rmse: f64,
    pub reached_target: bool,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalTotals {
    pub sea: f64,
    pub rmse: f64,
    pub reached: usize,
    pub demos: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_demo: Vec<DemoEvaluation>,
    pub totals: EvalTotals,
}

/// Rolls out from every demonstration start and compares each
/// reproduction with its demonstration.
pub fn evaluate(model: &StableModel, dataset: &Dataset, cfg: &RolloutConfig) -> Result<EvalReport> {
    let per_demo = dataset
        .demos
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let trace = rollout(model, d.start(), cfg)?;
            Ok(DemoEvaluation {
                demo: i,
                sea: sea(&d.x, &trace.positions())?.area,
                rmse: velocity_rmse(model, d)?,
                reached_target: trace.reached_target,
                steps: trace.steps_used,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let totals = EvalTotals {
        sea: per_demo.iter().map(|r| r.sea).sum(),
        rmse: dataset_velocity_rmse(model, dataset)?,
        reached: per_demo.iter().filter(|r| r.reached_target).count(),
        demos: per_demo.len(),
    };
    Ok(EvalReport { per_demo, totals })
}
