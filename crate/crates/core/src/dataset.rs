//! Demonstration ingestion and preprocessing.
//!
//! Raw trajectories (timed positions, optional heading) are projected to a
//! local plane, shifted so the common target is the origin, differentiated
//! into `(x, v)` pairs, optionally reduced to polar form and finally warped
//! so that every demonstration ends exactly at the origin.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, norm, Scalar};

/// Mean Earth radius used by the tangent-plane projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Name recorded in [`DatasetMeta::projection`] for planarized data.
pub const PROJECTION_LOCAL: &str = "local-equirectangular";

/// Minimum admissible sampling interval, seconds.
pub const MIN_DT: f64 = 1e-9;

/// Timed samples of one demonstration as recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTrajectory<T = f64> {
    pub id: String,
    pub t: Vec<T>,
    pub pos: Vec<Vec<T>>,
    /// Heading in radians, wrapped to (−π, π].
    pub heading: Option<Vec<T>>,
}

impl<T: Scalar> RawTrajectory<T> {
    /// Validates ordering, lengths and finiteness.
    pub fn new(
        id: impl Into<String>,
        t: Vec<T>,
        pos: Vec<Vec<T>>,
        heading: Option<Vec<T>>,
    ) -> Result<Self> {
        let id = id.into();
        if t.len() != pos.len() || heading.as_ref().is_some_and(|h| h.len() != t.len()) {
            return Err(Error::Validation(format!(
                "trajectory '{id}': column lengths differ"
            )));
        }
        if t.is_empty() {
            return Err(Error::Validation(format!("trajectory '{id}' is empty")));
        }
        let d = pos[0].len();
        if d == 0 || pos.iter().any(|p| p.len() != d) {
            return Err(Error::Dimension(format!(
                "trajectory '{id}': inconsistent position dimension"
            )));
        }
        for (i, w) in t.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Validation(format!(
                    "non-monotone time at row {} of trajectory '{id}'",
                    i + 2
                )));
            }
        }
        let finite = t.iter().all(|v| v.is_finite())
            && pos.iter().flatten().all(|v| v.is_finite())
            && heading.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation(format!(
                "trajectory '{id}' has non-finite entries"
            )));
        }
        let heading = heading.map(|h| h.into_iter().map(wrap_angle).collect());
        Ok(Self { id, t, pos, heading })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pos[0].len()
    }
}

/// `(x, v)` pairs of one demonstration with their timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration<T = f64> {
    pub t: Vec<T>,
    pub x: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> Demonstration<T> {
    pub fn new(t: Vec<T>, x: Vec<Vec<T>>, v: Vec<Vec<T>>) -> Result<Self> {
        if x.len() < 2 || x.len() != v.len() || t.len() != x.len() {
            return Err(Error::Validation(
                "a demonstration needs ≥ 2 points with matching x, v and t".into(),
            ));
        }
        let d = x[0].len();
        if x.iter().chain(&v).any(|p| p.len() != d) {
            return Err(Error::Dimension("inconsistent state dimension".into()));
        }
        if !x.iter().chain(&v).flatten().all(|e| e.is_finite()) {
            return Err(Error::Validation("non-finite demonstration entry".into()));
        }
        Ok(Self { t, x, v })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn start(&self) -> &[T] {
        &self.x[0]
    }

    pub fn end(&self) -> &[T] {
        &self.x[self.x.len() - 1]
    }

    pub fn cast<U: Scalar>(&self) -> Demonstration<U> {
        use crate::scalar::cast_slice;
        Demonstration {
            t: cast_slice(&self.t),
            x: self.x.iter().map(|r| cast_slice(r)).collect(),
            v: self.v.iter().map(|r| cast_slice(r)).collect(),
        }
    }
}

/// Record of every preprocessing step, sufficient to map learned states back
/// to the recording frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub projection: String,
    pub origin_lonlat: Option<[f64; 2]>,
    /// Subtracted from positions (before any polar reduction), followed by
    /// the subtracted target heading when a heading channel is present.
    pub shift: Vec<f64>,
    /// Per-axis state scales used for normalization before learning.
    pub scales: Option<Vec<f64>>,
    pub polar: bool,
    pub heading: bool,
    /// Largest state norm over all demonstrations.
    pub extent: f64,
}

impl DatasetMeta {
    pub fn plain(dim: usize) -> Self {
        Self {
            projection: "none".into(),
            origin_lonlat: None,
            shift: vec![0.0; dim],
            scales: None,
            polar: false,
            heading: false,
            extent: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T = f64> {
    pub dim: usize,
    pub demos: Vec<Demonstration<T>>,
    pub meta: DatasetMeta,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(demos: Vec<Demonstration<T>>, meta: DatasetMeta) -> Result<Self> {
        let dim = demos
            .first()
            .ok_or_else(|| Error::Validation("dataset needs at least one demonstration".into()))?
            .dim();
        if demos.iter().any(|d| d.dim() != dim) {
            return Err(Error::Dimension("demonstrations differ in dimension".into()));
        }
        Ok(Self { dim, demos, meta })
    }

    /// Builds a dataset without preprocessing metadata (identity transform).
    pub fn from_demos(demos: Vec<Demonstration<T>>) -> Result<Self> {
        let dim = demos.first().map(|d| d.dim()).unwrap_or(0);
        let mut ds = Self::new(demos, DatasetMeta::plain(dim))?;
        ds.meta.extent = ds.extent();
        Ok(ds)
    }

    pub fn num_points(&self) -> usize {
        self.demos.iter().map(|d| d.len()).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = &Vec<T>> {
        self.demos.iter().flat_map(|d| d.x.iter())
    }

    pub fn velocities(&self) -> impl Iterator<Item = &Vec<T>> {
        self.demos.iter().flat_map(|d| d.v.iter())
    }

    /// Concatenated `[x, v]` vectors, the data the mixture is fitted on.
    pub fn joint_points(&self) -> Vec<Vec<T>> {
        self.demos
            .iter()
            .flat_map(|d| {
                d.x.iter().zip(&d.v).map(|(x, v)| {
                    let mut p = x.clone();
                    p.extend_from_slice(v);
                    p
                })
            })
            .collect()
    }

    pub fn extent(&self) -> f64 {
        self.states().map(|x| norm(x).re()).fold(0.0, f64::max)
    }

    /// Mean of `|v|²` over all points.
    pub fn mean_squared_speed(&self) -> f64 {
        let n = self.num_points().max(1) as f64;
        self.velocities()
            .map(|v| crate::scalar::norm_sq(v).re())
            .sum::<f64>()
            / n
    }

    /// Per-axis standard deviation of the states (1 for constant axes).
    pub fn state_std(&self) -> Vec<f64> {
        let n = self.num_points() as f64;
        (0..self.dim)
            .map(|a| {
                let mean = self.states().map(|x| x[a].re()).sum::<f64>() / n;
                let var = self
                    .states()
                    .map(|x| (x[a].re() - mean).powi(2))
                    .sum::<f64>()
                    / n;
                let s = var.sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Divides every state and velocity axis by `scales`.
    pub fn scaled(&self, scales: &[f64]) -> Self {
        let inv: Vec<T> = scales.iter().map(|s| lit::<T>(1.0 / s)).collect();
        let apply = |r: &Vec<T>| r.iter().zip(&inv).map(|(&a, &s)| a * s).collect::<Vec<T>>();
        Self {
            dim: self.dim,
            demos: self
                .demos
                .iter()
                .map(|d| Demonstration {
                    t: d.t.clone(),
                    x: d.x.iter().map(apply).collect(),
                    v: d.v.iter().map(apply).collect(),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            dim: self.dim,
            demos: self.demos.iter().map(|d| d.cast()).collect(),
            meta: self.meta.clone(),
        }
    }

    /// JSON export: `dim`, `meta{...}`, `demos[[{x, v}]]`.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct MetaOut<'a> {
            projection: &'a str,
            origin_lonlat: Option<[f64; 2]>,
            shift: &'a [f64],
            scales: Option<&'a [f64]>,
            polar: bool,
        }
        #[derive(Serialize)]
        struct Point {
            x: Vec<f64>,
            v: Vec<f64>,
        }
        let demos: Vec<Vec<Point>> = self
            .demos
            .iter()
            .map(|d| {
                d.x.iter()
                    .zip(&d.v)
                    .map(|(x, v)| Point {
                        x: x.iter().map(|e| e.re()).collect(),
                        v: v.iter().map(|e| e.re()).collect(),
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "dim": self.dim,
            "meta": MetaOut {
                projection: &self.meta.projection,
                origin_lonlat: self.meta.origin_lonlat,
                shift: &self.meta.shift,
                scales: self.meta.scales.as_deref(),
                polar: self.meta.polar,
            },
            "demos": demos,
        })
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = lit::<T>(2.0 * PI);
    let pi = lit::<T>(PI);
    let mut w = a - two_pi * ((a + pi) / two_pi).floor();
    // floor maps exactly −π to −π; move it to the closed end.
    if w <= -pi {
        w += two_pi;
    }
    w
}

// ---------------------------------------------------------------- CSV

/// Column mapping for demonstration CSV files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub demo: String,
    pub time: String,
    pub position: Vec<String>,
    pub heading: Option<String>,
}

impl CsvSchema {
    /// `demo,t,x1..xd[,heading]`.
    pub fn standard(dim: usize, heading: bool) -> Self {
        Self {
            demo: "demo".into(),
            time: "t".into(),
            position: (1..=dim).map(|i| format!("x{i}")).collect(),
            heading: heading.then(|| "heading".to_string()),
        }
    }

    /// Infers the standard layout from a header row.
    pub fn detect(headers: &[String]) -> Result<Self> {
        let mut dim = 0;
        while headers.iter().any(|h| h == &format!("x{}", dim + 1)) {
            dim += 1;
        }
        if dim == 0 {
            return Err(Error::Schema("missing column 'x1'".into()));
        }
        let heading = headers.iter().any(|h| h == "heading");
        Ok(Self::standard(dim, heading))
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec![self.demo.clone(), self.time.clone()];
        h.extend(self.position.iter().cloned());
        h.extend(self.heading.iter().cloned());
        h
    }
}

fn column(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
}

/// Reads demonstrations from CSV text. Lines starting with `#` are comments.
pub fn read_csv<R: Read>(reader: R, schema: Option<&CsvSchema>) -> Result<Vec<RawTrajectory>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let schema = match schema {
        Some(s) => s.clone(),
        None => CsvSchema::detect(&headers)?,
    };
    let demo_col = column(&headers, &schema.demo)?;
    let time_col = column(&headers, &schema.time)?;
    let pos_cols = schema
        .position
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let heading_col = schema
        .heading
        .as_deref()
        .map(|c| column(&headers, c))
        .transpose()?;

    struct Block {
        id: String,
        t: Vec<f64>,
        pos: Vec<Vec<f64>>,
        heading: Vec<f64>,
    }
    let mut blocks: Vec<Block> = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::Validation(format!("row {row}: cannot parse '{raw}' as a number"))
            })
        };
        let id = rec.get(demo_col).unwrap_or("").to_string();
        let t = field(time_col)?;
        let pos = pos_cols.iter().map(|&c| field(c)).collect::<Result<Vec<_>>>()?;
        let h = heading_col.map(field).transpose()?;
        if blocks.last().map(|b| b.id != id).unwrap_or(true) {
            if !seen.insert(id.clone()) {
                return Err(Error::Validation(format!(
                    "row {row}: demo '{id}' is not contiguous"
                )));
            }
            blocks.push(Block {
                id,
                t: Vec::new(),
                pos: Vec::new(),
                heading: Vec::new(),
            });
        }
        let b = blocks.last_mut().expect("block pushed above");
        if let Some(&prev) = b.t.last() {
            if !(t > prev) {
                return Err(Error::Validation(format!("non-monotone time at row {row}")));
            }
        }
        b.t.push(t);
        b.pos.push(pos);
        if let Some(h) = h {
            b.heading.push(h);
        }
    }
    blocks
        .into_iter()
        .map(|b| {
            let heading = heading_col.map(|_| b.heading);
            RawTrajectory::new(b.id, b.t, b.pos, heading)
        })
        .collect()
}

pub fn load_csv(path: impl AsRef<Path>, schema: Option<&CsvSchema>) -> Result<Vec<RawTrajectory>> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f), schema)
}

/// Writes trajectories in the standard layout, preceded by `# ` comment lines.
pub fn write_csv<W: Write>(trajs: &[RawTrajectory], comments: &[String], out: W) -> Result<()> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::Validation("nothing to write".into()))?;
    let schema = CsvSchema::standard(first.dim(), first.heading.is_some());
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.header())?;
    for tr in trajs {
        for i in 0..tr.len() {
            let mut rec = vec![tr.id.clone(), tr.t[i].to_string()];
            rec.extend(tr.pos[i].iter().map(|v| v.to_string()));
            if let Some(h) = &tr.heading {
                rec.push(h[i].to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- geometry

/// Projects lon/lat degrees to a local east/north plane in meters around
/// `origin = [lon0, lat0]`. Every sample must lie within 1° of the origin.
pub fn planarize(traj: &RawTrajectory, origin: [f64; 2]) -> Result<RawTrajectory> {
    if traj.dim() != 2 {
        return Err(Error::Dimension("planarize expects lon/lat pairs".into()));
    }
    let [lon0, lat0] = origin;
    let k = EARTH_RADIUS_M * PI / 180.0;
    let coslat = lat0.to_radians().cos();
    let mut pos = Vec::with_capacity(traj.len());
    for (i, p) in traj.pos.iter().enumerate() {
        let (dlon, dlat) = (p[0] - lon0, p[1] - lat0);
        if dlon.abs() > 1.0 || dlat.abs() > 1.0 {
            return Err(Error::Projection(format!(
                "sample {} of '{}' is more than 1° from the projection origin",
                i + 1,
                traj.id
            )));
        }
        pos.push(vec![dlon * coslat * k, dlat * k]);
    }
    Ok(RawTrajectory {
        id: traj.id.clone(),
        t: traj.t.clone(),
        pos,
        heading: traj.heading.clone(),
    })
}

/// Inverse of [`planarize`].
pub fn unplanarize(traj: &RawTrajectory, origin: [f64; 2]) -> RawTrajectory {
    let [lon0, lat0] = origin;
    let k = EARTH_RADIUS_M * PI / 180.0;
    let coslat = lat0.to_radians().cos();
    RawTrajectory {
        id: traj.id.clone(),
        t: traj.t.clone(),
        pos: traj
            .pos
            .iter()
            .map(|p| vec![lon0 + p[0] / (coslat * k), lat0 + p[1] / k])
            .collect(),
        heading: traj.heading.clone(),
    }
}

/// Translates all trajectories by minus the mean final position.
pub fn shift_to_origin<T: Scalar>(trajs: &[RawTrajectory<T>]) -> Result<(Vec<RawTrajectory<T>>, Vec<T>)> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::Validation("shift_to_origin needs at least one trajectory".into()))?;
    let d = first.dim();
    if trajs.iter().any(|t| t.dim() != d) {
        return Err(Error::Dimension("trajectories differ in dimension".into()));
    }
    let m = lit::<T>(trajs.len() as f64);
    let shift: Vec<T> = (0..d)
        .map(|a| trajs.iter().map(|t| t.pos[t.len() - 1][a]).sum::<T>() / m)
        .collect();
    let shifted = trajs
        .iter()
        .map(|t| RawTrajectory {
            id: t.id.clone(),
            t: t.t.clone(),
            pos: t
                .pos
                .iter()
                .map(|p| p.iter().zip(&shift).map(|(&a, &s)| a - s).collect())
                .collect(),
            heading: t.heading.clone(),
        })
        .collect();
    Ok((shifted, shift))
}

/// Central differences in the interior, one-sided at the ends. Needs ≥ 2
/// samples.
pub fn finite_difference<T: Scalar>(t: &[T], x: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let n = x.len();
    if n < 2 || t.len() != n {
        return Err(Error::Validation("finite differences need ≥ 2 samples".into()));
    }
    let min_dt = lit::<T>(MIN_DT);
    for w in t.windows(2) {
        if w[1] - w[0] < min_dt {
            return Err(Error::DegenerateSampling(format!(
                "sampling interval {} s is below {MIN_DT} s",
                (w[1] - w[0]).re()
            )));
        }
    }
    let diff = |i: usize, j: usize| -> Vec<T> {
        let dt = t[j] - t[i];
        x[j].iter().zip(&x[i]).map(|(&b, &a)| (b - a) / dt).collect()
    };
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                diff(0, 1)
            } else if i == n - 1 {
                diff(n - 2, n - 1)
            } else {
                diff(i - 1, i + 1)
            }
        })
        .collect())
}

/// Heading sequence made continuous, anchored so the final value is the
/// wrapped final heading.
fn unwrap_from_end<T: Scalar>(h: &[T]) -> Vec<T> {
    let n = h.len();
    let mut out = vec![T::zero(); n];
    out[n - 1] = wrap_angle(h[n - 1]);
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] - wrap_angle(h[i + 1] - h[i]);
    }
    out
}

/// Turns timed samples into `(x, v)` pairs. The state is the position,
/// followed by the (continuous) heading when recorded.
pub fn differentiate<T: Scalar>(traj: &RawTrajectory<T>) -> Result<Demonstration<T>> {
    if traj.len() < 3 {
        return Err(Error::Validation(format!(
            "trajectory '{}' has {} samples; differentiation needs ≥ 3",
            traj.id,
            traj.len()
        )));
    }
    let x: Vec<Vec<T>> = match &traj.heading {
        None => traj.pos.clone(),
        Some(h) => {
            let hu = unwrap_from_end(h);
            traj.pos
                .iter()
                .zip(hu)
                .map(|(p, th)| {
                    let mut s = p.clone();
                    s.push(th);
                    s
                })
                .collect()
        }
    };
    let v = finite_difference(&traj.t, &x)?;
    Demonstration::new(traj.t.clone(), x, v)
}

/// Warps positions linearly in sample index so the demo ends exactly at
/// `target`, then recomputes velocities.
pub fn correct_endpoints<T: Scalar>(
    demo: &Demonstration<T>,
    target: &[T],
    r_corr: T,
) -> Result<Demonstration<T>> {
    let n = demo.len();
    let end = demo.end();
    let offset: Vec<T> = target.iter().zip(end).map(|(&g, &e)| g - e).collect();
    let miss = norm(&offset);
    if miss > r_corr {
        return Err(Error::EndpointTooFar(format!(
            "final state is {} from the target (limit {})",
            miss.re(),
            r_corr.re()
        )));
    }
    if offset.iter().all(|o| *o == T::zero()) {
        return Ok(demo.clone());
    }
    let denom = lit::<T>((n - 1) as f64);
    let x: Vec<Vec<T>> = demo
        .x
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let w = lit::<T>(i as f64) / denom;
            p.iter().zip(&offset).map(|(&a, &o)| a + w * o).collect()
        })
        .collect();
    let mut x = x;
    x[n - 1] = target.to_vec();
    let v = finite_difference(&demo.t, &x)?;
    Demonstration::new(demo.t.clone(), x, v)
}

/// `(p1, p2, heading) → (|p|, heading)`, velocities re-derived.
pub fn to_polar<T: Scalar>(demo: &Demonstration<T>) -> Result<Demonstration<T>> {
    if demo.dim() != 3 {
        return Err(Error::Dimension(format!(
            "polar reduction needs (x, y, heading) states, got dimension {}",
            demo.dim()
        )));
    }
    let n = demo.len();
    let x: Vec<Vec<T>> = demo
        .x
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
            if r == T::zero() && i + 1 < n {
                log::warn!("polar reduction: radius is zero at sample {}", i + 1);
            }
            vec![r, s[2]]
        })
        .collect();
    let v = finite_difference(&demo.t, &x)?;
    Demonstration::new(demo.t.clone(), x, v)
}

// ---------------------------------------------------------------- synthetic

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Line,
    Arc,
    SCurve,
    PortApproach,
    Spiral,
}

impl Shape {
    pub const ALL: [Shape; 5] = [
        Shape::Line,
        Shape::Arc,
        Shape::SCurve,
        Shape::PortApproach,
        Shape::Spiral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Line => "line",
            Shape::Arc => "arc",
            Shape::SCurve => "s-curve",
            Shape::PortApproach => "port-approach",
            Shape::Spiral => "spiral",
        }
    }

    fn raw_point(self, s: f64) -> [f64; 2] {
        let r = 1.0 - s;
        match self {
            Shape::Line => [100.0 * r, 100.0 * r],
            Shape::Arc => {
                let phi = PI / 2.0 + s * PI / 2.0;
                [150.0 + 150.0 * phi.cos(), 150.0 * phi.sin()]
            }
            Shape::SCurve => [200.0 * r, 60.0 * r + 50.0 * (2.0 * PI * r).sin()],
            Shape::PortApproach => {
                let c = [[-300.0, 250.0], [-40.0, 280.0], [80.0, 90.0], [0.0, 0.0]];
                let b = [r * r * r, 3.0 * r * r * s, 3.0 * r * s * s, s * s * s];
                [
                    (0..4).map(|i| b[i] * c[i][0]).sum(),
                    (0..4).map(|i| b[i] * c[i][1]).sum(),
                ]
            }
            Shape::Spiral => {
                let phi = 2.0 * PI * 1.25 * s;
                [150.0 * r * phi.cos(), 150.0 * r * phi.sin()]
            }
        }
    }

    /// Point on the nominal path, `s ∈ [0, 1]`, ending exactly at the origin.
    pub fn point(self, s: f64) -> [f64; 2] {
        let p = self.raw_point(s);
        let e = self.raw_point(1.0);
        [p[0] - e[0], p[1] - e[1]]
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|sh| sh.name() == s)
            .ok_or_else(|| Error::UnknownShape(s.to_string()))
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub demos: usize,
    pub points: usize,
    /// Standard deviation (meters) of the smooth per-demo deformation.
    pub noise_std: f64,
    pub seed: u64,
    /// Record the course angle as a heading channel.
    pub heading: bool,
}

impl SyntheticSpec {
    pub fn new(shape: Shape, demos: usize, points: usize, noise_std: f64, seed: u64) -> Self {
        Self {
            shape,
            demos,
            points,
            noise_std,
            seed,
            heading: false,
        }
    }

    pub fn with_heading(mut self, heading: bool) -> Self {
        self.heading = heading;
        self
    }
}

const NOISE_MODES: usize = 3;

/// Noisy timed variants of a nominal shape, all ending at the origin.
///
/// Each demo deforms the nominal path by a random low-frequency field
/// tapered to zero at the target, then traverses it with an ease-out speed
/// profile (the vessel slows down on arrival).
pub fn synthetic_trajectories(spec: &SyntheticSpec) -> Result<Vec<RawTrajectory>> {
    if spec.demos < 1 {
        return Err(Error::InvalidConfig("need at least one demonstration".into()));
    }
    if spec.points < 8 {
        return Err(Error::InvalidConfig("need at least 8 points per demonstration".into()));
    }
    if !(spec.noise_std >= 0.0) || !spec.noise_std.is_finite() {
        return Err(Error::InvalidConfig("noise_std must be finite and ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let coeff = Normal::new(0.0, 1.0).expect("unit normal");
    let amp = spec.noise_std / (NOISE_MODES as f64).sqrt();
    let shape = spec.shape;
    let mut out = Vec::with_capacity(spec.demos);
    for m in 0..spec.demos {
        // [axis][mode][sin, cos]
        let mut c = [[[0.0; 2]; NOISE_MODES]; 2];
        for axis in c.iter_mut() {
            for mode in axis.iter_mut() {
                mode[0] = amp * coeff.sample(&mut rng);
                mode[1] = amp * coeff.sample(&mut rng);
            }
        }
        let path = |s: f64| -> [f64; 2] {
            let p = shape.point(s);
            let taper = 1.0 - s;
            let mut q = p;
            for (axis, qa) in q.iter_mut().enumerate() {
                let mut delta = 0.0;
                for (j, mode) in c[axis].iter().enumerate() {
                    let w = (j + 1) as f64 * PI * s;
                    delta += mode[0] * w.sin() + mode[1] * w.cos();
                }
                *qa += taper * delta;
            }
            q
        };
        let length: f64 = (0..2000)
            .map(|i| {
                let a = path(i as f64 / 2000.0);
                let b = path((i + 1) as f64 / 2000.0);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .sum();
        // One metre per second on average.
        let duration = length.max(1.0);
        let n = spec.points;
        let mut t = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        let mut heading = Vec::with_capacity(n);
        for i in 0..n {
            let tau = i as f64 / (n - 1) as f64;
            let s = 1.0 - (1.0 - tau) * (1.0 - tau);
            let p = path(s);
            t.push(duration * tau);
            pos.push(p.to_vec());
            let h = 1e-6;
            let (a, b) = (path((s - h).max(0.0)), path((s + h).min(1.0)));
            heading.push(wrap_angle((b[1] - a[1]).atan2(b[0] - a[0])));
        }
        pos[n - 1] = vec![0.0, 0.0];
        let heading = spec.heading.then_some(heading);
        out.push(RawTrajectory::new(format!("demo{}", m + 1), t, pos, heading)?);
    }
    Ok(out)
}

/// Synthetic demonstrations run through [`preprocess`] with defaults.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let trajs = synthetic_trajectories(spec)?;
    preprocess(&trajs, &PreprocessConfig::default())
}

// ---------------------------------------------------------------- pipeline

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    /// Lon/lat projection origin; `None` when positions are already metric.
    pub origin_lonlat: Option<[f64; 2]>,
    pub polar: bool,
    /// Largest final-state miss the endpoint correction accepts.
    pub r_corr: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            origin_lonlat: None,
            polar: false,
            r_corr: 10.0,
        }
    }
}

/// Planarize → shift → differentiate → (polar) → heading shift → endpoint
/// correction. The result ends every demonstration exactly at the origin.
pub fn preprocess(trajs: &[RawTrajectory], cfg: &PreprocessConfig) -> Result<Dataset> {
    if trajs.is_empty() {
        return Err(Error::Validation("no trajectories to preprocess".into()));
    }
    let heading = trajs[0].heading.is_some();
    if trajs.iter().any(|t| t.heading.is_some() != heading) {
        return Err(Error::Validation("heading present in only some trajectories".into()));
    }
    let planar: Vec<RawTrajectory> = match cfg.origin_lonlat {
        Some(o) => trajs.iter().map(|t| planarize(t, o)).collect::<Result<_>>()?,
        None => trajs.to_vec(),
    };
    let (shifted, pos_shift) = shift_to_origin(&planar)?;
    let mut demos = shifted
        .iter()
        .map(differentiate)
        .collect::<Result<Vec<_>>>()?;
    if cfg.polar {
        if !heading || pos_shift.len() != 2 {
            return Err(Error::Dimension(
                "polar reduction needs planar positions with heading".into(),
            ));
        }
        demos = demos.iter().map(to_polar).collect::<Result<_>>()?;
    }
    let mut shift = pos_shift;
    if heading {
        let axis = demos[0].dim() - 1;
        let (s, c) = demos.iter().fold((0.0, 0.0), |(s, c), d| {
            let h = d.end()[axis];
            (s + h.sin(), c + h.cos())
        });
        let mean = s.atan2(c);
        for d in &mut demos {
            let end = d.end()[axis];
            // Keep the relative final heading in (−π, π].
            let adjust = wrap_angle(end - mean) - end;
            for x in &mut d.x {
                x[axis] += adjust;
            }
        }
        shift.push(mean);
    }
    let target = vec![0.0; demos[0].dim()];
    let demos = demos
        .iter()
        .map(|d| correct_endpoints(d, &target, cfg.r_corr))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(
        demos,
        DatasetMeta {
            projection: if cfg.origin_lonlat.is_some() {
                PROJECTION_LOCAL.into()
            } else {
                "none".into()
            },
            origin_lonlat: cfg.origin_lonlat,
            shift,
            scales: None,
            polar: cfg.polar,
            heading,
            extent: 0.0,
        },
    )?;
    ds.meta.extent = ds.extent();
    ds.meta.scales = Some(ds.state_std());
    Ok(ds)
}
