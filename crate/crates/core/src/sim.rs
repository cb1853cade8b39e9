//! Forward-Euler rollouts of the closed-loop field, with optional
//! disturbances, plus grid sampling of the energy and the field.
//!
//! Integration happens in model coordinates; traces are reported in
//! recording units except for the energy `V`, which stays in model units.

use std::io::Write;

use rayon::prelude::*;

use crate::controller::ClosedLoopField;
use crate::error::{Error, Result};
use crate::model::StableModel;

/// What happens to the vessel during a localized disturbance window.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalizedMode {
    /// Adds a drift velocity to the dynamics.
    Drift(Vec<f64>),
    /// Engine off: the nominal dynamics are replaced by the drift alone.
    FreezeDynamics(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Disturbance {
    #[default]
    None,
    /// Drift velocity (recording units per second) applied at every step.
    ConstantDrift(Vec<f64>),
    /// Active on `[t_start, t_start + duration)`.
    Localized {
        t_start: f64,
        duration: f64,
        mode: LocalizedMode,
    },
}

impl Disturbance {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check = |v: &[f64]| {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "disturbance vector has {} entries, state has {dim}",
                    v.len()
                )));
            }
            if !v.iter().all(|e| e.is_finite()) {
                return Err(Error::InvalidConfig("disturbance vector must be finite".into()));
            }
            Ok(())
        };
        match self {
            Disturbance::None => Ok(()),
            Disturbance::ConstantDrift(v) => check(v),
            Disturbance::Localized {
                t_start,
                duration,
                mode,
            } => {
                if !(*duration > 0.0) || !duration.is_finite() || !t_start.is_finite() {
                    return Err(Error::InvalidConfig(
                        "localized disturbance needs a finite start and duration > 0".into(),
                    ));
                }
                match mode {
                    LocalizedMode::Drift(v) | LocalizedMode::FreezeDynamics(v) => check(v),
                }
            }
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        match self {
            Disturbance::None => false,
            Disturbance::ConstantDrift(_) => true,
            Disturbance::Localized {
                t_start, duration, ..
            } => t >= *t_start && t < t_start + duration,
        }
    }

    /// Drift vector and whether nominal dynamics are suppressed at time `t`.
    fn at(&self, t: f64) -> Option<(&[f64], bool)> {
        if !self.is_active(t) {
            return None;
        }
        match self {
            Disturbance::None => None,
            Disturbance::ConstantDrift(v) => Some((v, false)),
            Disturbance::Localized { mode, .. } => match mode {
                LocalizedMode::Drift(v) => Some((v, false)),
                LocalizedMode::FreezeDynamics(v) => Some((v, true)),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub disturbance: Disturbance,
    pub control: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steps: 10_000,
            disturbance: Disturbance::None,
            control: true,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be ≥ 1".into()));
        }
        self.disturbance.validate(dim)
    }
}

/// One integration step; velocities are in recording units per second.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: f64,
    pub x: Vec<f64>,
    pub v_gmr: Vec<f64>,
    pub u: Vec<f64>,
    /// Velocity actually applied, disturbance included.
    pub v_total: Vec<f64>,
    pub energy: f64,
    pub disturbed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutTrace {
    pub steps: Vec<TraceStep>,
    pub reached_target: bool,
    pub steps_used: usize,
    /// The state left the divergence bound or became non-finite.
    pub diverged: bool,
}

impl RolloutTrace {
    pub fn final_state(&self) -> &[f64] {
        &self.steps.last().expect("traces hold at least one step").x
    }

    pub fn energies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.energy).collect()
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.x.clone()).collect()
    }
}

fn scale(v: &[f64], s: &[f64]) -> Vec<f64> {
    v.iter().zip(s).map(|(a, b)| a * b).collect()
}

/// Integrates `x ← x + dt·(v_gmr + u + η)` from `x0` (recording units)
/// until the target ball, `max_steps`, or divergence.
pub fn rollout(model: &StableModel, x0: &[f64], cfg: &RolloutConfig) -> Result<RolloutTrace> {
    let field = model.field()?;
    rollout_with_field(model, &field, x0, cfg)
}

fn rollout_with_field(
    model: &StableModel,
    field: &ClosedLoopField<f64>,
    x0: &[f64],
    cfg: &RolloutConfig,
) -> Result<RolloutTrace> {
    let d = model.dim();
    cfg.validate(d)?;
    if x0.len() != d || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation(format!("initial state must be {d} finite values")));
    }
    let scales = model.scales();
    let bound = 1e3 * model.meta.extent.max(f64::MIN_POSITIVE);
    let mut x = model.to_model(x0);
    let mut steps = Vec::new();
    let mut reached = false;
    let mut diverged = false;
    for i in 0..cfg.max_steps {
        let t = i as f64 * cfg.dt;
        let s = field.sample(&x);
        let (gmr, u) = if cfg.control {
            (s.v_gmr, s.u)
        } else {
            (s.v_gmr, vec![0.0; d])
        };
        let dist = cfg.disturbance.at(t);
        let v: Vec<f64> = match dist {
            Some((drift, true)) => drift.iter().zip(&scales).map(|(a, b)| a / b).collect(),
            Some((drift, false)) => (0..d).map(|j| gmr[j] + u[j] + drift[j] / scales[j]).collect(),
            None => (0..d).map(|j| gmr[j] + u[j]).collect(),
        };
        let phys = model.to_physical(&x);
        let norm = phys.iter().map(|a| a * a).sum::<f64>().sqrt();
        steps.push(TraceStep {
            t,
            x: phys,
            v_gmr: scale(&gmr, &scales),
            u: scale(&u, &scales),
            v_total: scale(&v, &scales),
            energy: s.value,
            disturbed: dist.is_some(),
        });
        if field.in_target(&x) {
            reached = true;
            break;
        }
        if !norm.is_finite() || norm > bound {
            diverged = true;
            break;
        }
        for (xj, vj) in x.iter_mut().zip(&v) {
            *xj += cfg.dt * vj;
        }
    }
    Ok(RolloutTrace {
        steps_used: steps.len(),
        steps,
        reached_target: reached,
        diverged,
    })
}

/// Disturbance-free rollouts from several starts, run in parallel.
pub fn streamline_bundle(
    model: &StableModel,
    starts: &[Vec<f64>],
    dt: f64,
    max_steps: usize,
    control: bool,
) -> Result<Vec<RolloutTrace>> {
    let field = model.field()?;
    let cfg = RolloutConfig {
        dt,
        max_steps,
        disturbance: Disturbance::None,
        control,
    };
    starts
        .par_iter()
        .map(|x0| rollout_with_field(model, &field, x0, &cfg))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub x: Vec<f64>,
    pub energy: f64,
    /// Closed-loop velocity in recording units.
    pub velocity: Vec<f64>,
}

/// Samples `V` and the closed-loop field on a regular grid over
/// `[lo, hi]` (recording units). The first axis varies slowest.
pub fn energy_grid(
    model: &StableModel,
    lo: &[f64],
    hi: &[f64],
    resolution: &[usize],
) -> Result<Vec<GridPoint>> {
    let d = model.dim();
    if lo.len() != d || hi.len() != d || resolution.len() != d {
        return Err(Error::Dimension(format!("grid bounds must be {d}-dimensional")));
    }
    for a in 0..d {
        if !(lo[a].is_finite() && hi[a].is_finite() && lo[a] < hi[a]) {
            return Err(Error::InvalidConfig(format!("degenerate bounds on axis {a}")));
        }
        if resolution[a] < 2 {
            return Err(Error::InvalidConfig("grid resolution must be ≥ 2 per axis".into()));
        }
    }
    let field = model.field()?;
    let scales = model.scales();
    let total: usize = resolution.iter().product();
    Ok((0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for a in (0..d).rev() {
                let i = idx % resolution[a];
                idx /= resolution[a];
                x[a] = lo[a] + (hi[a] - lo[a]) * i as f64 / (resolution[a] - 1) as f64;
            }
            let s = field.sample(&model.to_model(&x));
            GridPoint {
                velocity: scale(&s.v_total, &scales),
                energy: s.value,
                x,
            }
        })
        .collect())
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// `t,x1..xd,vgmr1..,u1..,vtot1..,V,disturbed`
pub fn write_trace_csv<W: Write>(trace: &RolloutTrace, comments: &[String], mut out: W) -> Result<()> {
    write_comments(&mut out, comments)?;
    let d = trace.steps.first().map_or(0, |s| s.x.len());
    let mut header = vec!["t".to_string()];
    for prefix in ["x", "vgmr", "u", "vtot"] {
        header.extend((1..=d).map(|i| format!("{prefix}{i}")));
    }
    header.push("V".into());
    header.push("disturbed".into());
    writeln!(out, "{}", header.join(","))?;
    for s in &trace.steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t,
            join(&s.x),
            join(&s.v_gmr),
            join(&s.u),
            join(&s.v_total),
            s.energy,
            u8::from(s.disturbed)
        )?;
    }
    Ok(())
}

/// `x1..xd,V,f1..fd`
pub fn write_grid_csv<W: Write>(grid: &[GridPoint], comments: &[String], mut out: W) -> Result<()> {
    write_comments(&mut out, comments)?;
    let d = grid.first().map_or(0, |g| g.x.len());
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("V".into());
    header.extend((1..=d).map(|i| format!("f{i}")));
    writeln!(out, "{}", header.join(","))?;
    for g in grid {
        writeln!(out, "{},{},{}", join(&g.x), g.energy, join(&g.velocity))?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::clf::ClfParams;
    use crate::controller::ControllerConfig;
    use crate::dataset::DatasetMeta;
    use crate::gmm::{GaussianComponent, GmmModel};
    use crate::linalg::Matrix;

    /// `f̂(x) = A x` with `V = |x|²`.
    pub(crate) fn linear_model(a: &[Vec<f64>], target_radius: f64) -> StableModel {
        let d = a.len();
        let am = Matrix::from_rows(a).unwrap();
        let gram = am.gram();
        let cov = Matrix::from_fn(2 * d, |i, j| match (i < d, j < d) {
            (true, true) => f64::from(u8::from(i == j)),
            (true, false) => am[(j - d, i)],
            (false, true) => am[(i - d, j)],
            (false, false) => gram[(i - d, j - d)] + f64::from(u8::from(i == j)),
        });
        let gmm = GmmModel::new(
            d,
            vec![GaussianComponent {
                prior: 1.0,
                mean: vec![0.0; 2 * d],
                cov,
            }],
        )
        .unwrap();
        let g = Matrix::identity(d).scale((1.0 - crate::clf::P_EPS).sqrt());
        let clf = ClfParams::new(d, vec![g], vec![]).unwrap();
        let mut meta = DatasetMeta::plain(d);
        meta.extent = 1.0;
        StableModel::from_parts(gmm, clf, ControllerConfig::new(0.05, target_radius).unwrap(), meta)
            .unwrap()
    }

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    #[test]
    fn start_at_target() {
        let m = linear_model(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 0.01);
        let tr = rollout(&m, &[0.0, 0.0], &RolloutConfig::default()).unwrap();
        assert_eq!(tr.steps.len(), 1);
        assert!(tr.reached_target);
    }

    #[test]
    fn exponential_decay() {
        let m = linear_model(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 0.01);
        let cfg = RolloutConfig {
            dt: 0.01,
            max_steps: 2000,
            ..Default::default()
        };
        let tr = rollout(&m, &[1.0, 0.0], &cfg).unwrap();
        assert!(tr.reached_target);
        for w in tr.steps.windows(2) {
            assert!(norm(&w[1].x) < norm(&w[0].x));
        }
        // Euler on x' = −x gives (1 − dt)^n exactly.
        let n = tr.steps.len() - 1;
        assert!((tr.final_state()[0] - 0.99f64.powi(n as i32)).abs() < 1e-12);
        assert!(tr.steps.iter().all(|s| s.u == vec![0.0, 0.0]));
    }

    #[test]
    fn outward_spiral_needs_control() {
        let a = vec![vec![0.1, -1.0], vec![1.0, 0.1]];
        let m = linear_model(&a, 0.05);
        let mut cfg = RolloutConfig {
            dt: 0.01,
            max_steps: 5000,
            control: false,
            ..Default::default()
        };
        let open = rollout(&m, &[1.0, 0.0], &cfg).unwrap();
        assert!(!open.reached_target);
        assert!(open.steps.windows(2).any(|w| w[1].energy > w[0].energy));
        cfg.control = true;
        let closed = rollout(&m, &[1.0, 0.0], &cfg).unwrap();
        assert!(closed.reached_target);
        for w in closed.steps.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-6);
        }
    }

    #[test]
    fn divergence_is_recorded() {
        let m = linear_model(&[vec![1.0]], 0.05);
        let cfg = RolloutConfig {
            control: false,
            ..Default::default()
        };
        let tr = rollout(&m, &[0.5], &cfg).unwrap();
        assert!(tr.diverged && !tr.reached_target);
        assert!(tr.steps.len() < cfg.max_steps);
    }

    #[test]
    fn engine_off_window() {
        let m = linear_model(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 0.01);
        let cfg = RolloutConfig {
            dt: 0.1,
            max_steps: 1000,
            disturbance: Disturbance::Localized {
                t_start: 1.0,
                duration: 0.5,
                mode: LocalizedMode::FreezeDynamics(vec![0.3, 0.1]),
            },
            control: true,
        };
        let tr = rollout(&m, &[1.0, 1.0], &cfg).unwrap();
        for s in &tr.steps {
            let inside = s.t >= 1.0 - 1e-12 && s.t < 1.5 - 1e-12;
            assert_eq!(s.disturbed, inside, "t = {}", s.t);
            if s.disturbed {
                assert_eq!(s.v_total, vec![0.3, 0.1]);
            }
        }
        assert!(tr.reached_target);
    }

    #[test]
    fn bundle_matches_single_rollouts() {
        let m = linear_model(&[vec![-0.5, 0.2], vec![-0.2, -0.5]], 0.01);
        assert!(streamline_bundle(&m, &[], 0.1, 100, true).unwrap().is_empty());
        let starts = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![-3.0, 0.5]];
        let b = streamline_bundle(&m, &starts, 0.1, 500, true).unwrap();
        assert_eq!(b[0], b[1]);
        let cfg = RolloutConfig {
            dt: 0.1,
            max_steps: 500,
            ..Default::default()
        };
        assert_eq!(b[2], rollout(&m, &starts[2], &cfg).unwrap());
    }

    #[test]
    fn grid_hand_values() {
        let m = linear_model(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 0.01);
        let g = energy_grid(&m, &[-1.0, -1.0], &[1.0, 1.0], &[3, 3]).unwrap();
        let v: Vec<f64> = g.iter().map(|p| p.energy).collect();
        let expect = [2.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 2.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-7);
        }
        assert_eq!(g[1].x, vec![-1.0, 0.0]);
        assert!(energy_grid(&m, &[0.0, 0.0], &[0.0, 1.0], &[3, 3]).is_err());
        assert!(energy_grid(&m, &[0.0, 0.0], &[1.0, 1.0], &[1, 3]).is_err());
    }

    #[test]
    fn csv_layout() {
        let m = linear_model(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 0.5);
        let tr = rollout(&m, &[1.0, 0.0], &RolloutConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &["v1".into()], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("# v1"));
        assert_eq!(
            lines.next(),
            Some("t,x1,x2,vgmr1,vgmr2,u1,u2,vtot1,vtot2,V,disturbed")
        );
        assert_eq!(lines.count(), tr.steps.len());
    }
}
