//! Joint fit of the mixture and the CLF so that the closed-loop velocity
//! `f̂(x) + û(x)` reproduces the demonstrations.
//!
//! All parameters are packed into one unconstrained vector: softmax logits
//! for the priors, raw means, and lower-triangular factors (log diagonal for
//! the covariances, plain for `G_l`). Every vector decodes to a feasible
//! model, so the problem is minimized with [`crate::optim::minimize`].
//!
//! Gradients are exact: the objective is generic over [`Scalar`] and is
//! evaluated once per coordinate on [`Dual`] numbers.

use rayon::prelude::*;

use crate::clf::ClfParams;
use crate::controller::{ClosedLoopField, ControllerConfig};
use crate::dataset::Dataset;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::gmm::{fit_em, EmConfig, GaussianComponent, GmmModel};
use crate::gmr::GmrCache;
use crate::linalg::{pack_lower, tri_len, unpack_lower};
use crate::model::StableModel;
use crate::optim::{minimize, LbfgsConfig, StopReason};
use crate::scalar::{lit, norm_sq, Scalar};

/// Layout of the flat parameter vector for `K` components, `L` asymmetric
/// terms and state dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ThetaLayout {
    pub dim: usize,
    pub k: usize,
    pub l: usize,
}

impl ThetaLayout {
    pub fn new(dim: usize, k: usize, l: usize) -> Self {
        Self { dim, k, l }
    }

    /// Logit, mean and covariance factor of one component.
    fn comp_len(&self) -> usize {
        1 + 2 * self.dim + tri_len(2 * self.dim)
    }

    fn clf_offset(&self) -> usize {
        self.k * self.comp_len()
    }

    pub fn len(&self) -> usize {
        self.clf_offset() + (self.l + 1) * tri_len(self.dim) + self.l * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encode(&self, gmm: &GmmModel<f64>, clf: &ClfParams<f64>) -> Result<Vec<f64>> {
        if gmm.dim != self.dim || gmm.k() != self.k || clf.dim() != self.dim || clf.l() != self.l {
            return Err(Error::Dimension("parameters do not match the layout".into()));
        }
        let mut theta = Vec::with_capacity(self.len());
        for c in &gmm.components {
            theta.push(c.prior.ln());
            theta.extend_from_slice(&c.mean);
            let mut l = c.cov.cholesky()?.factor().clone();
            for i in 0..l.n() {
                l[(i, i)] = l[(i, i)].ln();
            }
            theta.extend(pack_lower(&l));
        }
        for g in clf.factors() {
            theta.extend(pack_lower(g));
        }
        for c in clf.centers() {
            theta.extend_from_slice(c);
        }
        Ok(theta)
    }

    pub fn decode<T: Scalar>(&self, theta: &[T]) -> Result<(GmmModel<T>, ClfParams<T>)> {
        if theta.len() != self.len() {
            return Err(Error::Dimension(format!(
                "parameter vector has {} entries, layout needs {}",
                theta.len(),
                self.len()
            )));
        }
        let (d, n2) = (self.dim, 2 * self.dim);
        let cl = self.comp_len();
        let logits: Vec<T> = (0..self.k).map(|k| theta[k * cl]).collect();
        let top = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let ex: Vec<T> = logits.iter().map(|&z| (z - top).exp()).collect();
        let total: T = ex.iter().copied().sum();
        let components = (0..self.k)
            .map(|k| {
                let block = &theta[k * cl..(k + 1) * cl];
                let mean = block[1..1 + n2].to_vec();
                let mut l = unpack_lower(n2, &block[1 + n2..]);
                for i in 0..n2 {
                    l[(i, i)] = l[(i, i)].exp();
                }
                GaussianComponent {
                    prior: ex[k] / total,
                    mean,
                    cov: l.gram(),
                }
            })
            .collect();
        let gmm = GmmModel::new(d, components)?;
        let mut off = self.clf_offset();
        let factors = (0..=self.l)
            .map(|_| {
                let g = unpack_lower(d, &theta[off..off + tri_len(d)]);
                off += tri_len(d);
                g
            })
            .collect();
        let centers = (0..self.l)
            .map(|_| {
                let c = theta[off..off + d].to_vec();
                off += d;
                c
            })
            .collect();
        Ok((gmm, ClfParams::new(d, factors, centers)?))
    }
}

/// `J(θ) = (1/2NM) Σ |v − v̂(x)|²` over a (normalized) training set.
#[derive(Clone, Debug)]
pub struct Objective {
    layout: ThetaLayout,
    xs: Vec<Vec<f64>>,
    vs: Vec<Vec<f64>>,
    controller: ControllerConfig,
    scales: Option<Vec<f64>>,
}

impl Objective {
    /// `scales` maps dataset coordinates back to recording units for the
    /// controller's target-radius test; `None` means the data is unscaled.
    pub fn new(
        dataset: &Dataset,
        layout: ThetaLayout,
        controller: ControllerConfig,
        scales: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dataset.num_points() == 0 {
            return Err(Error::Validation("objective needs at least one data point".into()));
        }
        if dataset.dim != layout.dim {
            return Err(Error::Dimension("dataset and layout dimensions differ".into()));
        }
        Ok(Self {
            layout,
            xs: dataset.states().cloned().collect(),
            vs: dataset.velocities().cloned().collect(),
            controller,
            scales,
        })
    }

    pub fn layout(&self) -> ThetaLayout {
        self.layout
    }

    pub fn field<T: Scalar>(&self, gmm: &GmmModel<T>, clf: ClfParams<T>) -> Result<ClosedLoopField<T>> {
        ClosedLoopField::new(GmrCache::new(gmm)?, clf, self.controller, self.scales.clone())
    }

    /// Objective for explicit parameters; `+∞` when they are unusable.
    pub fn value_of<T: Scalar>(&self, gmm: &GmmModel<T>, clf: &ClfParams<T>) -> T {
        match self.field(gmm, clf.clone()) {
            Ok(f) => self.value_for_field(&f),
            Err(_) => T::infinity(),
        }
    }

    fn value_for_field<T: Scalar>(&self, field: &ClosedLoopField<T>) -> T {
        let errs: Vec<T> = self
            .xs
            .par_iter()
            .zip(&self.vs)
            .map(|(x, v)| {
                let xt: Vec<T> = x.iter().map(|&a| lit(a)).collect();
                let vh = field.closed_loop_velocity(&xt);
                let e: Vec<T> = v.iter().zip(&vh).map(|(&a, &b)| lit::<T>(a) - b).collect();
                norm_sq(&e)
            })
            .collect();
        let sum: T = errs.into_iter().sum();
        let j = sum / lit::<T>(2.0 * self.xs.len() as f64);
        if j.is_finite() {
            j
        } else {
            T::infinity()
        }
    }

    pub fn value<T: Scalar>(&self, theta: &[T]) -> T {
        match self.layout.decode(theta) {
            Ok((gmm, clf)) => self.value_of(&gmm, &clf),
            Err(_) => T::infinity(),
        }
    }

    /// Exact gradient, one dual-number pass per coordinate.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (0..theta.len())
            .into_par_iter()
            .map(|i| {
                let seeded: Vec<Dual<f64>> = theta
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| if i == j { Dual::variable(v) } else { Dual::constant(v) })
                    .collect();
                let g = self.value(&seeded).eps;
                if g.is_finite() {
                    g
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    pub k: usize,
    pub l: usize,
    pub seed: u64,
    pub controller: ControllerConfig,
    /// Stop once `J` drops below this value; `None` selects 1% of the
    /// mean squared (normalized) speed.
    pub threshold: Option<f64>,
    pub max_outer_iters: usize,
    pub stagnation_limit: usize,
    pub lbfgs_memory: usize,
    /// Divide states and velocities by the per-axis state spread before fitting.
    pub scale_normalization: bool,
    pub em_tol: f64,
    pub em_max_iter: usize,
}

impl LearnConfig {
    pub fn new(k: usize, l: usize, seed: u64) -> Self {
        Self {
            k,
            l,
            seed,
            controller: ControllerConfig::default(),
            threshold: None,
            max_outer_iters: 200,
            stagnation_limit: 20,
            lbfgs_memory: 10,
            scale_normalization: true,
            em_tol: 1e-6,
            em_max_iter: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!("threshold must be > 0, got {t}")));
            }
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::InvalidConfig("optimizer memory must be ≥ 1".into()));
        }
        self.controller.validate()
    }
}

/// The training problem in normalized coordinates.
pub struct Problem {
    pub objective: Objective,
    pub data: Dataset,
    pub scales: Option<Vec<f64>>,
}

impl Problem {
    pub fn new(dataset: &Dataset, cfg: &LearnConfig) -> Result<Self> {
        let scales = if cfg.scale_normalization {
            Some(dataset.meta.scales.clone().unwrap_or_else(|| dataset.state_std()))
        } else {
            None
        };
        let data = match &scales {
            Some(s) => dataset.scaled(s),
            None => dataset.clone(),
        };
        let layout = ThetaLayout::new(dataset.dim, cfg.k, cfg.l);
        let objective = Objective::new(&data, layout, cfg.controller, scales.clone())?;
        Ok(Self {
            objective,
            data,
            scales,
        })
    }
}

/// EM initialization, identity CLF, then quasi-Newton descent on `J`.
pub fn fit(dataset: &Dataset, cfg: &LearnConfig) -> Result<StableModel> {
    cfg.validate()?;
    let problem = Problem::new(dataset, cfg)?;
    let obj = &problem.objective;
    let layout = obj.layout();
    let mut em = EmConfig::new(cfg.k, cfg.seed);
    em.tol = cfg.em_tol;
    em.max_iter = cfg.em_max_iter;
    let (gmm0, report) = fit_em(&problem.data.joint_points(), &em)?;
    log::info!(
        "EM: {} iterations, log-likelihood {:.6}",
        report.iterations,
        report.loglik_history.last().copied().unwrap_or(f64::NAN)
    );
    let clf0 = ClfParams::init_identity(dataset.dim, cfg.l);
    let theta0 = layout.encode(&gmm0, &clf0)?;
    let threshold = cfg
        .threshold
        .unwrap_or_else(|| 0.01 * problem.data.mean_squared_speed());
    let opts = LbfgsConfig {
        memory: cfg.lbfgs_memory,
        max_iters: cfg.max_outer_iters,
        stagnation_limit: cfg.stagnation_limit,
        target: threshold,
        ..LbfgsConfig::default()
    };
    let out = minimize(
        |t| obj.value(t),
        |t| obj.gradient(t),
        theta0.clone(),
        &opts,
    );
    log::info!(
        "optimizer: {} iterations, J {:.6e} -> {:.6e} ({:?})",
        out.iterations,
        out.history[0],
        out.f,
        out.stop
    );
    let (gmm, clf) = if out.iterations == 0 {
        (gmm0, clf0)
    } else {
        layout.decode(&out.x)?
    };
    let j_final = obj.value_of(&gmm, &clf);
    let mut meta = dataset.meta.clone();
    meta.scales = problem.scales.clone();
    Ok(StableModel {
        gmm,
        clf,
        controller: cfg.controller,
        meta,
        j_init: out.history[0],
        j_final,
        history: out.history,
        iterations: out.iterations,
        converged: out.stop == StopReason::TargetReached,
        provenance: None,
    })
}
