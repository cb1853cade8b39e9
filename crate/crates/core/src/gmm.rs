//! Gaussian mixture over joint `[x, v]` vectors, fitted by K-means++ seeding
//! followed by expectation–maximization.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::{lit, log_sum_exp, Scalar};

/// Relative size of the covariance floor: `ε = COV_FLOOR · trace(Σ_data) / D`.
pub const COV_FLOOR: f64 = 1e-6;

/// Components whose total responsibility drops below this are frozen.
pub const MIN_COMPONENT_MASS: f64 = 1e-12;

const KMEANS_MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent<T> {
    pub prior: T,
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

/// Mean and covariance of one component split into state/velocity blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition<T> {
    pub mu_x: Vec<T>,
    pub mu_v: Vec<T>,
    pub sigma_x: Matrix<T>,
    pub sigma_xv: Matrix<T>,
    pub sigma_vx: Matrix<T>,
    pub sigma_v: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel<T = f64> {
    /// State dimension `d`; components live in `ℝ^{2d}`.
    pub dim: usize,
    pub components: Vec<GaussianComponent<T>>,
}

impl<T: Scalar> GmmModel<T> {
    pub fn new(dim: usize, components: Vec<GaussianComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("a mixture needs at least one component".into()));
        }
        for (k, c) in components.iter().enumerate() {
            if c.mean.len() != 2 * dim || c.cov.n() != 2 * dim {
                return Err(Error::Dimension(format!(
                    "component {k} is not {0}-dimensional",
                    2 * dim
                )));
            }
        }
        Ok(Self { dim, components })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn joint_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn priors(&self) -> Vec<T> {
        self.components.iter().map(|c| c.prior).collect()
    }

    pub fn partition(&self, k: usize) -> Partition<T> {
        let d = self.dim;
        let c = &self.components[k];
        Partition {
            mu_x: c.mean[..d].to_vec(),
            mu_v: c.mean[d..].to_vec(),
            sigma_x: c.cov.block(0, 0, d),
            sigma_xv: c.cov.block(0, d, d),
            sigma_vx: c.cov.block(d, 0, d),
            sigma_v: c.cov.block(d, d, d),
        }
    }

    /// Components reordered so that new index `i` holds old `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            dim: self.dim,
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> GmmModel<U> {
        GmmModel {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| GaussianComponent {
                    prior: U::lit(c.prior.re()),
                    mean: crate::scalar::cast_slice(&c.mean),
                    cov: c.cov.cast(),
                })
                .collect(),
        }
    }

    /// Checks priors, finiteness and positive definiteness.
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.components.iter().map(|c| c.prior.re()).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("priors sum to {sum}, not 1")));
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.prior > T::zero()) || c.prior > T::one() {
                return Err(Error::Validation(format!("prior of component {k} outside (0, 1]")));
            }
            if !c.cov.is_finite() || c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::Validation(format!("component {k} is not finite")));
            }
            c.cov.cholesky()?;
        }
        Ok(())
    }

    fn densities(&self) -> Result<Vec<ComponentDensity<T>>> {
        self.components
            .iter()
            .map(|c| ComponentDensity::new(c.prior, &c.mean, &c.cov))
            .collect()
    }
}

/// `ln π_k + ln 𝒩(·; μ_k, Σ_k)` evaluator with the factorization cached.
#[derive(Clone, Debug)]
pub(crate) struct ComponentDensity<T> {
    mean: Vec<T>,
    chol: Cholesky<T>,
    log_weight: T,
}

impl<T: Scalar> ComponentDensity<T> {
    pub(crate) fn new(prior: T, mean: &[T], cov: &Matrix<T>) -> Result<Self> {
        let chol = cov.cholesky()?;
        Ok(Self::from_cholesky(prior, mean, chol))
    }

    pub(crate) fn from_cholesky(prior: T, mean: &[T], chol: Cholesky<T>) -> Self {
        let n = mean.len() as f64;
        let log_weight =
            prior.ln() - lit::<T>(0.5) * (lit::<T>(n * (2.0 * PI).ln()) + chol.log_det());
        Self {
            mean: mean.to_vec(),
            chol,
            log_weight,
        }
    }

    #[inline]
    pub(crate) fn log_weighted(&self, x: &[T]) -> T {
        let diff: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        self.log_weight - lit::<T>(0.5) * self.chol.mahalanobis_sq(&diff)
    }
}

/// Normalizes log-weights into probabilities. Falls back to uniform when
/// every entry is `-inf` or not finite.
pub(crate) fn normalize_log_weights<T: Scalar>(logw: &[T]) -> Vec<T> {
    let k = logw.len();
    let lse = log_sum_exp(logw);
    if !lse.is_finite() {
        return vec![lit::<T>(1.0 / k as f64); k];
    }
    let mut w: Vec<T> = logw.iter().map(|&l| (l - lse).exp()).collect();
    let s: T = w.iter().copied().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}

fn check_data<T: Scalar>(data: &[Vec<T>]) -> Result<usize> {
    let dim = data
        .first()
        .map(|p| p.len())
        .ok_or_else(|| Error::Validation("empty data set".into()))?;
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Dimension(format!(
            "joint [x, v] vectors must have even length, got {dim}"
        )));
    }
    if data.iter().any(|p| p.len() != dim) {
        return Err(Error::Dimension("data points differ in length".into()));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("data contains non-finite values".into()));
    }
    Ok(dim)
}

fn mean_of(points: &[&[f64]], dim: usize) -> Vec<f64> {
    let n = points.len().max(1) as f64;
    let mut m = vec![0.0; dim];
    for p in points {
        for (a, &b) in m.iter_mut().zip(p.iter()) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

fn covariance_of(points: &[&[f64]], mean: &[f64]) -> Matrix<f64> {
    let dim = mean.len();
    let n = points.len().max(1) as f64;
    let mut c = Matrix::zeros(dim);
    for p in points {
        for i in 0..dim {
            let di = p[i] - mean[i];
            for j in 0..dim {
                c[(i, j)] += di * (p[j] - mean[j]);
            }
        }
    }
    c.scale(1.0 / n)
}

/// `ε = COV_FLOOR · trace(Σ_data) / D`, never below a tiny absolute value.
pub fn covariance_floor<T: Scalar>(data: &[Vec<T>]) -> f64 {
    let pts: Vec<Vec<f64>> = data.iter().map(|p| p.iter().map(|v| v.re()).collect()).collect();
    let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    let dim = pts.first().map(|p| p.len()).unwrap_or(1);
    let mean = mean_of(&refs, dim);
    let tr = covariance_of(&refs, &mean).trace();
    (COV_FLOOR * tr / dim as f64).max(1e-300)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// K-means++ seeding plus Lloyd iterations; clusters become components.
pub fn kmeans_init<T: Scalar>(data: &[Vec<T>], k: usize, seed: u64) -> Result<GmmModel<T>> {
    let joint = check_data(data)?;
    if k == 0 {
        return Err(Error::InvalidConfig("K must be ≥ 1".into()));
    }
    if data.len() < k {
        return Err(Error::InvalidConfig(format!(
            "{} data points cannot seed {k} clusters",
            data.len()
        )));
    }
    let pts: Vec<Vec<f64>> = data.iter().map(|p| p.iter().map(|v| v.re()).collect()).collect();
    let n = pts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = vec![pts[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = pts.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(pts[next].clone());
        for (i, p) in pts.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        pts.par_iter()
            .map(|p| {
                let mut best = (0, f64::INFINITY);
                for (c, ctr) in centers.iter().enumerate() {
                    let d = sq_dist(p, ctr);
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best.0
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..KMEANS_MAX_ITERS {
        for (c, ctr) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64]> = pts
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p.as_slice())
                .collect();
            if !members.is_empty() {
                *ctr = mean_of(&members, joint);
            }
        }
        // Re-seed empty clusters at the point farthest from its centroid.
        for c in 0..k {
            if labels.iter().any(|&l| l == c) {
                continue;
            }
            let far = (0..n)
                .max_by(|&a, &b| {
                    let da = sq_dist(&pts[a], &centers[labels[a]]);
                    let db = sq_dist(&pts[b], &centers[labels[b]]);
                    da.total_cmp(&db)
                })
                .expect("non-empty data");
            centers[c] = pts[far].clone();
            labels[far] = c;
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }

    let eps = covariance_floor(data);
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<&[f64]> = pts
            .iter()
            .zip(&labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| p.as_slice())
            .collect();
        let (mean, cov) = if members.is_empty() {
            (centers[c].clone(), Matrix::zeros(joint))
        } else {
            let m = mean_of(&members, joint);
            let cv = covariance_of(&members, &m);
            (m, cv)
        };
        let prior = (members.len().max(1)) as f64 / n as f64;
        components.push(GaussianComponent {
            prior: T::lit(prior),
            mean: mean.into_iter().map(T::lit).collect(),
            cov: cov.add_diagonal(eps).cast(),
        });
    }
    let total: T = components.iter().map(|c| c.prior).sum();
    for c in &mut components {
        c.prior /= total;
    }
    GmmModel::new(joint / 2, components)
}

/// Posterior responsibilities `γ_k(x, v)`, one row per data point.
pub fn e_step<T: Scalar>(model: &GmmModel<T>, data: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let dens = model.densities()?;
    Ok(data
        .par_iter()
        .map(|p| {
            let logw: Vec<T> = dens.iter().map(|d| d.log_weighted(p)).collect();
            normalize_log_weights(&logw)
        })
        .collect())
}

/// Result of an M-step, with indices of components that were left unchanged
/// because they received (almost) no responsibility.
#[derive(Clone, Debug)]
pub struct MStep<T> {
    pub model: GmmModel<T>,
    pub frozen: Vec<usize>,
}

/// Closed-form weighted prior/mean/covariance updates. Covariances are
/// symmetrized and their spectrum floored at `ε` (see [`covariance_floor`]).
pub fn m_step<T: Scalar>(
    resp: &[Vec<T>],
    data: &[Vec<T>],
    previous: &GmmModel<T>,
) -> Result<MStep<T>> {
    let joint = check_data(data)?;
    let k = previous.k();
    if resp.len() != data.len() || resp.iter().any(|r| r.len() != k) {
        return Err(Error::Dimension("responsibility matrix shape mismatch".into()));
    }
    if joint != previous.joint_dim() {
        return Err(Error::Dimension("model and data dimensions differ".into()));
    }
    let n = lit::<T>(data.len() as f64);
    let eps = lit::<T>(covariance_floor(data));
    let mut frozen = Vec::new();
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let mass: T = resp.iter().map(|r| r[c]).sum();
        if mass.re() < MIN_COMPONENT_MASS {
            frozen.push(c);
            components.push(previous.components[c].clone());
            continue;
        }
        let mut mean = vec![T::zero(); joint];
        for (p, r) in data.iter().zip(resp) {
            for (m, &x) in mean.iter_mut().zip(p) {
                *m += r[c] * x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= mass);
        let mut cov = Matrix::zeros(joint);
        for (p, r) in data.iter().zip(resp) {
            let w = r[c];
            for i in 0..joint {
                let di = p[i] - mean[i];
                for j in 0..=i {
                    cov[(i, j)] += w * di * (p[j] - mean[j]);
                }
            }
        }
        for i in 0..joint {
            for j in 0..=i {
                let v = cov[(i, j)] / mass;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let cov = cov.symmetrize();
        let lmin = cov.min_eigenvalue();
        let cov = if lmin < eps { cov.add_diagonal(eps - lmin) } else { cov };
        components.push(GaussianComponent {
            prior: mass / n,
            mean,
            cov,
        });
    }
    let total: T = components.iter().map(|c| c.prior).sum();
    for c in &mut components {
        c.prior /= total;
    }
    Ok(MStep {
        model: GmmModel::new(previous.dim, components)?,
        frozen,
    })
}

/// `Σ_i ln Σ_k π_k 𝒩(p_i; μ_k, Σ_k)` evaluated in log space.
pub fn log_likelihood<T: Scalar>(model: &GmmModel<T>, data: &[Vec<T>]) -> Result<T> {
    let dens = model.densities()?;
    let per_point: Vec<T> = data
        .par_iter()
        .map(|p| {
            let logw: Vec<T> = dens.iter().map(|d| d.log_weighted(p)).collect();
            log_sum_exp(&logw)
        })
        .collect();
    Ok(per_point.into_iter().sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub k: usize,
    pub seed: u64,
    /// Relative log-likelihood change below which EM stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl EmConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmReport {
    /// Log-likelihood of the K-means initialization followed by one entry
    /// per EM iteration.
    pub loglik_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Components frozen at least once for lack of responsibility mass.
    pub frozen_components: Vec<usize>,
}

/// K-means initialization followed by EM until the relative change of the
/// log-likelihood drops below `tol` or `max_iter` iterations.
pub fn fit_em<T: Scalar>(data: &[Vec<T>], cfg: &EmConfig) -> Result<(GmmModel<T>, EmReport)> {
    let mut model = kmeans_init(data, cfg.k, cfg.seed)?;
    let mut ll = log_likelihood(&model, data)?.re();
    let mut report = EmReport {
        loglik_history: vec![ll],
        iterations: 0,
        converged: false,
        frozen_components: Vec::new(),
    };
    for _ in 0..cfg.max_iter {
        let resp = e_step(&model, data)?;
        let step = m_step(&resp, data, &model)?;
        for f in step.frozen {
            if !report.frozen_components.contains(&f) {
                report.frozen_components.push(f);
            }
        }
        model = step.model;
        let next = log_likelihood(&model, data)?.re();
        report.iterations += 1;
        report.loglik_history.push(next);
        let rel = (next - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        ll = next;
        if rel < cfg.tol {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}
