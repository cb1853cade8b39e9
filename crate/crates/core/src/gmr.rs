//! Gaussian mixture regression: the velocity estimate `v̂(x)` as the
//! responsibility-weighted sum of per-component conditional means.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::{normalize_log_weights, ComponentDensity, GmmModel};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
struct GmrComponent<T> {
    marginal: ComponentDensity<T>,
    mu_x: Vec<T>,
    mu_v: Vec<T>,
    /// `Σ_vx (Σ_x)⁻¹`.
    gain: Matrix<T>,
}

/// Per-component factorizations of a [`GmmModel`], precomputed once so
/// each query costs `O(K d²)`.
#[derive(Clone, Debug)]
pub struct GmrCache<T = f64> {
    dim: usize,
    comps: Vec<GmrComponent<T>>,
}

impl<T: Scalar> GmrCache<T> {
    pub fn new(model: &GmmModel<T>) -> Result<Self> {
        let comps = (0..model.k())
            .map(|k| {
                let p = model.partition(k);
                let chol = p.sigma_x.cholesky().map_err(|e| {
                    Error::Factorization(format!("state block of component {k}: {e}"))
                })?;
                // Σ_x⁻¹ Σ_xv = (Σ_vx Σ_x⁻¹)ᵀ
                let gain = chol.solve_matrix(&p.sigma_xv).transpose();
                Ok(GmrComponent {
                    marginal: ComponentDensity::from_cholesky(
                        model.components[k].prior,
                        &p.mu_x,
                        chol,
                    ),
                    mu_x: p.mu_x,
                    mu_v: p.mu_v,
                    gain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: model.dim,
            comps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.comps.len()
    }

    /// Normalized marginal responsibilities `γ_k(x)`.
    pub fn weights(&self, x: &[T]) -> Vec<T> {
        let logw: Vec<T> = self.comps.iter().map(|c| c.marginal.log_weighted(x)).collect();
        normalize_log_weights(&logw)
    }

    /// Conditional mean `μ_k^v + Σ_k^{vx}(Σ_k^x)⁻¹(x − μ_k^x)` of one component.
    pub fn component_mean(&self, k: usize, x: &[T]) -> Vec<T> {
        let c = &self.comps[k];
        let dx: Vec<T> = x.iter().zip(&c.mu_x).map(|(&a, &m)| a - m).collect();
        let corr = c.gain.mul_vec(&dx);
        c.mu_v.iter().zip(corr).map(|(&m, r)| m + r).collect()
    }

    /// `v̂(x) = Σ_k γ_k(x) (μ_k^v + Σ_k^{vx}(Σ_k^x)⁻¹(x − μ_k^x))`.
    pub fn estimate(&self, x: &[T]) -> Vec<T> {
        let w = self.weights(x);
        let mut v = vec![T::zero(); self.dim];
        for (k, &g) in w.iter().enumerate() {
            for (acc, m) in v.iter_mut().zip(self.component_mean(k, x)) {
                *acc += g * m;
            }
        }
        v
    }

    pub fn batch_estimate(&self, xs: &[Vec<T>]) -> Vec<Vec<T>> {
        xs.par_iter().map(|x| self.estimate(x)).collect()
    }
}
