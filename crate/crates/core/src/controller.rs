//! Sontag-formula correction on top of the regression estimate.
//!
//! With `a(x) = ∇V(x)ᵀ f̂(x)`, `b(x) = ∇V(x)` and
//! `ρ = ρ₀ √(a² + |b|⁴)`, the correction is
//! `û = −(a + ρ) b / |b|²` when `a + ρ > 0` and zero otherwise, which gives
//! `∇Vᵀ(f̂ + û) = −ρ` wherever it is active.

use serde::{Deserialize, Serialize};

use crate::clf::ClfParams;
use crate::error::{Error, Result};
use crate::gmr::GmrCache;
use crate::scalar::{dot, lit, norm_sq, Scalar};

/// Below this value of `|∇V|²` the correction is switched off.
pub const B_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub rho0: f64,
    /// Radius (recording units) of the ball around the target where the
    /// correction is zeroed and a rollout counts as arrived.
    pub target_radius: f64,
}

impl ControllerConfig {
    pub fn new(rho0: f64, target_radius: f64) -> Result<Self> {
        let cfg = Self { rho0, target_radius };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return Err(Error::InvalidConfig(format!("rho0 must be > 0, got {}", self.rho0)));
        }
        if !(self.target_radius >= 0.0) || !self.target_radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "target_radius must be ≥ 0, got {}",
                self.target_radius
            )));
        }
        Ok(())
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            rho0: 0.2,
            target_radius: 0.5,
        }
    }
}

/// Everything computed for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample<T> {
    pub value: T,
    pub v_gmr: Vec<T>,
    pub u: Vec<T>,
    pub v_total: Vec<T>,
    pub a: T,
    pub b: Vec<T>,
    pub rho: T,
    pub active: bool,
}

/// Regression estimate plus stabilizing correction. States passed to the
/// field are in model (normalized) coordinates; `scales` maps them back to
/// recording units for the target-radius test.
#[derive(Clone, Debug)]
pub struct ClosedLoopField<T = f64> {
    gmr: GmrCache<T>,
    clf: ClfParams<T>,
    cfg: ControllerConfig,
    scales: Vec<f64>,
}

impl<T: Scalar> ClosedLoopField<T> {
    pub fn new(
        gmr: GmrCache<T>,
        clf: ClfParams<T>,
        cfg: ControllerConfig,
        scales: Option<Vec<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if gmr.dim() != clf.dim() {
            return Err(Error::Dimension(format!(
                "regression is {}-dimensional but the CLF is {}-dimensional",
                gmr.dim(),
                clf.dim()
            )));
        }
        let scales = scales.unwrap_or_else(|| vec![1.0; gmr.dim()]);
        if scales.len() != gmr.dim() {
            return Err(Error::Dimension("scale vector length differs from state dimension".into()));
        }
        Ok(Self {
            gmr,
            clf,
            cfg,
            scales,
        })
    }

    pub fn dim(&self) -> usize {
        self.gmr.dim()
    }

    pub fn gmr(&self) -> &GmrCache<T> {
        &self.gmr
    }

    pub fn clf(&self) -> &ClfParams<T> {
        &self.clf
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `|x|` in recording units.
    pub fn physical_norm(&self, x: &[T]) -> f64 {
        x.iter()
            .zip(&self.scales)
            .map(|(v, s)| (v.re() * s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn in_target(&self, x: &[T]) -> bool {
        self.physical_norm(x) <= self.cfg.target_radius
    }

    /// `(a, b)` with `a = ⟨∇V, f̂⟩`, `b = ∇V`.
    pub fn a_b_terms(&self, x: &[T]) -> (T, Vec<T>) {
        let b = self.clf.gradient(x);
        let a = dot(&b, &self.gmr.estimate(x));
        (a, b)
    }

    pub fn control(&self, x: &[T]) -> Vec<T> {
        self.sample(x).u
    }

    pub fn closed_loop_velocity(&self, x: &[T]) -> Vec<T> {
        self.sample(x).v_total
    }

    pub fn sample(&self, x: &[T]) -> FieldSample<T> {
        let v_gmr = self.gmr.estimate(x);
        let (value, b) = self.clf.value_and_gradient(x);
        let a = dot(&b, &v_gmr);
        let bb = norm_sq(&b);
        let rho0 = lit::<T>(self.cfg.rho0);
        let mut u = vec![T::zero(); x.len()];
        let mut rho = T::zero();
        let mut active = false;
        if bb.re() >= B_FLOOR && !self.in_target(x) {
            rho = rho0 * (a * a + bb * bb).sqrt();
            let gain = a + rho;
            if gain > T::zero() {
                active = true;
                let k = gain / bb;
                for (ui, &bi) in u.iter_mut().zip(&b) {
                    *ui = -k * bi;
                }
            }
        }
        let v_total = if active {
            v_gmr.iter().zip(&u).map(|(&f, &c)| f + c).collect()
        } else {
            v_gmr.clone()
        };
        FieldSample {
            value,
            v_gmr,
            u,
            v_total,
            a,
            b,
            rho,
            active,
        }
    }
}
