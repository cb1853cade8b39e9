//! Weighted sum of asymmetric quadratic functions used as the control
//! Lyapunov function:
//!
//! `V(x) = xᵀP₀x + Σ_l s₊(σ_l) σ_l(x)²`, with `σ_l(x) = xᵀP_l(x − μ_l)`
//! and `s₊(σ) = 0` for `σ < 0`, `1` otherwise.
//!
//! Each `P_l` is stored through an unconstrained lower-triangular factor,
//! `P_l = G_l G_lᵀ + εI`, so any factor values give a valid function.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, lit, Scalar};

/// Diagonal shift keeping every `P_l` strictly positive definite.
pub const P_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ClfParams<T = f64> {
    dim: usize,
    factors: Vec<Matrix<T>>,
    centers: Vec<Vec<T>>,
    p: Vec<Matrix<T>>,
}

impl<T: Scalar> ClfParams<T> {
    /// `factors` holds `G_0..G_L` (only the lower triangle is used) and
    /// `centers` holds `μ_1..μ_L`.
    pub fn new(dim: usize, factors: Vec<Matrix<T>>, centers: Vec<Vec<T>>) -> Result<Self> {
        if factors.len() != centers.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} factors need {} centers, got {}",
                factors.len(),
                factors.len().saturating_sub(1),
                centers.len()
            )));
        }
        if factors.iter().any(|g| g.n() != dim) || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::Dimension(format!("CLF parameters must be {dim}-dimensional")));
        }
        let factors: Vec<Matrix<T>> = factors.iter().map(Matrix::lower).collect();
        let eps = lit::<T>(P_EPS);
        let p = factors.iter().map(|g| g.gram().add_diagonal(eps)).collect();
        Ok(Self {
            dim,
            factors,
            centers,
            p,
        })
    }

    /// `G_l = I` and `μ_l = 0` for every term.
    pub fn init_identity(dim: usize, l: usize) -> Self {
        Self::new(
            dim,
            vec![Matrix::identity(dim); l + 1],
            vec![vec![T::zero(); dim]; l],
        )
        .expect("identity parameters are consistent")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of asymmetric terms `L`.
    pub fn l(&self) -> usize {
        self.centers.len()
    }

    pub fn factors(&self) -> &[Matrix<T>] {
        &self.factors
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    /// Reconstructed `P_l`.
    pub fn p(&self, l: usize) -> &Matrix<T> {
        &self.p[l]
    }

    fn sigma(&self, l: usize, x: &[T]) -> (T, Vec<T>) {
        let c = &self.centers[l - 1];
        let dx: Vec<T> = x.iter().zip(c).map(|(&a, &m)| a - m).collect();
        let pdx = self.p[l].mul_vec(&dx);
        (dot(x, &pdx), pdx)
    }

    /// `σ_l(x)` for `l = 1..=L`.
    pub fn sigmas(&self, x: &[T]) -> Vec<T> {
        (1..=self.l()).map(|l| self.sigma(l, x).0).collect()
    }

    pub fn value(&self, x: &[T]) -> T {
        let mut v = self.p[0].bilinear(x, x);
        for l in 1..=self.l() {
            let (s, _) = self.sigma(l, x);
            if s >= T::zero() {
                v += s * s;
            }
        }
        v
    }

    /// `∇V(x) = (P₀+P₀ᵀ)x + Σ_l 2 s₊(σ_l) σ_l (P_l(x−μ_l) + P_lᵀx)`.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        self.value_and_gradient(x).1
    }

    pub fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        let p0x = self.p[0].mul_vec(x);
        let p0tx = self.p[0].transpose().mul_vec(x);
        let mut v = dot(x, &p0x);
        let mut g: Vec<T> = p0x.iter().zip(&p0tx).map(|(&a, &b)| a + b).collect();
        let two = lit::<T>(2.0);
        for l in 1..=self.l() {
            let (s, pdx) = self.sigma(l, x);
            if s < T::zero() {
                continue;
            }
            v += s * s;
            let ptx = self.p[l].transpose().mul_vec(x);
            for ((gi, &a), &b) in g.iter_mut().zip(&pdx).zip(&ptx) {
                *gi += two * s * (a + b);
            }
        }
        (v, g)
    }

    pub fn cast<U: Scalar>(&self) -> ClfParams<U> {
        ClfParams::new(
            self.dim,
            self.factors.iter().map(|g| g.cast()).collect(),
            self.centers.iter().map(|c| crate::scalar::cast_slice(c)).collect(),
        )
        .expect("cast preserves shapes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_params(p0: f64, p1: f64, mu: f64) -> ClfParams<f64> {
        let g = |p: f64| Matrix::from_row_major(1, vec![(p - P_EPS).sqrt()]);
        ClfParams::new(1, vec![g(p0), g(p1)], vec![vec![mu]]).unwrap()
    }

    #[test]
    fn value_at_origin_is_zero() {
        let c = ClfParams::<f64>::init_identity(3, 2);
        assert_eq!(c.value(&[0.0; 3]), 0.0);
        assert_eq!(c.gradient(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn pure_quadratic() {
        let c: ClfParams<f64> = ClfParams::new(2, vec![Matrix::identity(2)], vec![]).unwrap();
        assert!((c.value(&[3.0, 4.0]) - 25.0).abs() < 1e-6);
        let g = c.gradient(&[1.0, 0.0]);
        assert!((g[0] - 2.0).abs() < 1e-7 && g[1].abs() < 1e-12);
    }

    #[test]
    fn asymmetric_term_hand_values() {
        let c = scalar_params(1.0, 1.0, 2.0);
        assert!((c.value(&[1.0]) - 1.0).abs() < 1e-12);
        assert!((c.value(&[3.0]) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn identity_init_with_one_term() {
        let c = ClfParams::<f64>::init_identity(2, 1);
        let x = [0.7, -1.3];
        let r2 = x[0] * x[0] + x[1] * x[1];
        assert!((c.value(&x) - (r2 + r2 * r2)).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 3;
        let factors: Vec<Matrix<f64>> = (0..3)
            .map(|_| Matrix::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let centers: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let c = ClfParams::new(d, factors, centers).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            if c.sigmas(&x).iter().any(|s| s.abs() < 1e-3) {
                continue;
            }
            let g = c.gradient(&x);
            for i in 0..d {
                let h = 1e-5;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (c.value(&xp) - c.value(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        assert!(ClfParams::<f64>::new(2, vec![Matrix::identity(2)], vec![vec![0.0, 0.0]]).is_err());
        assert!(ClfParams::<f64>::new(2, vec![Matrix::identity(3)], vec![]).is_err());
    }
}
