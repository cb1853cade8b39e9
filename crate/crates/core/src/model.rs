//! The learned artifact and its versioned JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clf::ClfParams;
use crate::controller::{ClosedLoopField, ControllerConfig};
use crate::dataset::DatasetMeta;
use crate::error::{Error, Result};
use crate::gmm::{GaussianComponent, GmmModel};
use crate::gmr::GmrCache;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MODEL_FORMAT: &str = "stable-model/1";

/// Mixture, CLF and controller settings plus everything needed to map
/// recording coordinates into the model frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StableModel<T = f64> {
    pub gmm: GmmModel<T>,
    pub clf: ClfParams<T>,
    pub controller: ControllerConfig,
    pub meta: DatasetMeta,
    pub j_init: f64,
    pub j_final: f64,
    /// Objective at initialization followed by one value per iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Free-form record of how the model was produced.
    pub provenance: Option<serde_json::Value>,
}

impl<T: Scalar> StableModel<T> {
    /// Wraps hand-built parameters; no fit statistics.
    pub fn from_parts(
        gmm: GmmModel<T>,
        clf: ClfParams<T>,
        controller: ControllerConfig,
        meta: DatasetMeta,
    ) -> Result<Self> {
        if gmm.dim != clf.dim() {
            return Err(Error::Dimension("mixture and CLF dimensions differ".into()));
        }
        Ok(Self {
            gmm,
            clf,
            controller,
            meta,
            j_init: 0.0,
            j_final: 0.0,
            history: Vec::new(),
            iterations: 0,
            converged: false,
            provenance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.gmm.dim
    }

    /// Per-axis scales between model and recording units (ones when the
    /// model was fitted on unscaled data).
    pub fn scales(&self) -> Vec<f64> {
        self.meta.scales.clone().unwrap_or_else(|| vec![1.0; self.dim()])
    }

    pub fn to_model(&self, x: &[f64]) -> Vec<T> {
        x.iter()
            .zip(self.scales())
            .map(|(&v, s)| T::lit(v / s))
            .collect()
    }

    pub fn to_physical(&self, x: &[T]) -> Vec<f64> {
        x.iter().zip(self.scales()).map(|(v, s)| v.re() * s).collect()
    }

    pub fn field(&self) -> Result<ClosedLoopField<T>> {
        ClosedLoopField::new(
            GmrCache::new(&self.gmm)?,
            self.clf.clone(),
            self.controller,
            self.meta.scales.clone(),
        )
    }

    pub fn cast<U: Scalar>(&self) -> StableModel<U> {
        StableModel {
            gmm: self.gmm.cast(),
            clf: self.clf.cast(),
            controller: self.controller,
            meta: self.meta.clone(),
            j_init: self.j_init,
            j_final: self.j_final,
            history: self.history.clone(),
            iterations: self.iterations,
            converged: self.converged,
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GmmBlock {
    #[serde(rename = "K")]
    k: usize,
    dim: usize,
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct ClfBlock {
    #[serde(rename = "L")]
    l: usize,
    dim: usize,
    #[serde(rename = "G_factors")]
    g_factors: Vec<Vec<Vec<f64>>>,
    centers: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
    gmm: GmmBlock,
    clf: ClfBlock,
    controller: ControllerConfig,
    meta: DatasetMeta,
    #[serde(rename = "J_init")]
    j_init: f64,
    #[serde(rename = "J_final")]
    j_final: f64,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl StableModel<f64> {
    pub fn to_json_string(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            provenance: self.provenance.clone(),
            gmm: GmmBlock {
                k: self.gmm.k(),
                dim: self.gmm.dim,
                priors: self.gmm.priors(),
                means: self.gmm.components.iter().map(|c| c.mean.clone()).collect(),
                covs: self.gmm.components.iter().map(|c| c.cov.rows()).collect(),
            },
            clf: ClfBlock {
                l: self.clf.l(),
                dim: self.clf.dim(),
                g_factors: self.clf.factors().iter().map(|g| g.rows()).collect(),
                centers: self.clf.centers().to_vec(),
            },
            controller: self.controller,
            meta: self.meta.clone(),
            j_init: self.j_init,
            j_final: self.j_final,
            history: self.history.clone(),
            iterations: self.iterations,
            converged: self.converged,
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported format {:?}, expected {MODEL_FORMAT:?}",
                f.format
            )));
        }
        let g = f.gmm;
        if g.priors.len() != g.k || g.means.len() != g.k || g.covs.len() != g.k {
            return Err(Error::ModelFormat("gmm block sizes disagree with K".into()));
        }
        let components = g
            .priors
            .iter()
            .zip(g.means)
            .zip(&g.covs)
            .map(|((&prior, mean), cov)| {
                Ok(GaussianComponent {
                    prior,
                    mean,
                    cov: Matrix::from_rows(cov)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let gmm = GmmModel::new(g.dim, components)?;
        gmm.validate()?;
        let c = f.clf;
        if c.g_factors.len() != c.l + 1 {
            return Err(Error::ModelFormat("clf block sizes disagree with L".into()));
        }
        let factors = c
            .g_factors
            .iter()
            .map(|r| Matrix::from_rows(r))
            .collect::<Result<Vec<_>>>()?;
        let clf = ClfParams::new(c.dim, factors, c.centers)?;
        f.controller.validate()?;
        let mut m = StableModel::from_parts(gmm, clf, f.controller, f.meta)?;
        m.j_init = f.j_init;
        m.j_final = f.j_final;
        m.history = f.history;
        m.iterations = f.iterations;
        m.converged = f.converged;
        m.provenance = f.provenance;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StableModel {
        let gmm = GmmModel::new(
            1,
            vec![
                GaussianComponent {
                    prior: 0.3,
                    mean: vec![0.1, -0.7],
                    cov: Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 0.5]]).unwrap(),
                },
                GaussianComponent {
                    prior: 0.7,
                    mean: vec![1.0 / 3.0, 2.0],
                    cov: Matrix::from_rows(&[vec![0.3, -0.1], vec![-0.1, 0.9]]).unwrap(),
                },
            ],
        )
        .unwrap();
        let clf = ClfParams::new(
            1,
            vec![Matrix::from_row_major(1, vec![0.9]), Matrix::from_row_major(1, vec![0.1])],
            vec![vec![-0.25]],
        )
        .unwrap();
        let mut meta = DatasetMeta::plain(1);
        meta.scales = Some(vec![2.5]);
        let mut m = StableModel::from_parts(gmm, clf, ControllerConfig::default(), meta).unwrap();
        m.history = vec![1.0, 0.5, 0.1 + 0.2];
        m.j_init = 1.0;
        m.j_final = 0.1 + 0.2;
        m.provenance = Some(serde_json::json!({"tool": "test", "k": 2}));
        m
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let m = sample();
        let s = m.to_json_string().unwrap();
        let back = StableModel::from_json_str(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json_string().unwrap(), s);
        assert!(s.contains("\"format\": \"stable-model/1\""));
    }

    #[test]
    fn rejects_unknown_format() {
        let s = sample().to_json_string().unwrap().replace("stable-model/1", "stable-model/9");
        assert!(matches!(StableModel::from_json_str(&s), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn coordinate_maps_invert() {
        let m = sample();
        let x = m.to_model(&[5.0]);
        assert_eq!(x, vec![2.0]);
        assert_eq!(m.to_physical(&x), vec![5.0]);
    }
}
