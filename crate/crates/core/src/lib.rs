//! Learning stable motion primitives from demonstrations.
//!
//! A Gaussian mixture over joint (state, velocity) data gives a regression
//! estimate of the dynamics; a weighted-sum-of-asymmetric-quadratics control
//! Lyapunov function and Sontag's formula add a correction that makes the
//! target globally attractive. Mixture and CLF parameters are then tuned
//! jointly so the corrected field still reproduces the demonstrations.
//!
//! The numerical core is generic over [`Scalar`] (`f32`, `f64` and the
//! forward-mode [`dual::Dual`] used for exact gradients). The aliases below
//! name the common `f64` instantiations.

pub mod bench;
pub mod clf;
pub mod controller;
pub mod dataset;
pub mod dual;
pub mod error;
pub mod gmm;
pub mod gmr;
pub mod learn;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Gmm = gmm::GmmModel<f64>;
pub type Gmm32 = gmm::GmmModel<f32>;
pub type Gmr = gmr::GmrCache<f64>;
pub type Gmr32 = gmr::GmrCache<f32>;
pub type Clf = clf::ClfParams<f64>;
pub type Clf32 = clf::ClfParams<f32>;
pub type Field = controller::ClosedLoopField<f64>;
pub type Field32 = controller::ClosedLoopField<f32>;
pub type Model = model::StableModel<f64>;
pub type Model32 = model::StableModel<f32>;
pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type Demonstration = dataset::Demonstration<f64>;
