//! Probabilistically robust learning toolkit.
//!
//! The crate bundles the pieces needed to study learning under a tolerance
//! for rare perturbations: norm-ball perturbation sampling, empirical
//! rho-essential-supremum and CVaR estimators, closed-form risk oracles for
//! a two-class Gaussian mixture and for linear regression, a CVaR-based
//! training loop with standard baselines, robustness metrics, an exact
//! interval simulator for a shattering construction, and a water-filling
//! verifier for the CVaR dual.
//!
//! Closed forms and Monte-Carlo estimators come in pairs throughout so each
//! can be validated against the other.

pub mod dataset;
pub mod dual;
pub mod error;
pub mod eval;
pub mod gaussmix;
pub mod linreg;
pub mod math;
pub mod models;
pub mod perturb;
pub mod riskcore;
pub mod rng;
pub mod trainer;
pub mod vcsim;

pub use dataset::Dataset;
pub use dual::{DiscreteAtoms, DualDensity};
pub use error::{Error, Result};
pub use eval::MetricsReport;
pub use gaussmix::{GaussianMixtureSpec, LinearHypothesis};
pub use linreg::RegressionSpec;
pub use models::{DifferentiableModel, ModelKind};
pub use perturb::{NormKind, PerturbationSpec};
pub use riskcore::{CvarResult, LossSample};
pub use trainer::{TrainConfig, TrainMethod, TrainOutput};
pub use vcsim::{HypothesisClassHo, LossMode};

