//! Theoretical objects: tail classification, moment thresholds, the
//! Feynman–Kac potential, drift-inequality and `𝒜_m` grid certificates.

use thiserror::Error;

mod am;
mod classify;
pub mod generator;
mod lyapunov;
mod oracles;
mod theta;

pub use am::{check_am, check_am_with, AmCertificate, AmCondition, AmOptions};
pub use classify::{
    classify, classify_matrix, moment_upper_threshold, spekf_exact_threshold, ClassRange, TailPrediction,
};
pub use generator::{apply_generator, carre_du_champ, GeneratorFn, Jet};
pub use lyapunov::{search_eta, verify_drift_inequality, EtaSearch, InequalityId, LyapunovCheckReport, Slack};
pub use oracles::{gamma_integral_oracle, gamma_integral_quadrature, surrogate_moment};
pub use theta::{theta_feynman_kac, ThetaEstimate, ThetaOptions};

use crate::analysis::AnalysisError;
use crate::integrate::IntegrateError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("a contraction certificate is required for {0}")]
    MissingCertificate(String),
    #[error("damping is not globally Lipschitz")]
    InfiniteLipschitz,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("horizon {t} leaves truncation bound {bound:.3e} above tolerance {tolerance:.1e}")]
    HorizonTooShort { t: f64, bound: f64, tolerance: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub(crate) fn domain(msg: impl Into<String>) -> TheoryError {
    TheoryError::Domain(msg.into())
}
