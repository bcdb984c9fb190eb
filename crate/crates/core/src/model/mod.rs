//! Damping functions, hidden-process drifts and full system specifications.

mod contraction;
mod damping;
mod drift;
mod profile;
mod spec;
mod surrogate;

pub use contraction::{contraction_certificate, contraction_certificate_with, ContractionCertificate, Provenance};
pub use damping::{DampingKind, DampingSpec};
pub use drift::{Dissipation, DriftKind, DriftSpec, StationaryLaw};
pub use profile::{
    damping_profile, pi_average, pi_average_with, Interval, McBudget, PiAverage, PiProvenance, Profile, ZeroSetKind,
};
pub use spec::{InitialCondition, MatrixModel, MatrixTerm, ModelSpec, ScalarModel, StartU};
pub use surrogate::{surrogate_damping, Surrogate};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("dimension mismatch: expected at least {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix term {term}: {reason}")]
    BadTerm { term: usize, reason: String },
    #[error("empty verification box [{lo}, {hi}]")]
    EmptyBox { lo: f64, hi: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
