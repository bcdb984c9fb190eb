//! Bounds of the form `‖e^{-Γt}‖ <= C e^{-γt}` for the hidden OU process.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{invalid, DriftKind, DriftSpec, ModelError};
use crate::numeric::linalg::{solve_lyapunov, symmetric_eigen_bounds};

/// Fraction of the slowest decay rate given up by the quadratic-form bound
/// for non-normal matrices.
pub const LYAPUNOV_RATE_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    NumericBound,
    UserSupplied,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub c_gamma: f64,
    pub gamma: f64,
    pub provenance: Provenance,
}

impl ContractionCertificate {
    pub fn user_supplied(c_gamma: f64, gamma: f64) -> Result<Self, ModelError> {
        if !(c_gamma.is_finite() && c_gamma > 0.0) {
            return Err(invalid("c_gamma", "must be positive and finite"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", "must be positive and finite"));
        }
        Ok(Self {
            c_gamma,
            gamma,
            provenance: Provenance::UserSupplied,
        })
    }

    /// `C e^{-γt}`.
    pub fn bound(&self, t: f64) -> f64 {
        self.c_gamma * (-self.gamma * t).exp()
    }
}

/// Certificate for OU drifts. Normal matrices get `C = 1` at the slowest
/// eigenvalue; otherwise `P` solving `(Γ-γ'I)ᵀP + P(Γ-γ'I) = I` with
/// `γ' = (1 - margin) min Re λ` gives `C = sqrt(cond P)`.
pub fn contraction_certificate(drift: &DriftSpec) -> Result<ContractionCertificate, ModelError> {
    match drift.kind() {
        DriftKind::Ou { gamma, .. } => Ok(ContractionCertificate {
            c_gamma: 1.0,
            gamma: *gamma,
            provenance: Provenance::Analytic,
        }),
        DriftKind::OuMatrix { .. } => {
            let g = drift
                .gamma_matrix()
                .ok_or_else(|| ModelError::Unsupported("missing drift matrix".into()))?;
            matrix_certificate(g)
        }
        DriftKind::Gradient { .. } => Err(ModelError::Unsupported(
            "contraction of a gradient drift needs a user-supplied certificate".into(),
        )),
    }
}

/// Same as [`contraction_certificate`] but accepts a user certificate, which
/// takes precedence for every drift.
pub fn contraction_certificate_with(
    drift: &DriftSpec,
    user: Option<ContractionCertificate>,
) -> Result<ContractionCertificate, ModelError> {
    match user {
        Some(c) => ContractionCertificate::user_supplied(c.c_gamma, c.gamma),
        None => contraction_certificate(drift),
    }
}

fn matrix_certificate(g: &DMatrix<f64>) -> Result<ContractionCertificate, ModelError> {
    let n = g.nrows();
    let rate = g
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if !(rate > 0.0) {
        return Err(invalid("drift.matrix", "eigenvalue real parts must be positive"));
    }
    let commutator = g * g.transpose() - g.transpose() * g;
    if commutator.norm() <= 1e-12 * g.norm_squared().max(1.0) {
        return Ok(ContractionCertificate {
            c_gamma: 1.0,
            gamma: rate,
            provenance: Provenance::Analytic,
        });
    }
    let gamma = (1.0 - LYAPUNOV_RATE_MARGIN) * rate;
    let shifted = g - DMatrix::identity(n, n) * gamma;
    let p = solve_lyapunov(&shifted.transpose(), &DMatrix::identity(n, n))
        .ok_or_else(|| ModelError::Unsupported("singular Lyapunov operator".into()))?;
    let (lo, hi) = symmetric_eigen_bounds(&p);
    if !(lo > 0.0) {
        return Err(ModelError::Unsupported(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    Ok(ContractionCertificate {
        c_gamma: (hi / lo).sqrt(),
        gamma,
        provenance: Provenance::NumericBound,
    })
}
