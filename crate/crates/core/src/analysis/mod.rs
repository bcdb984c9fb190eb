//! Tail diagnostics from sample streams: log-density histograms, tail-class
//! regressions, Hill indices, moment scaling and large-deviation checks.

mod histogram;
mod ldp;
mod moments;
mod regression;
mod tail;

pub use histogram::{Binning, HistogramRow, LogHistogram};
pub use ldp::{ldp_empirical, LdpCell, LdpOptions, LdpReport};
pub use moments::{moment_scaling_exponent, MomentCurve, ScalingFit};
pub use regression::{weighted_line, LineFit};
pub use tail::{
    fit_tail, fit_tail_with, hill_from_top, hill_index, CandidateFit, Family, FitOptions, HillEstimate, TailClass,
    TailInput, TailReport,
};

use thiserror::Error;

use crate::integrate::IntegrateError;
use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient tail mass: need at least {required} samples, got {got}")]
    InsufficientTail { required: u64, got: u64 },
    #[error("{0}")]
    OutOfRange(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}
