//! Time stepping of `(X, u)`, streaming into statistics sinks, ensemble
//! moment estimates and hidden-path record/replay.

mod ensemble;
mod replay;
pub mod rng;
mod simulate;
mod sinks;
mod step;

pub use ensemble::{ensemble_accumulate, ensemble_expectation};
pub use replay::{record_hidden_path, HiddenPathRecord, PathStorage, StorageMode};
pub use simulate::{draw_stationary, simulate_stream, simulate_trajectory, DampingEndpoint, RunSummary, SimConfig};
pub use sinks::{MomentAccumulator, Moments, SampleStats, Sink, TailReservoir, TracePoint, TraceWindow};
pub(crate) use step::step_hidden_in_place as step_hidden_into;
pub use step::{step_hidden, step_observable, step_observable_matrix, Scheme};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error(
        "implicit step is singular (b = {b}, dt = {dt}{}): 1 + b dt must be positive, shrink dt",
        step.map(|s| format!(", step {s}")).unwrap_or_default()
    )]
    Singular { b: f64, dt: f64, step: Option<u64> },
    #[error("non-finite state at step {step} (t = {t}); last finite x = {last_x:?}, u = {last_u:?}")]
    NonFinite {
        step: u64,
        t: f64,
        last_x: Vec<f64>,
        last_u: Vec<f64>,
    },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("replay mismatch: {0}")]
    Replay(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
