use serde::{Deserialize, Serialize};

use super::simulate::{initial_u, HiddenSource, SimConfig};
use super::IntegrateError;
use crate::model::{DriftSpec, StartU};

/// Stored paths above this many `f64` values fall back to increment mode.
pub const MAX_STORED_VALUES: usize = 1 << 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    /// Keep every `u_n`.
    Values,
    /// Keep only the stream key and regenerate on replay.
    Increments,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathStorage {
    /// `u_0, u_1, ..., u_n` flattened, `dim` values per step.
    Values(Vec<f64>),
    Increments,
}

/// A hidden path that several runs can share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenPathRecord {
    pub dt: f64,
    pub n_steps: u64,
    pub seed: u64,
    pub index: u64,
    pub drift: DriftSpec,
    pub u0: Vec<f64>,
    pub storage: PathStorage,
}

/// Records the hidden path that a run with this drift, start and config
/// would see as trajectory 0.
pub fn record_hidden_path(
    drift: &DriftSpec,
    start: &StartU,
    config: &SimConfig,
    mode: StorageMode,
) -> Result<HiddenPathRecord, IntegrateError> {
    config.validate()?;
    let u0 = initial_u(drift, start, config.seed, 0);
    let mut rec = HiddenPathRecord {
        dt: config.dt,
        n_steps: config.n_steps,
        seed: config.seed,
        index: 0,
        drift: drift.clone(),
        u0,
        storage: PathStorage::Increments,
    };
    if mode == StorageMode::Values {
        let total = (config.n_steps as usize + 1).saturating_mul(drift.dim());
        let mut values = Vec::new();
        if total <= MAX_STORED_VALUES && values.try_reserve_exact(total).is_ok() {
            values.extend_from_slice(&rec.u0);
            let mut u = rec.u0.clone();
            let mut src = HiddenSource::fresh(drift, config.seed, 0, config.dt);
            for n in 0..config.n_steps {
                src.advance(&mut u);
                if u.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrateError::NonFinite {
                        step: n + 1,
                        t: (n + 1) as f64 * config.dt,
                        last_x: vec![],
                        last_u: values[values.len() - u.len()..].to_vec(),
                    });
                }
                values.extend_from_slice(&u);
            }
            rec.storage = PathStorage::Values(values);
        }
    }
    Ok(rec)
}

impl HiddenPathRecord {
    /// Materializes the path, `(n_steps + 1) * dim` values.
    pub fn values(&self) -> Vec<f64> {
        match &self.storage {
            PathStorage::Values(v) => v.clone(),
            PathStorage::Increments => {
                let mut out = self.u0.clone();
                let mut u = self.u0.clone();
                let mut src = HiddenSource::fresh(&self.drift, self.seed, self.index, self.dt);
                for _ in 0..self.n_steps {
                    src.advance(&mut u);
                    out.extend_from_slice(&u);
                }
                out
            }
        }
    }
}
