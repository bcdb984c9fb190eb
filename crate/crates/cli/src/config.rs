//! Experiment configuration: a model plus simulation, analysis and run
//! settings. Read from flat `key = value` files or JSON; the canonical JSON
//! form (without the output directory) is what gets hashed.
//!
//! Keys beyond the model keys:
//!
//! | key | default |
//! |---|---|
//! | `seed` | 1 |
//! | `sim.dt`, `sim.t_final`, `sim.burn_in` (time units) | 0.01, 1e5, 0 |
//! | `sim.thinning`, `sim.scheme`, `sim.damping_at` | 1, `implicit-euler-x`, `start` |
//! | `analysis.tail_quantile`, `analysis.p_grid` | 0.99, `1,2,3,4,5,6` |
//! | `certificate.c_gamma`, `certificate.gamma` | derived from the drift |
//! | `run.*` | per-command budgets, see [`RunOptions`] |
//! | `out` | output directory |

use std::path::{Path, PathBuf};

use condgauss::integrate::{DampingEndpoint, Scheme, SimConfig};
use condgauss::io::{canonical_json, model_from_flat, parse_flat, parse_model_json, FlatConfig};
use condgauss::model::{contraction_certificate_with, ContractionCertificate, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "one")]
    pub thinning: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub damping_at: DampingEndpoint,
}

fn one() -> u64 {
    1
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_final: 1e5,
            burn_in: 0.0,
            thinning: 1,
            scheme: Scheme::ImplicitEulerX,
            damping_at: DampingEndpoint::Start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    pub tail_quantile: f64,
    pub p_grid: Vec<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tail_quantile: 0.99,
            p_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateInput {
    pub c_gamma: f64,
    pub gamma: f64,
}

/// Budgets and grids for the individual commands. Unset fields fall back to
/// per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Ensemble size; turns `simulate` into an ensemble at `sim.t_final`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// `𝒜_m` level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_probe: Option<f64>,
    /// Half-width of the verification box in stationary standard deviations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// `classify` also simulates and fits the empirical tail.
    #[serde(default)]
    pub simulate: bool,
    /// `simulate` writes the raw sample stream to `samples.bin`.
    #[serde(default)]
    pub spill: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateInput>,
    #[serde(default)]
    pub run: RunOptions,
    /// Where outputs go; never part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn cfg_err(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: {reason}"))
}

fn take_parsed<T: std::str::FromStr>(f: &mut FlatConfig, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    f.take(key)
        .map(|v| v.parse::<T>().map_err(|e| cfg_err(key, format!("`{v}`: {e}"))))
        .transpose()
}

fn take_bool(f: &mut FlatConfig, key: &str) -> Result<bool, CliError> {
    match f.take(key).as_deref() {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(v) => Err(cfg_err(key, format!("expected true or false, got `{v}`"))),
    }
}

fn kebab<T: serde::de::DeserializeOwned>(key: &str, v: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(v.to_string()))
        .map_err(|_| cfg_err(key, format!("unknown value `{v}`")))
}

impl ExperimentConfig {
    /// Default settings around a model.
    pub fn for_model(model: ModelSpec) -> Self {
        Self {
            model,
            sim: SimSettings::default(),
            analysis: AnalysisOptions::default(),
            seed: DEFAULT_SEED,
            certificate: None,
            run: RunOptions::default(),
            out: None,
        }
    }

    pub fn from_flat(text: &str) -> Result<Self, CliError> {
        let mut f = parse_flat(text)?;
        let model = model_from_flat(&mut f)?;
        let mut cfg = Self::for_model(model);
        if let Some(s) = take_parsed(&mut f, "seed")? {
            cfg.seed = s;
        }
        let sim = &mut cfg.sim;
        sim.dt = f.f64_or("sim.dt", sim.dt)?;
        sim.t_final = f.f64_or("sim.t_final", sim.t_final)?;
        sim.burn_in = f.f64_or("sim.burn_in", sim.burn_in)?;
        if let Some(t) = f.take_u64("sim.thinning")? {
            sim.thinning = t;
        }
        if let Some(v) = f.take("sim.scheme") {
            sim.scheme = kebab("sim.scheme", &v)?;
        }
        if let Some(v) = f.take("sim.damping_at") {
            sim.damping_at = kebab("sim.damping_at", &v)?;
        }
        let a = &mut cfg.analysis;
        a.tail_quantile = f.f64_or("analysis.tail_quantile", a.tail_quantile)?;
        if let Some(p) = f.take_list("analysis.p_grid")? {
            a.p_grid = p;
        }
        match (f.take_f64("certificate.c_gamma")?, f.take_f64("certificate.gamma")?) {
            (Some(c_gamma), Some(gamma)) => cfg.certificate = Some(CertificateInput { c_gamma, gamma }),
            (None, None) => {}
            _ => {
                return Err(CliError::Config(
                    "certificate.c_gamma and certificate.gamma go together".into(),
                ))
            }
        }
        let r = &mut cfg.run;
        r.n_traj = f.take_u64("run.n_traj")?;
        r.t_grid = f.take_list("run.t_grid")?;
        r.c_grid = f.take_list("run.c_grid")?;
        r.u_grid = f.take_list("run.u_grid")?;
        r.n_samples = f.take_u64("run.n_samples")?;
        r.tolerance = f.take_f64("run.tolerance")?;
        r.m = take_parsed(&mut f, "run.m")?;
        r.p_probe = f.take_f64("run.p_probe")?;
        r.box_width = f.take_f64("run.box_width")?;
        r.grid_points = take_parsed(&mut f, "run.grid_points")?;
        r.simulate = take_bool(&mut f, "run.simulate")?;
        r.spill = take_bool(&mut f, "run.spill")?;
        cfg.out = f.take("out").map(PathBuf::from);
        f.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A full experiment object, or a bare model object (one with a `type`
    /// tag) wrapped in default settings.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let cfg = if v.get("type").is_some() {
            Self::for_model(parse_model_json(text)?)
        } else {
            serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_flat(&text)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        let q = self.analysis.tail_quantile;
        if !(q > 0.0 && q < 1.0) {
            return Err(cfg_err("analysis.tail_quantile", format!("{q} outside (0, 1)")));
        }
        if self.analysis.p_grid.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(cfg_err("analysis.p_grid", "orders must be positive"));
        }
        if !(self.sim.t_final.is_finite() && self.sim.t_final > 0.0) {
            return Err(cfg_err("sim.t_final", "must be positive"));
        }
        if !(self.sim.burn_in >= 0.0 && self.sim.burn_in < self.sim.t_final) {
            return Err(cfg_err("sim.burn_in", "must lie in [0, t_final)"));
        }
        self.sim_config()?.validate()?;
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let s = &self.sim;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            return Err(cfg_err("sim.dt", "must be positive"));
        }
        let mut c = SimConfig::for_horizon(s.dt, s.t_final, self.seed);
        c.burn_in = (s.burn_in / s.dt).round() as u64;
        c.thinning = s.thinning;
        c.scheme = s.scheme;
        c.damping_at = s.damping_at;
        Ok(c)
    }

    /// The user certificate if given, otherwise the one derived from the drift.
    pub fn certificate(&self) -> Result<ContractionCertificate, CliError> {
        let user = self
            .certificate
            .map(|c| ContractionCertificate::user_supplied(c.c_gamma, c.gamma))
            .transpose()?;
        Ok(contraction_certificate_with(self.model.drift(), user)?)
    }

    /// Canonical JSON without the output directory.
    pub fn canonical(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.out = None;
        Ok(canonical_json(&c)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "\
damping.kind = affine
damping.a = 1
damping.c = 2
drift.gamma = 2
seed = 7
sim.t_final = 100
sim.scheme = explicit-euler-x
analysis.p_grid = 1, 2, 3
run.n_traj = 10
run.simulate = true
out = /tmp/x
";

    #[test]
    fn flat_round_trips_through_json() {
        let cfg = ExperimentConfig::from_flat(FLAT).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sim.scheme, Scheme::ExplicitEulerX);
        assert_eq!(cfg.run.n_traj, Some(10));
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::from_flat(FLAT).unwrap();
        let mut b = a.clone();
        b.out = Some("/elsewhere".into());
        assert_eq!(a.canonical().unwrap(), b.canonical().unwrap());
        assert!(!a.canonical().unwrap().contains("/tmp/x"));
    }

    #[test]
    fn rejects_unknown_and_bad_keys() {
        let e =
            ExperimentConfig::from_flat("damping.kind = constant\ndamping.value = 1\ndrift.gamma = 2\nsim.dtt = 1\n");
        assert!(matches!(e, Err(CliError::Config(m)) if m.contains("sim.dtt")));
        let e = ExperimentConfig::from_flat(
            "damping.kind = constant\ndamping.value = 1\ndrift.gamma = 2\nanalysis.tail_quantile = 1\n",
        );
        assert!(matches!(e, Err(CliError::Config(m)) if m.contains("tail_quantile")));
        let e = ExperimentConfig::from_flat(
            "damping.kind = constant\ndamping.value = 1\ndrift.gamma = 2\nsim.scheme = rk4\n",
        );
        assert!(matches!(e, Err(CliError::Config(_))));
    }

    #[test]
    fn bare_model_json_gets_defaults() {
        let cfg = ExperimentConfig::from_flat("damping.kind = constant\ndamping.value = 1\ndrift.gamma = 2\n").unwrap();
        let model_json = serde_json::to_string(&cfg.model).unwrap();
        assert_eq!(ExperimentConfig::from_json(&model_json).unwrap(), cfg);
    }
}
