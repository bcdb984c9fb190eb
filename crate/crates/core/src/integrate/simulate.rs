use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::replay::{HiddenPathRecord, PathStorage};
use super::rng::{fill_normals, StreamKey, StreamPurpose};
use super::step::{step_hidden_in_place, step_observable, Scheme};
use super::{IntegrateError, Sink};
use crate::model::{DriftKind, DriftSpec, ModelSpec, StartU};

/// Where the damping is evaluated inside an implicit step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingEndpoint {
    /// `b(u_n)`, no inner solve.
    #[default]
    Start,
    /// `b(u_{n+1})`.
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub n_steps: u64,
    #[serde(default)]
    pub burn_in: u64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub thinning: u64,
    #[serde(default)]
    pub damping_at: DampingEndpoint,
}

fn one() -> u64 {
    1
}

impl SimConfig {
    pub fn new(dt: f64, n_steps: u64, seed: u64) -> Self {
        Self {
            dt,
            n_steps,
            burn_in: 0,
            seed,
            scheme: Scheme::ImplicitEulerX,
            thinning: 1,
            damping_at: DampingEndpoint::Start,
        }
    }

    /// `n_steps = round(t_final / dt)`.
    pub fn for_horizon(dt: f64, t_final: f64, seed: u64) -> Self {
        Self::new(dt, (t_final / dt).round() as u64, seed)
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(IntegrateError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(IntegrateError::Config("n_steps must be positive".into()));
        }
        if self.burn_in >= self.n_steps {
            return Err(IntegrateError::Config(format!(
                "burn_in ({}) must be below n_steps ({})",
                self.burn_in, self.n_steps
            )));
        }
        if self.thinning == 0 {
            return Err(IntegrateError::Config("thinning must be >= 1".into()));
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples_seen: u64,
    pub steps: u64,
    pub max_norm: f64,
    pub final_time: f64,
    pub diagnostics: Vec<String>,
    /// Not serialized, so that summaries stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl PartialEq for RunSummary {
    fn eq(&self, o: &Self) -> bool {
        self.samples_seen == o.samples_seen
            && self.steps == o.steps
            && self.max_norm == o.max_norm
            && self.final_time == o.final_time
            && self.diagnostics == o.diagnostics
    }
}

/// Exact draw from the stationary law for OU drifts; the drift center for
/// gradient drifts, which then rely on burn-in.
pub fn draw_stationary(drift: &DriftSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = drift.dim();
    let mut z = vec![0.0; d];
    fill_normals(rng, &mut z);
    match drift.stationary() {
        Some(law) => {
            let l = law
                .covariance
                .clone()
                .cholesky()
                .map(|c| c.l())
                .unwrap_or_else(|| DMatrix::from_diagonal(&law.covariance.diagonal().map(f64::sqrt)));
            let v = law.mean + l * DVector::from_vec(z);
            v.iter().copied().collect()
        }
        None => match drift.kind() {
            DriftKind::Gradient { center, .. } => vec![*center; d],
            _ => vec![0.0; d],
        },
    }
}

pub(crate) fn initial_u(drift: &DriftSpec, start: &StartU, seed: u64, index: u64) -> Vec<f64> {
    match start {
        StartU::Point(p) => p.clone(),
        StartU::Stationary => {
            let mut rng = StreamKey::new(seed, StreamPurpose::InitialHidden, index).rng();
            draw_stationary(drift, &mut rng)
        }
    }
}

/// Source of hidden increments: fresh noise or a recorded path. One lives
/// per trajectory, so the variant size gap costs nothing.
#[allow(clippy::large_enum_variant)]
pub(crate) enum HiddenSource<'a> {
    Fresh {
        rng: ChaCha8Rng,
        drift: &'a DriftSpec,
        h: Vec<f64>,
        xi: Vec<f64>,
        dt: f64,
    },
    Stored {
        values: &'a [f64],
        pos: usize,
    },
}

impl<'a> HiddenSource<'a> {
    pub(crate) fn fresh(drift: &'a DriftSpec, seed: u64, index: u64, dt: f64) -> Self {
        let d = drift.dim();
        HiddenSource::Fresh {
            rng: StreamKey::new(seed, StreamPurpose::Hidden, index).rng(),
            drift,
            h: vec![0.0; d],
            xi: vec![0.0; d],
            dt,
        }
    }

    #[inline]
    pub(crate) fn advance(&mut self, u: &mut [f64]) {
        match self {
            HiddenSource::Fresh { rng, drift, h, xi, dt } => {
                fill_normals(rng, xi);
                step_hidden_in_place(u, drift, *dt, xi, h);
            }
            HiddenSource::Stored { values, pos } => {
                let d = u.len();
                *pos += d;
                u.copy_from_slice(&values[*pos..*pos + d]);
            }
        }
    }
}

/// Hidden source and starting point, from fresh noise or from a record.
fn hidden_setup<'a>(
    model: &'a ModelSpec,
    cfg: &SimConfig,
    index: u64,
    replay: Option<&'a HiddenPathRecord>,
) -> Result<(HiddenSource<'a>, Vec<f64>), IntegrateError> {
    let drift = model.drift();
    let Some(rec) = replay else {
        let u0 = initial_u(drift, &model.init().u0, cfg.seed, index);
        return Ok((HiddenSource::fresh(drift, cfg.seed, index, cfg.dt), u0));
    };
    if rec.dt != cfg.dt {
        return Err(IntegrateError::Replay(format!(
            "record has dt = {}, run uses dt = {}",
            rec.dt, cfg.dt
        )));
    }
    if rec.n_steps < cfg.n_steps {
        return Err(IntegrateError::Replay(format!(
            "record holds {} steps, run needs {}",
            rec.n_steps, cfg.n_steps
        )));
    }
    if rec.drift.dim() != drift.dim() {
        return Err(IntegrateError::Replay(format!(
            "record has hidden dimension {}, model has {}",
            rec.drift.dim(),
            drift.dim()
        )));
    }
    let src = match &rec.storage {
        PathStorage::Values(v) => HiddenSource::Stored { values: v, pos: 0 },
        PathStorage::Increments => HiddenSource::fresh(&rec.drift, rec.seed, rec.index, rec.dt),
    };
    Ok((src, rec.u0.clone()))
}

/// Single trajectory with index 0. See [`simulate_trajectory`].
pub fn simulate_stream(
    model: &ModelSpec,
    config: &SimConfig,
    sinks: &mut [&mut dyn Sink],
    replay: Option<&HiddenPathRecord>,
) -> Result<RunSummary, IntegrateError> {
    simulate_trajectory(model, config, 0, sinks, replay)
}

/// Runs `n_steps` steps; after burn-in every `thinning`-th state goes to all
/// sinks. Noise comes from streams keyed by `(seed, purpose, index)`.
pub fn simulate_trajectory(
    model: &ModelSpec,
    config: &SimConfig,
    index: u64,
    sinks: &mut [&mut dyn Sink],
    replay: Option<&HiddenPathRecord>,
) -> Result<RunSummary, IntegrateError> {
    config.validate()?;
    model.validate()?;
    let started = Instant::now();
    let (mut hidden, mut u) = hidden_setup(model, config, index, replay)?;
    let dx = model.dim_x();
    let mut x = if model.init().x0.is_empty() {
        vec![0.0; dx]
    } else {
        model.init().x0.clone()
    };
    let mut obs_rng = StreamKey::new(config.seed, StreamPurpose::Observable, index).rng();
    let mut xi = vec![0.0; dx];
    let mut u_prev = u.clone();
    let mut x_next = x.clone();
    let dt = config.dt;
    let mut samples = 0u64;
    let mut max_norm = 0.0f64;

    // Matrix workspace, unused for scalar models.
    let mut bmat = DMatrix::zeros(dx, dx);
    let sq = dt.sqrt();

    for n in 0..config.n_steps {
        fill_normals(&mut obs_rng, &mut xi);
        u_prev.copy_from_slice(&u);
        hidden.advance(&mut u);
        let u_eval = match config.damping_at {
            DampingEndpoint::Start => &u_prev,
            DampingEndpoint::End => &u,
        };
        match model {
            ModelSpec::Scalar(m) => {
                let b = m.damping.eval(u_eval[m.damping.coordinate()]);
                for i in 0..dx {
                    x_next[i] =
                        step_observable(x[i], b, m.sigma_x, dt, xi[i], config.scheme).map_err(|e| with_step(e, n))?;
                }
            }
            ModelSpec::Matrix(m) => {
                m.damping_matrix_into(u_eval, &mut bmat);
                let xv = DVector::from_column_slice(&x);
                let noise = m.sigma() * DVector::from_column_slice(&xi) * sq;
                let next = match config.scheme {
                    Scheme::ImplicitEulerX => {
                        let a = DMatrix::identity(dx, dx) + &bmat * dt;
                        a.lu().solve(&(xv + noise)).ok_or_else(|| IntegrateError::Singular {
                            b: crate::numeric::linalg::symmetric_eigen_bounds(&bmat).0,
                            dt,
                            step: Some(n),
                        })?
                    }
                    Scheme::ExplicitEulerX => &xv - &bmat * &xv * dt + noise,
                };
                x_next.copy_from_slice(next.as_slice());
            }
        }
        if x_next.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite {
                step: n + 1,
                t: (n + 1) as f64 * dt,
                last_x: x,
                last_u: u_prev,
            });
        }
        std::mem::swap(&mut x, &mut x_next);
        let k = n + 1;
        if k > config.burn_in && (k - config.burn_in).is_multiple_of(config.thinning) {
            let t = k as f64 * dt;
            let norm = if dx == 1 {
                x[0].abs()
            } else {
                x.iter().map(|v| v * v).sum::<f64>().sqrt()
            };
            max_norm = max_norm.max(norm);
            samples += 1;
            for s in sinks.iter_mut() {
                s.observe(t, &x, norm);
            }
        }
    }
    Ok(RunSummary {
        samples_seen: samples,
        steps: config.n_steps,
        max_norm,
        final_time: config.t_final(),
        diagnostics: Vec::new(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn with_step(e: IntegrateError, n: u64) -> IntegrateError {
    match e {
        IntegrateError::Singular { b, dt, .. } => IntegrateError::Singular { b, dt, step: Some(n) },
        other => other,
    }
}
