use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::integrate::draw_stationary;
use crate::integrate::rng::{fill_normals, StreamKey, StreamPurpose};
use crate::model::{pi_average, ContractionCertificate, DampingSpec, DriftSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpOptions {
    pub dt: f64,
    pub seed: u64,
    pub delta: f64,
}

impl Default for LdpOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            seed: 0,
            delta: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpCell {
    pub t: f64,
    pub c: f64,
    pub exceedances: u64,
    pub n_traj: u64,
    /// `log(k/n)`, or the rule-of-three bound `log(3/n)` when censored.
    pub log_probability: f64,
    pub censored: bool,
    /// `-(c²/2 - δ) D_M t`.
    pub bound_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub c_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub cells: Vec<LdpCell>,
    pub d_m: f64,
    pub delta: f64,
    pub pi_average: f64,
    pub lipschitz: f64,
    pub certificate: ContractionCertificate,
    pub options: LdpOptions,
}

/// Exceedance frequencies of `D_t = (1/t)∫b(u_s)ds - ⟨π,b⟩ > D_M c` over
/// `n_traj` stationary hidden paths, with `D_M = C_γ² γ⁻² ‖b‖²_Lip`.
pub fn ldp_empirical(
    drift: &DriftSpec,
    damping: &DampingSpec,
    t_grid: &[f64],
    c_grid: &[f64],
    n_traj: u64,
    certificate: &ContractionCertificate,
    opts: &LdpOptions,
) -> Result<LdpReport, AnalysisError> {
    if n_traj == 0 || t_grid.is_empty() {
        return Err(AnalysisError::OutOfRange("need trajectories and a t-grid".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || !(opts.dt > 0.0) {
        return Err(AnalysisError::OutOfRange("times and dt must be positive".into()));
    }
    let pi = pi_average(damping, drift)?.value;
    let lip = damping.global_lipschitz();
    if !lip.is_finite() {
        return Err(AnalysisError::OutOfRange("damping is not globally Lipschitz".into()));
    }
    let d_m = (certificate.c_gamma * lip / certificate.gamma).powi(2);
    let marks: Vec<u64> = t_grid.iter().map(|t| (t / opts.dt).round() as u64).collect();
    let n_steps = *marks.iter().max().unwrap();
    let coord = damping.coordinate();
    let thresholds: Vec<f64> = c_grid.iter().map(|c| d_m * c).collect();
    let dt = opts.dt;

    let counts: Vec<u64> = (0..n_traj)
        .into_par_iter()
        .fold(
            || vec![0u64; t_grid.len() * c_grid.len()],
            |mut acc, i| {
                let mut init = StreamKey::new(opts.seed, StreamPurpose::InitialHidden, i).rng();
                let mut rng = StreamKey::new(opts.seed, StreamPurpose::Ldp, i).rng();
                let mut u = draw_stationary(drift, &mut init);
                let mut h = vec![0.0; u.len()];
                let mut xi = vec![0.0; u.len()];
                let mut integral = 0.0;
                let mut b_prev = damping.eval(u[coord]);
                for n in 1..=n_steps {
                    fill_normals(&mut rng, &mut xi);
                    crate::integrate::step_hidden_into(&mut u, drift, dt, &xi, &mut h);
                    let b = damping.eval(u[coord]);
                    integral += 0.5 * dt * (b_prev + b);
                    b_prev = b;
                    for (ti, &m) in marks.iter().enumerate() {
                        if m == n {
                            let d_t = integral / (n as f64 * dt) - pi;
                            for (ci, thr) in thresholds.iter().enumerate() {
                                if d_t > *thr {
                                    acc[ti * c_grid.len() + ci] += 1;
                                }
                            }
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; t_grid.len() * c_grid.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let mut cells = Vec::new();
    for (ti, &t) in t_grid.iter().enumerate() {
        for (ci, &c) in c_grid.iter().enumerate() {
            let k = counts[ti * c_grid.len() + ci];
            let censored = k == 0;
            let log_probability = if censored {
                (3.0 / n_traj as f64).ln()
            } else {
                (k as f64 / n_traj as f64).ln()
            };
            cells.push(LdpCell {
                t,
                c,
                exceedances: k,
                n_traj,
                log_probability,
                censored,
                bound_exponent: -(0.5 * c * c - opts.delta) * d_m * t,
            });
        }
    }
    Ok(LdpReport {
        c_grid: c_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        cells,
        d_m,
        delta: opts.delta,
        pi_average: pi,
        lipschitz: lip,
        certificate: *certificate,
        options: opts.clone(),
    })
}
