//! Monte Carlo estimate of the Feynman–Kac potential
//! `θ(u) = -∫₀^∞ E^u(b̃(u_t) - ⟨π,b̃⟩) dt` by coupled pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{domain, TheoryError};
use crate::integrate::rng::{fill_normals, normal, StreamKey, StreamPurpose};
use crate::integrate::{draw_stationary, step_hidden_into};
use crate::model::{ContractionCertificate, DampingSpec, DriftSpec};
use crate::numeric::ExactSum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptions {
    pub dt: f64,
    /// Target for the truncation factor `C e^{-γT}`.
    pub tolerance: f64,
    /// Explicit horizon; derived from the tolerance when absent.
    pub t_trunc: Option<f64>,
    /// `κ` in `b̃ = b - κ|b|` (that is `δ/q`).
    pub kappa: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            tolerance: 1e-4,
            t_trunc: None,
            kappa: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub u_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_trunc: f64,
    /// Bound on the neglected tail `∫_T^∞`, per grid point.
    pub truncation_bounds: Vec<f64>,
    /// Largest slope between neighbouring grid points.
    pub lipschitz_empirical: f64,
    pub lipschitz_std_error: f64,
    /// `C γ⁻¹ ‖b̃‖_Lip`.
    pub lipschitz_bound: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub options: ThetaOptions,
    pub certificate: ContractionCertificate,
}

#[derive(Clone)]
struct Acc {
    s: Vec<ExactSum>,
    ss: Vec<ExactSum>,
    d: Vec<ExactSum>,
    dd: Vec<ExactSum>,
}

impl Acc {
    fn new(n: usize) -> Self {
        let v = |k: usize| vec![ExactSum::new(); k];
        Self {
            s: v(n),
            ss: v(n),
            d: v(n.saturating_sub(1)),
            dd: v(n.saturating_sub(1)),
        }
    }

    fn merge(mut self, o: Self) -> Self {
        for (a, b) in self
            .s
            .iter_mut()
            .chain(&mut self.ss)
            .chain(&mut self.d)
            .chain(&mut self.dd)
            .zip(o.s.iter().chain(&o.ss).chain(&o.d).chain(&o.dd))
        {
            a.merge(b);
        }
        self
    }
}

fn mean_se(s: &ExactSum, ss: &ExactSum, n: f64) -> (f64, f64) {
    let m = s.value() / n;
    let var = ((ss.value() - n * m * m) / (n - 1.0)).max(0.0);
    (m, (var / n).sqrt())
}

/// Common random numbers: pair `j` starts one copy at every grid point and
/// one at a stationary draw, and drives them all with the same increments.
/// `θ̂(u) = -dt Σ_n mean_j (b̃(A_n) - b̃(B_n))` over `n < T/dt`.
pub fn theta_feynman_kac(
    damping: &DampingSpec,
    drift: &DriftSpec,
    u_grid: &[f64],
    n_samples: usize,
    seed: u64,
    certificate: Option<&ContractionCertificate>,
    opts: &ThetaOptions,
) -> Result<ThetaEstimate, TheoryError> {
    let cert = *certificate.ok_or_else(|| TheoryError::MissingCertificate("sizing the θ horizon".into()))?;
    if drift.dim() != 1 || damping.coordinate() != 0 {
        return Err(TheoryError::Unsupported(
            "θ estimation needs a scalar hidden process".into(),
        ));
    }
    if u_grid.is_empty() || u_grid.iter().any(|u| !u.is_finite()) {
        return Err(domain("u-grid must be nonempty and finite"));
    }
    if u_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("u-grid must be strictly increasing"));
    }
    if n_samples < 2 {
        return Err(domain("need at least two sample pairs"));
    }
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(domain(format!("dt must be positive, got {}", opts.dt)));
    }
    if !(opts.tolerance > 0.0 && opts.tolerance < cert.c_gamma.max(1.0)) {
        return Err(domain(format!("tolerance {} out of range", opts.tolerance)));
    }
    if !(0.0..1.0).contains(&opts.kappa) {
        return Err(domain(format!("κ must lie in [0, 1), got {}", opts.kappa)));
    }
    let lip = damping.global_lipschitz();
    if !lip.is_finite() {
        return Err(TheoryError::InfiniteLipschitz);
    }
    let t_trunc = match opts.t_trunc {
        Some(t) => {
            let bound = cert.bound(t);
            if !(t > 0.0) || bound > opts.tolerance {
                return Err(TheoryError::HorizonTooShort {
                    t,
                    bound,
                    tolerance: opts.tolerance,
                });
            }
            t
        }
        None => (cert.c_gamma / opts.tolerance).ln().max(0.0) / cert.gamma,
    };
    let dt = opts.dt;
    let n_steps = (t_trunc / dt).ceil() as usize;
    let t_trunc = n_steps as f64 * dt;
    let kappa = opts.kappa;
    let bt = |u: f64| {
        let b = damping.eval(u);
        b - kappa * b.abs()
    };
    let n = u_grid.len();
    let burn = if drift.stationary().is_some() { 0 } else { n_steps };

    let acc = (0..n_samples as u64)
        .into_par_iter()
        .fold(
            || Acc::new(n),
            |mut acc, j| {
                let mut rs = StreamKey::new(seed, StreamPurpose::InitialHidden, j).rng();
                let mut rn = StreamKey::new(seed, StreamPurpose::Theta, j).rng();
                let mut h = [0.0];
                let mut b = draw_stationary(drift, &mut rs);
                for _ in 0..burn {
                    step_hidden_into(&mut b, drift, dt, &[normal(&mut rs)], &mut h);
                }
                let mut a: Vec<f64> = u_grid.to_vec();
                let mut integral = vec![0.0; n];
                let mut xi = [0.0];
                for _ in 0..n_steps {
                    let bb = bt(b[0]);
                    for (ai, ii) in a.iter().zip(integral.iter_mut()) {
                        *ii += dt * (bt(*ai) - bb);
                    }
                    fill_normals(&mut rn, &mut xi);
                    step_hidden_into(&mut b, drift, dt, &xi, &mut h);
                    for ai in a.iter_mut() {
                        step_hidden_into(std::slice::from_mut(ai), drift, dt, &xi, &mut h);
                    }
                }
                for i in 0..n {
                    acc.s[i].add(integral[i]);
                    acc.ss[i].add(integral[i] * integral[i]);
                    if i + 1 < n {
                        let d = integral[i + 1] - integral[i];
                        acc.d[i].add(d);
                        acc.dd[i].add(d * d);
                    }
                }
                acc
            },
        )
        .reduce(|| Acc::new(n), Acc::merge);

    let ns = n_samples as f64;
    let mut theta = Vec::with_capacity(n);
    let mut std_errors = Vec::with_capacity(n);
    for i in 0..n {
        let (m, se) = mean_se(&acc.s[i], &acc.ss[i], ns);
        theta.push(-m);
        std_errors.push(se);
    }
    let (mut lip_emp, mut lip_se) = (0.0, 0.0);
    for i in 0..n.saturating_sub(1) {
        let (m, se) = mean_se(&acc.d[i], &acc.dd[i], ns);
        let du = u_grid[i + 1] - u_grid[i];
        let slope = m.abs() / du;
        if slope > lip_emp {
            lip_emp = slope;
            lip_se = se / du;
        }
    }
    let lip_tilde = lip * (1.0 + kappa);
    let (mean, sd) = drift.typical_scale(0);
    let tail = cert.bound(t_trunc) * lip_tilde / cert.gamma;
    let truncation_bounds = u_grid.iter().map(|u| tail * ((u - mean).abs() + sd)).collect();
    Ok(ThetaEstimate {
        u_grid: u_grid.to_vec(),
        theta,
        std_errors,
        t_trunc,
        truncation_bounds,
        lipschitz_empirical: lip_emp,
        lipschitz_std_error: lip_se,
        lipschitz_bound: cert.c_gamma * lip_tilde / cert.gamma,
        n_samples,
        seed,
        options: opts.clone(),
        certificate: cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::contraction_certificate;

    #[test]
    fn constant_damping_gives_zero() {
        let d = DriftSpec::ou(2.0);
        let cert = contraction_certificate(&d).unwrap();
        let est = theta_feynman_kac(
            &DampingSpec::constant(1.3),
            &d,
            &[-1.0, 0.0, 1.0],
            64,
            3,
            Some(&cert),
            &ThetaOptions::default(),
        )
        .unwrap();
        assert!(est.theta.iter().all(|t| *t == 0.0));
        assert_eq!(est.lipschitz_empirical, 0.0);
    }

    #[test]
    fn horizon_checks() {
        let d = DriftSpec::ou(2.0);
        let cert = contraction_certificate(&d).unwrap();
        let b = DampingSpec::affine(0.0, 1.0, 0.0);
        let short = ThetaOptions {
            t_trunc: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            theta_feynman_kac(&b, &d, &[0.0], 8, 0, Some(&cert), &short),
            Err(TheoryError::HorizonTooShort { .. })
        ));
        assert!(matches!(
            theta_feynman_kac(&b, &d, &[0.0], 8, 0, None, &ThetaOptions::default()),
            Err(TheoryError::MissingCertificate(_))
        ));
    }
}
