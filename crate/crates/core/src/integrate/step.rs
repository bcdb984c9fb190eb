//! One time step of each half of the system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::IntegrateError;
use crate::model::DriftSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ImplicitEulerX,
    /// Forward Euler for `X`, kept only for comparison.
    ExplicitEulerX,
}

/// Euler–Maruyama: `u + h(u) dt + sqrt(dt) xi`.
pub fn step_hidden(u: &[f64], drift: &DriftSpec, dt: f64, xi: &[f64]) -> Result<Vec<f64>, IntegrateError> {
    let mut out = u.to_vec();
    let mut h = vec![0.0; u.len()];
    step_hidden_in_place(&mut out, drift, dt, xi, &mut h);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite {
            step: 0,
            t: dt,
            last_x: vec![],
            last_u: u.to_vec(),
        });
    }
    Ok(out)
}

pub(crate) fn step_hidden_in_place(u: &mut [f64], drift: &DriftSpec, dt: f64, xi: &[f64], h: &mut [f64]) {
    drift.eval_into(u, h);
    let sq = dt.sqrt();
    for ((ui, hi), z) in u.iter_mut().zip(h.iter()).zip(xi) {
        *ui += hi * dt + sq * z;
    }
}

/// Scalar damping: implicit `x' = (x + σ sqrt(dt) ξ) / (1 + b dt)`.
pub fn step_observable(x: f64, b: f64, sigma: f64, dt: f64, xi: f64, scheme: Scheme) -> Result<f64, IntegrateError> {
    let noise = sigma * dt.sqrt() * xi;
    match scheme {
        Scheme::ImplicitEulerX => {
            let denom = 1.0 + b * dt;
            if !(denom > 0.0) {
                return Err(IntegrateError::Singular { b, dt, step: None });
            }
            Ok((x + noise) / denom)
        }
        Scheme::ExplicitEulerX => Ok(x - b * x * dt + noise),
    }
}

/// Matrix damping: solve `(I + B dt) x' = x + Σ sqrt(dt) ξ`.
pub fn step_observable_matrix(
    x: &DVector<f64>,
    b: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    dt: f64,
    xi: &DVector<f64>,
    scheme: Scheme,
) -> Result<DVector<f64>, IntegrateError> {
    let rhs_noise = sigma * xi * dt.sqrt();
    match scheme {
        Scheme::ImplicitEulerX => {
            let n = x.len();
            let a = DMatrix::identity(n, n) + b * dt;
            let sol = a.lu().solve(&(x + rhs_noise));
            match sol {
                Some(s) if s.iter().all(|v| v.is_finite()) => Ok(s),
                _ => Err(IntegrateError::Singular {
                    b: crate::numeric::linalg::symmetric_eigen_bounds(b).0,
                    dt,
                    step: None,
                }),
            }
        }
        Scheme::ExplicitEulerX => Ok(x - b * x * dt + rhs_noise),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_examples() {
        let ou = DriftSpec::ou(2.0);
        assert!((step_hidden(&[1.0], &ou, 0.01, &[0.0]).unwrap()[0] - 0.98).abs() < 1e-15);
        assert!((step_hidden(&[0.0], &ou, 0.01, &[1.0]).unwrap()[0] - 0.1).abs() < 1e-15);
        let quartic = DriftSpec::gradient(0.0, 1.0).unwrap();
        assert!((step_hidden(&[1.0], &quartic, 0.01, &[0.0]).unwrap()[0] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn observable_examples() {
        let s = Scheme::ImplicitEulerX;
        assert_eq!(step_observable(1.0, 1.0, 0.0, 0.01, 0.0, s).unwrap(), 1.0 / 1.01);
        assert_eq!(step_observable(1.0, -1.0, 0.0, 0.01, 0.0, s).unwrap(), 1.0 / 0.99);
        assert!((step_observable(0.0, 0.0, 1.0, 0.01, 1.0, s).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn singular_implicit_step_is_an_error() {
        let e = step_observable(1.0, -100.0, 1.0, 0.01, 0.0, Scheme::ImplicitEulerX);
        assert!(matches!(e, Err(IntegrateError::Singular { .. })));
        let msg = e.unwrap_err().to_string();
        assert!(msg.contains("shrink dt"), "{msg}");
    }

    #[test]
    fn implicit_scheme_contracts_for_any_dt() {
        for dt in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            for b in [1e-3, 0.5, 5.0] {
                let mut x = 1.0;
                for _ in 0..20 {
                    let next = step_observable(x, b, 0.0, dt, 0.0, Scheme::ImplicitEulerX).unwrap();
                    assert!(next.abs() < x.abs());
                    x = next;
                }
            }
        }
    }

    #[test]
    fn matrix_step_agrees_with_scalar() {
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let sig = DMatrix::identity(2, 2);
        let xi = DVector::from_vec(vec![0.3, -0.7]);
        let y = step_observable_matrix(&x, &b, &sig, 0.01, &xi, Scheme::ImplicitEulerX).unwrap();
        for i in 0..2 {
            let s = step_observable(x[i], b[(i, i)], 1.0, 0.01, xi[i], Scheme::ImplicitEulerX).unwrap();
            assert!((y[i] - s).abs() < 1e-15);
        }
    }
}
