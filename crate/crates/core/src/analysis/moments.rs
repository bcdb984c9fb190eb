use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::AnalysisError;
use crate::integrate::MomentAccumulator;

/// `log E‖X‖^{2p}` over a p-grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub p: Vec<f64>,
    pub log_moments: Vec<f64>,
    /// Standard errors of the log estimates.
    pub log_std_errors: Vec<f64>,
    pub samples: u64,
}

impl MomentCurve {
    pub fn new(p: Vec<f64>, log_moments: Vec<f64>, log_std_errors: Vec<f64>) -> Result<Self, AnalysisError> {
        if p.len() != log_moments.len() || p.len() != log_std_errors.len() {
            return Err(AnalysisError::OutOfRange("curve columns differ in length".into()));
        }
        if p.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AnalysisError::OutOfRange("p must be strictly increasing".into()));
        }
        if p.iter().chain(&log_moments).any(|v| !v.is_finite()) {
            return Err(AnalysisError::NonFinite("moment curve".into()));
        }
        Ok(Self {
            p,
            log_moments,
            log_std_errors,
            samples: 0,
        })
    }

    pub fn from_accumulator(acc: &MomentAccumulator) -> Self {
        let n = acc.p_grid().len();
        Self {
            p: acc.p_grid().to_vec(),
            log_moments: (0..n).map(|i| acc.log_mean(i)).collect(),
            log_std_errors: (0..n).map(|i| acc.log_mean_se(i)).collect(),
            samples: acc.count(),
        }
    }

    pub fn moment(&self, i: usize) -> f64 {
        self.log_moments[i].exp()
    }

    /// Absolute standard error of `moment(i)`.
    pub fn moment_se(&self, i: usize) -> f64 {
        self.moment(i) * self.log_std_errors[i]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Coefficient of `p log p`.
    pub slope: f64,
    #[serde(with = "crate::numeric::ext_f64")]
    pub std_error: f64,
    #[serde(with = "crate::numeric::ext_f64")]
    pub ci_low: f64,
    #[serde(with = "crate::numeric::ext_f64")]
    pub ci_high: f64,
    pub confidence: f64,
    /// Coefficient of `p`, which absorbs the scale of `X`.
    pub linear_coef: f64,
    pub intercept: f64,
}

/// Least squares of `log m_{2p}` on `[1, p, p log p]`; the slope is the
/// `p log p` coefficient, with a 95% Student-t interval.
pub fn moment_scaling_exponent(curve: &MomentCurve) -> Result<ScalingFit, AnalysisError> {
    let n = curve.p.len();
    if curve.p.iter().chain(&curve.log_moments).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite("moment curve".into()));
    }
    if n < 3 {
        return Err(AnalysisError::OutOfRange("need at least three p values".into()));
    }
    if curve.p.iter().any(|p| *p <= 0.0) {
        return Err(AnalysisError::OutOfRange("p must be positive".into()));
    }
    let a = DMatrix::from_fn(n, 3, |i, j| {
        let p = curve.p[i];
        match j {
            0 => 1.0,
            1 => p,
            _ => p * p.ln(),
        }
    });
    let y = DVector::from_column_slice(&curve.log_moments);
    let ata = a.transpose() * &a;
    let inv = ata
        .try_inverse()
        .ok_or_else(|| AnalysisError::OutOfRange("degenerate p-grid".into()))?;
    let beta = &inv * a.transpose() * &y;
    let resid = &y - &a * &beta;
    let dof = n - 3;
    let confidence = 0.95;
    let (se, half) = if dof == 0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let s2 = resid.norm_squared() / dof as f64;
        let se = (s2 * inv[(2, 2)]).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof as f64)
            .map(|d| d.inverse_cdf(0.5 + confidence / 2.0))
            .unwrap_or(f64::INFINITY);
        (se, t * se)
    };
    Ok(ScalingFit {
        slope: beta[2],
        std_error: se,
        ci_low: beta[2] - half,
        ci_high: beta[2] + half,
        confidence,
        linear_coef: beta[1],
        intercept: beta[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_moments_have_zero_slope() {
        let p: Vec<f64> = (2..=6).map(f64::from).collect();
        let c = MomentCurve::new(p, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let f = moment_scaling_exponent(&c).unwrap();
        assert!(f.slope.abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite() {
        let c = MomentCurve {
            p: vec![1.0, 2.0, 3.0],
            log_moments: vec![0.0, f64::NAN, 1.0],
            log_std_errors: vec![0.0; 3],
            samples: 0,
        };
        assert!(moment_scaling_exponent(&c).is_err());
    }
}
