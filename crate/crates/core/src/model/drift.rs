use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{invalid, ModelError};
use crate::numeric::linalg::{from_rows, solve_lyapunov, symmetric_eigen_bounds};

/// Drift `h` of the hidden process `du = h(u) dt + dB`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    /// Isotropic OU: `h(u) = -gamma (u - mean)` in every coordinate.
    Ou {
        gamma: f64,
        #[serde(default)]
        mean: f64,
    },
    /// Matrix OU: `h(u) = -Γ (u - mean)`.
    OuMatrix {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        mean: Vec<f64>,
    },
    /// Overdamped Langevin in `H(u) = a‖u-z‖²/2 + c‖u-z‖⁴/4`, so
    /// `h(u) = -(a + c‖u-z‖²)(u - z)`.
    Gradient {
        #[serde(default)]
        quadratic: f64,
        #[serde(default)]
        quartic: f64,
        #[serde(default)]
        center: f64,
    },
}

/// Constants of `⟨u-u*, h(u)⟩ <= -λ‖u-u*‖² + M_λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    pub lambda: f64,
    pub m_lambda: f64,
    pub center: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDrift", into = "RawDrift")]
pub struct DriftSpec {
    kind: DriftKind,
    dim: usize,
    dissipation: Option<Dissipation>,
    #[serde(skip)]
    gamma_matrix: Option<DMatrix<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawDrift {
    #[serde(flatten)]
    kind: DriftKind,
    #[serde(default = "one")]
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dissipation: Option<Dissipation>,
}

fn one() -> usize {
    1
}

impl TryFrom<RawDrift> for DriftSpec {
    type Error = ModelError;
    fn try_from(raw: RawDrift) -> Result<Self, ModelError> {
        let d = DriftSpec::new(raw.kind, raw.dim)?;
        match raw.dissipation {
            Some(dis) => d.with_dissipation(dis),
            None => Ok(d),
        }
    }
}

impl From<DriftSpec> for RawDrift {
    fn from(d: DriftSpec) -> Self {
        RawDrift {
            kind: d.kind,
            dim: d.dim,
            dissipation: d.dissipation,
        }
    }
}

/// Stationary law of the hidden process when it is Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryLaw {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl DriftSpec {
    pub fn new(kind: DriftKind, dim: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(invalid("dims.u", "hidden dimension must be >= 1"));
        }
        let mut gamma_matrix = None;
        match &kind {
            DriftKind::Ou { gamma, mean } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(invalid("drift.gamma", "OU rate must be finite and > 0"));
                }
                if !mean.is_finite() {
                    return Err(invalid("drift.mean", "must be finite"));
                }
            }
            DriftKind::OuMatrix { matrix, mean } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(invalid("drift.matrix", format!("must be {dim}x{dim}")));
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(invalid("drift.matrix", "entries must be finite"));
                }
                if !(mean.is_empty() || mean.len() == dim) {
                    return Err(invalid("drift.mean", format!("needs {dim} entries")));
                }
                let g = from_rows(matrix);
                let min_re = g
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| z.re)
                    .fold(f64::INFINITY, f64::min);
                if min_re <= 0.0 {
                    return Err(invalid("drift.matrix", "eigenvalues must have positive real parts"));
                }
                gamma_matrix = Some(g);
            }
            DriftKind::Gradient {
                quadratic,
                quartic,
                center,
            } => {
                if ![quadratic, quartic, center].iter().all(|v| v.is_finite()) {
                    return Err(invalid("drift", "potential coefficients must be finite"));
                }
                if *quartic < 0.0 || (*quartic == 0.0 && *quadratic <= 0.0) {
                    return Err(invalid(
                        "drift.quartic",
                        "potential must be confining (quartic > 0, or quartic = 0 and quadratic > 0)",
                    ));
                }
            }
        }
        Ok(Self {
            kind,
            dim,
            dissipation: None,
            gamma_matrix,
        })
    }

    pub fn ou(gamma: f64) -> Self {
        Self::new(DriftKind::Ou { gamma, mean: 0.0 }, 1).expect("OU rate")
    }

    pub fn ou_centered(gamma: f64, mean: f64) -> Self {
        Self::new(DriftKind::Ou { gamma, mean }, 1).expect("OU rate")
    }

    pub fn ou_matrix(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let dim = rows.len();
        Self::new(
            DriftKind::OuMatrix {
                matrix: rows,
                mean: vec![],
            },
            dim,
        )
    }

    pub fn gradient(quadratic: f64, quartic: f64) -> Result<Self, ModelError> {
        Self::new(
            DriftKind::Gradient {
                quadratic,
                quartic,
                center: 0.0,
            },
            1,
        )
    }

    /// Attaches user-declared dissipation constants.
    pub fn with_dissipation(mut self, d: Dissipation) -> Result<Self, ModelError> {
        if !(d.lambda.is_finite() && d.lambda > 0.0) {
            return Err(invalid("drift.lambda", "must be > 0"));
        }
        if !(d.m_lambda.is_finite() && d.m_lambda >= 0.0) {
            return Err(invalid("drift.m_lambda", "must be >= 0"));
        }
        if d.center.len() != self.dim {
            return Err(invalid("drift.center", format!("needs {} entries", self.dim)));
        }
        self.dissipation = Some(d);
        Ok(self)
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn declared_dissipation(&self) -> Option<&Dissipation> {
        self.dissipation.as_ref()
    }

    pub fn is_ou(&self) -> bool {
        !matches!(self.kind, DriftKind::Gradient { .. })
    }

    pub(crate) fn gamma_matrix(&self) -> Option<&DMatrix<f64>> {
        self.gamma_matrix.as_ref()
    }

    fn mean_vec(&self) -> Vec<f64> {
        match &self.kind {
            DriftKind::Ou { mean, .. } => vec![*mean; self.dim],
            DriftKind::OuMatrix { mean, .. } if mean.is_empty() => vec![0.0; self.dim],
            DriftKind::OuMatrix { mean, .. } => mean.clone(),
            DriftKind::Gradient { center, .. } => vec![*center; self.dim],
        }
    }

    /// Writes `h(u)` into `out`.
    #[inline]
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.kind {
            DriftKind::Ou { gamma, mean } => {
                for (o, v) in out.iter_mut().zip(u) {
                    *o = -gamma * (v - mean);
                }
            }
            DriftKind::OuMatrix { matrix, mean } => {
                for (i, row) in matrix.iter().enumerate() {
                    out[i] = -row
                        .iter()
                        .enumerate()
                        .map(|(j, g)| g * (u[j] - mean.get(j).copied().unwrap_or(0.0)))
                        .sum::<f64>();
                }
            }
            DriftKind::Gradient {
                quadratic,
                quartic,
                center,
            } => {
                let r2: f64 = u.iter().map(|v| (v - center).powi(2)).sum();
                let k = quadratic + quartic * r2;
                for (o, v) in out.iter_mut().zip(u) {
                    *o = -k * (v - center);
                }
            }
        }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(u, &mut out);
        out
    }

    /// Gaussian stationary law for OU drifts.
    pub fn stationary(&self) -> Option<StationaryLaw> {
        let mean = DVector::from_vec(self.mean_vec());
        match &self.kind {
            DriftKind::Ou { gamma, .. } => Some(StationaryLaw {
                mean,
                covariance: DMatrix::identity(self.dim, self.dim) / (2.0 * gamma),
            }),
            DriftKind::OuMatrix { .. } => {
                let g = self.gamma_matrix.as_ref()?;
                let cov = solve_lyapunov(g, &DMatrix::identity(self.dim, self.dim))?;
                Some(StationaryLaw { mean, covariance: cov })
            }
            DriftKind::Gradient { .. } => None,
        }
    }

    /// Mean and standard deviation of one coordinate under the stationary law.
    pub fn marginal(&self, coordinate: usize) -> Option<(f64, f64)> {
        let law = self.stationary()?;
        let var = law.covariance[(coordinate, coordinate)];
        Some((law.mean[coordinate], var.sqrt()))
    }

    /// A rough location/scale of the stationary law, exact for OU. For
    /// gradient drifts the scale comes from the curvature at the center.
    pub fn typical_scale(&self, coordinate: usize) -> (f64, f64) {
        if let Some(m) = self.marginal(coordinate) {
            return m;
        }
        match &self.kind {
            DriftKind::Gradient {
                quadratic,
                quartic,
                center,
            } => {
                // Stationary density ∝ exp(-2H); take the larger of the
                // quadratic and quartic length scales.
                let s_quad = if *quadratic > 0.0 {
                    (1.0 / (2.0 * quadratic)).sqrt()
                } else {
                    0.0
                };
                let s_quart = if *quartic > 0.0 {
                    (1.0 / (2.0 * quartic)).powf(0.25)
                } else {
                    0.0
                };
                (*center, s_quad.max(s_quart))
            }
            _ => unreachable!(),
        }
    }

    /// Dissipation constants about `center`: declared ones when the centers
    /// match, otherwise derived for OU and gradient drifts.
    pub fn dissipation_about(&self, center: &[f64]) -> Option<Dissipation> {
        if let Some(d) = &self.dissipation {
            if d.center == center {
                return Some(d.clone());
            }
        }
        let mean = self.mean_vec();
        let offset: Vec<f64> = center.iter().zip(&mean).map(|(c, m)| c - m).collect();
        let off_norm2: f64 = offset.iter().map(|v| v * v).sum();
        match &self.kind {
            DriftKind::Ou { gamma, .. } => Some(if off_norm2 == 0.0 {
                Dissipation {
                    lambda: *gamma,
                    m_lambda: 0.0,
                    center: center.to_vec(),
                }
            } else {
                Dissipation {
                    lambda: gamma / 2.0,
                    m_lambda: gamma * off_norm2 / 2.0,
                    center: center.to_vec(),
                }
            }),
            DriftKind::OuMatrix { .. } => {
                let g = self.gamma_matrix.as_ref()?;
                let (lo, _) = symmetric_eigen_bounds(g);
                if lo <= 0.0 {
                    return None;
                }
                if off_norm2 == 0.0 {
                    return Some(Dissipation {
                        lambda: lo,
                        m_lambda: 0.0,
                        center: center.to_vec(),
                    });
                }
                let push = (g * DVector::from_vec(offset)).norm();
                Some(Dissipation {
                    lambda: lo / 2.0,
                    m_lambda: push * push / (2.0 * lo),
                    center: center.to_vec(),
                })
            }
            DriftKind::Gradient { quadratic, quartic, .. } => {
                if off_norm2 != 0.0 {
                    return None;
                }
                if *quadratic > 0.0 {
                    Some(Dissipation {
                        lambda: *quadratic,
                        m_lambda: 0.0,
                        center: center.to_vec(),
                    })
                } else {
                    Some(Dissipation {
                        lambda: 1.0,
                        m_lambda: (1.0 - quadratic).powi(2) / (4.0 * quartic),
                        center: center.to_vec(),
                    })
                }
            }
        }
    }

    /// Minimum over a grid of `-λ‖u-u*‖² + M_λ - ⟨u-u*, h(u)⟩` for a
    /// scalar hidden process; nonnegative means the constants hold there.
    pub fn dissipation_margin(&self, d: &Dissipation, grid: &[f64]) -> f64 {
        let mut worst = f64::INFINITY;
        let mut h = vec![0.0; self.dim];
        let mut u = d.center.clone();
        for &g in grid {
            u[0] = g;
            self.eval_into(&u, &mut h);
            let r: Vec<f64> = u.iter().zip(&d.center).map(|(a, c)| a - c).collect();
            let r2: f64 = r.iter().map(|v| v * v).sum();
            let inner: f64 = r.iter().zip(&h).map(|(a, b)| a * b).sum();
            worst = worst.min(-d.lambda * r2 + d.m_lambda - inner);
        }
        worst
    }
}
