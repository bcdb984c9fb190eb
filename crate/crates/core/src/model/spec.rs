use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{invalid, DampingSpec, DriftSpec, ModelError};
use crate::numeric::linalg::{from_rows, symmetric_eigen_bounds};

/// Start of the hidden process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartU {
    /// Exact draw from the stationary law (OU) or a burn-in (gradient drift).
    Stationary,
    Point(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    /// Empty means the origin.
    #[serde(default)]
    pub x0: Vec<f64>,
    pub u0: StartU,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            x0: Vec::new(),
            u0: StartU::Stationary,
        }
    }
}

/// `dX = -b(u) X dt + σ_x dW`, `du = h(u) dt + dB`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarModel {
    pub damping: DampingSpec,
    pub drift: DriftSpec,
    pub sigma_x: f64,
    pub dim_x: usize,
    #[serde(default)]
    pub init: InitialCondition,
}

impl ScalarModel {
    pub fn new(damping: DampingSpec, drift: DriftSpec, sigma_x: f64) -> Self {
        Self {
            damping,
            drift,
            sigma_x,
            dim_x: 1,
            init: InitialCondition::default(),
        }
    }

    pub fn dim_u(&self) -> usize {
        self.drift.dim()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma_x.is_finite() && self.sigma_x >= 0.0) {
            return Err(invalid("sigma_x", "must be finite and >= 0"));
        }
        if self.dim_x == 0 {
            return Err(invalid("dims.x", "must be >= 1"));
        }
        if self.damping.coordinate() >= self.drift.dim() {
            return Err(ModelError::Dimension {
                expected: self.damping.coordinate() + 1,
                got: self.drift.dim(),
            });
        }
        validate_init(&self.init, self.dim_x, self.drift.dim())
    }
}

fn validate_init(init: &InitialCondition, dx: usize, du: usize) -> Result<(), ModelError> {
    if !(init.x0.is_empty() || init.x0.len() == dx) {
        return Err(invalid("x0", format!("needs {dx} entries")));
    }
    if init.x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x0", "must be finite"));
    }
    if let StartU::Point(p) = &init.u0 {
        if p.len() != du || p.iter().any(|v| !v.is_finite()) {
            return Err(invalid("u0", format!("needs {du} finite entries")));
        }
    }
    Ok(())
}

/// One term `b_i(u) B_i` of a matrix damping, with the coordinate set `N_i`
/// outside of which `B_i` vanishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixTerm {
    pub damping: DampingSpec,
    pub matrix: Vec<Vec<f64>>,
    /// Zero-based indices; empty means all coordinates.
    #[serde(default)]
    pub support: Vec<usize>,
}

/// `dX = -B(u) X dt + Σ_X dW` with `B(u) = Σ b_i(u) B_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrixModel", into = "RawMatrixModel")]
pub struct MatrixModel {
    terms: Vec<MatrixTerm>,
    sigma: Vec<Vec<f64>>,
    drift: DriftSpec,
    init: InitialCondition,
    dim_x: usize,
    bounds: Vec<(f64, f64)>,
    supports: Vec<Vec<usize>>,
    term_mats: Vec<DMatrix<f64>>,
    sigma_mat: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrixModel {
    terms: Vec<MatrixTerm>,
    sigma: Vec<Vec<f64>>,
    drift: DriftSpec,
    #[serde(default)]
    init: InitialCondition,
}

impl TryFrom<RawMatrixModel> for MatrixModel {
    type Error = ModelError;
    fn try_from(r: RawMatrixModel) -> Result<Self, ModelError> {
        MatrixModel::new(r.terms, r.sigma, r.drift, r.init)
    }
}

impl From<MatrixModel> for RawMatrixModel {
    fn from(m: MatrixModel) -> Self {
        RawMatrixModel {
            terms: m.terms,
            sigma: m.sigma,
            drift: m.drift,
            init: m.init,
        }
    }
}

impl MatrixModel {
    /// Validates the zero pattern of every term and caches the eigen-bounds
    /// `m_i, M_i` of the symmetrized terms restricted to their supports.
    pub fn new(
        terms: Vec<MatrixTerm>,
        sigma: Vec<Vec<f64>>,
        drift: DriftSpec,
        init: InitialCondition,
    ) -> Result<Self, ModelError> {
        let dim_x = sigma.len();
        if dim_x == 0 || sigma.iter().any(|r| r.len() != dim_x) {
            return Err(invalid("sigma.matrix", "must be a non-empty square matrix"));
        }
        if sigma.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("sigma.matrix", "entries must be finite"));
        }
        if terms.is_empty() {
            return Err(invalid("term", "at least one matrix term is required"));
        }
        let mut bounds = Vec::new();
        let mut supports = Vec::new();
        let mut term_mats = Vec::new();
        for (i, t) in terms.iter().enumerate() {
            let bad = |reason: String| ModelError::BadTerm { term: i, reason };
            if t.matrix.len() != dim_x || t.matrix.iter().any(|r| r.len() != dim_x) {
                return Err(bad(format!("matrix must be {dim_x}x{dim_x}")));
            }
            if t.matrix.iter().flatten().any(|v| !v.is_finite()) {
                return Err(bad("matrix entries must be finite".into()));
            }
            if t.damping.coordinate() >= drift.dim() {
                return Err(bad("damping coordinate exceeds hidden dimension".into()));
            }
            let support: Vec<usize> = if t.support.is_empty() {
                (0..dim_x).collect()
            } else {
                let mut s = t.support.clone();
                s.sort_unstable();
                s.dedup();
                if s.len() != t.support.len() || s.iter().any(|&j| j >= dim_x) {
                    return Err(bad("support indices must be distinct and < d_X".into()));
                }
                s
            };
            for j in (0..dim_x).filter(|j| !support.contains(j)) {
                for k in 0..dim_x {
                    if t.matrix[j][k] != 0.0 || t.matrix[k][j] != 0.0 {
                        return Err(bad(format!(
                            "entry ({j},{k}) or ({k},{j}) is nonzero but {j} is outside the support"
                        )));
                    }
                }
            }
            let full = from_rows(&t.matrix);
            let sub = full.select_rows(&support).select_columns(&support);
            bounds.push(symmetric_eigen_bounds(&sub));
            supports.push(support);
            term_mats.push(full);
        }
        validate_init(&init, dim_x, drift.dim())?;
        let sigma_mat = from_rows(&sigma);
        Ok(Self {
            terms,
            sigma,
            drift,
            init,
            dim_x,
            bounds,
            supports,
            term_mats,
            sigma_mat,
        })
    }

    pub fn terms(&self) -> &[MatrixTerm] {
        &self.terms
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn init(&self) -> &InitialCondition {
        &self.init
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma_mat
    }

    /// `(m_i, M_i)` per term.
    pub fn eigen_bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub(crate) fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    /// `B(u) = Σ b_i(u) B_i`.
    pub fn damping_matrix(&self, u: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim_x, self.dim_x);
        self.damping_matrix_into(u, &mut b);
        b
    }

    pub(crate) fn damping_matrix_into(&self, u: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (t, m) in self.terms.iter().zip(&self.term_mats) {
            let bi = t.damping.eval(u[t.damping.coordinate()]);
            *out += m * bi;
        }
    }
}

/// Either system family, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Scalar(ScalarModel),
    Matrix(MatrixModel),
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::Scalar(m) => m.validate(),
            ModelSpec::Matrix(_) => Ok(()),
        }
    }

    pub fn drift(&self) -> &DriftSpec {
        match self {
            ModelSpec::Scalar(m) => &m.drift,
            ModelSpec::Matrix(m) => &m.drift,
        }
    }

    pub fn dim_x(&self) -> usize {
        match self {
            ModelSpec::Scalar(m) => m.dim_x,
            ModelSpec::Matrix(m) => m.dim_x,
        }
    }

    pub fn init(&self) -> &InitialCondition {
        match self {
            ModelSpec::Scalar(m) => &m.init,
            ModelSpec::Matrix(m) => &m.init,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn two_term_model() -> MatrixModel {
        MatrixModel::new(
            vec![
                MatrixTerm {
                    damping: DampingSpec::affine(1.0, 1.0, 0.0),
                    matrix: vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]],
                    support: vec![0, 1],
                },
                MatrixTerm {
                    damping: DampingSpec::power(2.0, 1.0),
                    matrix: vec![vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 3.0]],
                    support: vec![],
                },
            ],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            DriftSpec::ou(2.0),
            InitialCondition::default(),
        )
        .unwrap()
    }

    #[test]
    fn reconstruction_matches_sum_of_terms() {
        let m = two_term_model();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = [rng.random_range(-5.0..5.0)];
            let b = m.damping_matrix(&u);
            let mut direct = DMatrix::zeros(3, 3);
            for t in m.terms() {
                direct += from_rows(&t.matrix) * t.damping.eval(u[0]);
            }
            assert_eq!((b - direct).amax(), 0.0);
        }
    }

    #[test]
    fn eigen_bounds_use_the_support_block() {
        let m = two_term_model();
        let (lo, hi) = m.eigen_bounds()[0];
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
        let (lo, hi) = m.eigen_bounds()[1];
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pattern_violation_is_rejected() {
        let err = MatrixModel::new(
            vec![MatrixTerm {
                damping: DampingSpec::constant(1.0),
                matrix: vec![vec![1.0, 0.0], vec![0.5, 1.0]],
                support: vec![0],
            }],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            DriftSpec::ou(1.0),
            InitialCondition::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::BadTerm { term: 0, .. }));
    }

    #[test]
    fn non_square_term_is_rejected() {
        let err = MatrixModel::new(
            vec![MatrixTerm {
                damping: DampingSpec::constant(1.0),
                matrix: vec![vec![1.0, 0.0]],
                support: vec![],
            }],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            DriftSpec::ou(1.0),
            InitialCondition::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::BadTerm { .. }));
    }

    #[test]
    fn model_spec_json_round_trip() {
        let spec = ModelSpec::Matrix(two_term_model());
        let js = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
        let scalar = ModelSpec::Scalar(ScalarModel::new(
            DampingSpec::affine(1.0, 3.0, 0.0),
            DriftSpec::ou(2.0),
            1.0,
        ));
        let js = serde_json::to_string(&scalar).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&js).unwrap(), scalar);
    }
}
