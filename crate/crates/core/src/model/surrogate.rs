//! Scalar surrogate dampings of a matrix damping: the pointwise lower and
//! upper envelopes built from per-term eigen-bounds on each support.

use serde::{Deserialize, Serialize};

use super::MatrixModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    /// Weakest damping, `min_j Σ_{i: j∈N_i} min(M_i b_i, m_i b_i)`.
    pub b_bar: f64,
    /// Strongest damping, `max_j Σ_{i: j∈N_i} max(M_i b_i, m_i b_i)`.
    pub b_under: f64,
}

pub fn surrogate_damping(model: &MatrixModel, u: &[f64]) -> Surrogate {
    let n = model.dim_x();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for ((t, &(m, big_m)), support) in model.terms().iter().zip(model.eigen_bounds()).zip(model.supports()) {
        let b = t.damping.eval(u[t.damping.coordinate()]);
        let (a, c) = (m * b, big_m * b);
        for &j in support {
            lo[j] += a.min(c);
            hi[j] += a.max(c);
        }
    }
    Surrogate {
        b_bar: lo.into_iter().fold(f64::INFINITY, f64::min),
        b_under: hi.into_iter().fold(f64::NEG_INFINITY, f64::max),
    }
}
