//! Test functions `f(x, u)` with analytic derivatives, the generator of the
//! full system and its carré du champ.

use nalgebra::{DMatrix, DVector};

use super::TheoryError;
use crate::model::ModelSpec;

/// Value, gradients and Hessians of a test function in both blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub grad_u: DVector<f64>,
    pub hess_x: DMatrix<f64>,
    pub hess_u: DMatrix<f64>,
}

impl Jet {
    fn zero(dx: usize, du: usize) -> Self {
        Self {
            value: 0.0,
            grad_x: DVector::zeros(dx),
            grad_u: DVector::zeros(du),
            hess_x: DMatrix::zeros(dx, dx),
            hess_u: DMatrix::zeros(du, du),
        }
    }
}

pub trait GeneratorFn: Send + Sync {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError>;

    fn value(&self, x: &[f64], u: &[f64]) -> Result<f64, TheoryError> {
        Ok(self.jet(x, u)?.value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    X,
    U,
}

fn pick<'a>(block: Block, x: &'a [f64], u: &'a [f64]) -> &'a [f64] {
    match block {
        Block::X => x,
        Block::U => u,
    }
}

/// Writes a gradient/Hessian pair into the right block of a zero jet.
fn place(block: Block, dx: usize, du: usize, value: f64, g: DVector<f64>, h: DMatrix<f64>) -> Jet {
    let mut j = Jet::zero(dx, du);
    j.value = value;
    match block {
        Block::X => {
            j.grad_x = g;
            j.hess_x = h;
        }
        Block::U => {
            j.grad_u = g;
            j.hess_u = h;
        }
    }
    j
}

/// `f = y_i` for one coordinate of one block.
#[derive(Clone, Debug)]
pub struct Coordinate {
    pub block: Block,
    pub index: usize,
}

impl GeneratorFn for Coordinate {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError> {
        let y = pick(self.block, x, u);
        if self.index >= y.len() {
            return Err(TheoryError::Dimension {
                expected: self.index + 1,
                got: y.len(),
            });
        }
        let mut g = DVector::zeros(y.len());
        g[self.index] = 1.0;
        let n = y.len();
        Ok(place(
            self.block,
            x.len(),
            u.len(),
            y[self.index],
            g,
            DMatrix::zeros(n, n),
        ))
    }
}

/// `f = coef ‖y - center‖^exponent`, exponent >= 2 for a bounded Hessian.
#[derive(Clone, Debug)]
pub struct RadialPower {
    pub block: Block,
    pub coef: f64,
    pub exponent: f64,
    /// Empty means the origin.
    pub center: Vec<f64>,
}

impl RadialPower {
    pub fn new(block: Block, coef: f64, exponent: f64, center: Vec<f64>) -> Self {
        Self {
            block,
            coef,
            exponent,
            center,
        }
    }
}

fn offset(y: &[f64], center: &[f64]) -> Result<DVector<f64>, TheoryError> {
    if center.is_empty() {
        return Ok(DVector::from_column_slice(y));
    }
    if center.len() != y.len() {
        return Err(TheoryError::Dimension {
            expected: center.len(),
            got: y.len(),
        });
    }
    Ok(DVector::from_iterator(
        y.len(),
        y.iter().zip(center).map(|(a, c)| a - c),
    ))
}

/// Gradient and Hessian of a radial function from `φ'(r)/r` and `φ''(r)`.
fn radial(v: &DVector<f64>, d1_over_r: f64, d2: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = v.len();
    let r = v.norm();
    let g = v * d1_over_r;
    let h = if r == 0.0 {
        DMatrix::identity(n, n) * d1_over_r
    } else {
        let vh = v / r;
        let outer = &vh * vh.transpose();
        &outer * d2 + (DMatrix::identity(n, n) - &outer) * d1_over_r
    };
    (g, h)
}

impl GeneratorFn for RadialPower {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError> {
        let v = offset(pick(self.block, x, u), &self.center)?;
        let r = v.norm();
        let e = self.exponent;
        let re2 = r.powf(e - 2.0);
        let (g, h) = radial(&v, self.coef * e * re2, self.coef * e * (e - 1.0) * re2);
        Ok(place(self.block, x.len(), u.len(), self.coef * r.powf(e), g, h))
    }
}

/// The moment surrogate `E_p(x) = ‖x‖^{p+2}/(1+‖x‖²) + 1`.
#[derive(Clone, Debug)]
pub struct SurrogateMoment {
    pub p: f64,
}

impl GeneratorFn for SurrogateMoment {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError> {
        let p = self.p;
        let v = DVector::from_column_slice(x);
        let r = v.norm();
        let r2 = r * r;
        let s = 1.0 + r2;
        let rp = r.powf(p);
        let d1_over_r = rp * ((p + 2.0) + p * r2) / (s * s);
        let n = (p + 2.0) * rp * r + p * rp * r * r2;
        let dn = (p + 2.0) * (p + 1.0) * rp + p * (p + 3.0) * rp * r2;
        let d2 = (dn * s - 4.0 * r * n) / (s * s * s);
        let (g, h) = radial(&v, d1_over_r, d2);
        Ok(place(Block::X, x.len(), u.len(), rp * r2 / s + 1.0, g, h))
    }
}

/// `f = ⟨w, u⟩ + offset`.
#[derive(Clone, Debug)]
pub struct LinearU {
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl GeneratorFn for LinearU {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError> {
        if self.weights.len() != u.len() {
            return Err(TheoryError::Dimension {
                expected: self.weights.len(),
                got: u.len(),
            });
        }
        let value = self.weights.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() + self.offset;
        let n = u.len();
        Ok(place(
            Block::U,
            x.len(),
            n,
            value,
            DVector::from_column_slice(&self.weights),
            DMatrix::zeros(n, n),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Phi {
    Exp,
    Power(f64),
}

impl Phi {
    /// `(φ, φ', φ'')` at `g`.
    pub fn derivatives(self, g: f64) -> (f64, f64, f64) {
        match self {
            Phi::Exp => {
                let e = g.exp();
                (e, e, e)
            }
            Phi::Power(k) => (g.powf(k), k * g.powf(k - 1.0), k * (k - 1.0) * g.powf(k - 2.0)),
        }
    }
}

/// `φ(g)`, differentiated by the chain rule on gradients and Hessians.
pub struct Composed {
    pub phi: Phi,
    pub inner: Box<dyn GeneratorFn>,
}

impl GeneratorFn for Composed {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError> {
        let j = self.inner.jet(x, u)?;
        let (f0, f1, f2) = self.phi.derivatives(j.value);
        Ok(Jet {
            value: f0,
            hess_x: &j.grad_x * j.grad_x.transpose() * f2 + &j.hess_x * f1,
            hess_u: &j.grad_u * j.grad_u.transpose() * f2 + &j.hess_u * f1,
            grad_x: j.grad_x * f1,
            grad_u: j.grad_u * f1,
        })
    }
}

/// `f g` by the product rule.
pub struct Product(pub Box<dyn GeneratorFn>, pub Box<dyn GeneratorFn>);

impl GeneratorFn for Product {
    fn jet(&self, x: &[f64], u: &[f64]) -> Result<Jet, TheoryError> {
        let a = self.0.jet(x, u)?;
        let b = self.1.jet(x, u)?;
        let cross = |ga: &DVector<f64>, gb: &DVector<f64>| ga * gb.transpose() + gb * ga.transpose();
        Ok(Jet {
            value: a.value * b.value,
            grad_x: &a.grad_x * b.value + &b.grad_x * a.value,
            grad_u: &a.grad_u * b.value + &b.grad_u * a.value,
            hess_x: &a.hess_x * b.value + &b.hess_x * a.value + cross(&a.grad_x, &b.grad_x),
            hess_u: &a.hess_u * b.value + &b.hess_u * a.value + cross(&a.grad_u, &b.grad_u),
        })
    }
}

fn check_dims(j: &Jet, x: &[f64], u: &[f64]) -> Result<(), TheoryError> {
    if j.grad_x.len() != x.len() {
        return Err(TheoryError::Dimension {
            expected: j.grad_x.len(),
            got: x.len(),
        });
    }
    if j.grad_u.len() != u.len() {
        return Err(TheoryError::Dimension {
            expected: j.grad_u.len(),
            got: u.len(),
        });
    }
    Ok(())
}

/// `𝓛f = -⟨B(u)x, ∇_x f⟩ + ⟨h, ∇_u f⟩ + ½ tr(ΣΣᵀ∇²_x f) + ½ tr ∇²_u f`,
/// with `B = b I` and `Σ = σ_x I` for scalar models.
pub fn apply_generator(f: &dyn GeneratorFn, model: &ModelSpec, x: &[f64], u: &[f64]) -> Result<f64, TheoryError> {
    if x.len() != model.dim_x() {
        return Err(TheoryError::Dimension {
            expected: model.dim_x(),
            got: x.len(),
        });
    }
    let drift = model.drift();
    if u.len() != drift.dim() {
        return Err(TheoryError::Dimension {
            expected: drift.dim(),
            got: u.len(),
        });
    }
    let j = f.jet(x, u)?;
    check_dims(&j, x, u)?;
    let h = DVector::from_vec(drift.eval(u));
    let xv = DVector::from_column_slice(x);
    let (transport, diffusion) = match model {
        ModelSpec::Scalar(m) => {
            let b = m.damping.eval(u[m.damping.coordinate()]);
            (-b * xv.dot(&j.grad_x), 0.5 * m.sigma_x * m.sigma_x * j.hess_x.trace())
        }
        ModelSpec::Matrix(m) => {
            let bm = m.damping_matrix(u);
            let s = m.sigma();
            let cov = s * s.transpose();
            (-(bm * xv).dot(&j.grad_x), 0.5 * (cov * &j.hess_x).trace())
        }
    };
    Ok(transport + h.dot(&j.grad_u) + diffusion + 0.5 * j.hess_u.trace())
}

/// `Γ(f, g) = ½σ_x²⟨∇_x f, ∇_x g⟩ + ½⟨∇_u f, ∇_u g⟩`.
pub fn carre_du_champ(
    f: &dyn GeneratorFn,
    g: &dyn GeneratorFn,
    x: &[f64],
    u: &[f64],
    sigma_x: f64,
) -> Result<f64, TheoryError> {
    let a = f.jet(x, u)?;
    let b = g.jet(x, u)?;
    check_dims(&a, x, u)?;
    check_dims(&b, x, u)?;
    Ok(0.5 * sigma_x * sigma_x * a.grad_x.dot(&b.grad_x) + 0.5 * a.grad_u.dot(&b.grad_u))
}
