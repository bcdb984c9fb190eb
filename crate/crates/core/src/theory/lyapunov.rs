//! Pointwise grid certificates for the two drift inequalities driving the
//! moment bounds: the lower one for `η = -c‖u-u*‖^m` and the upper one
//! for a potential `θ`.

use serde::{Deserialize, Serialize};

use super::generator::{apply_generator, Block, GeneratorFn, RadialPower};
use super::{domain, TheoryError};
use crate::model::{DampingSpec, DriftSpec, ModelSpec, ScalarModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityId {
    /// `tr∇²η + q‖∇η‖² + 2⟨h,∇η⟩ >= 2b + 2q⁻¹(δ + δ|b| + ρ)`
    EtaLower,
    /// `𝓛θ <= b̃ - q⁻¹(ρ+δ) - ½q‖∇θ‖²`, `b̃ = b - q⁻¹δ|b|`
    ThetaUpper,
}

/// Slack terms of the drift inequalities, in absolute units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub delta: f64,
    pub rho: f64,
}

impl Slack {
    pub const DELTA_FRACTION: f64 = 0.05;
    pub const RHO_FRACTION: f64 = 0.01;

    /// The default slacks, proportional to `⟨π,b⟩`.
    pub fn default_for(pi_average: f64) -> Self {
        let scale = pi_average.abs();
        Self {
            delta: Self::DELTA_FRACTION * scale,
            rho: Self::RHO_FRACTION * scale,
        }
    }
}

/// Budget and outcome of the `(c, q)` search for `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSearch {
    pub c_range: (f64, f64),
    pub q_range: (f64, f64),
    pub points_per_axis: usize,
    pub evaluated: usize,
    pub found: bool,
    /// Largest minimum margin over all pairs tried.
    pub best_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheckReport {
    pub inequality: InequalityId,
    pub grid: Vec<f64>,
    pub margins: Vec<f64>,
    #[serde(with = "crate::numeric::ext_f64")]
    pub min_margin: f64,
    pub argmin: f64,
    pub pass: bool,
    pub q: f64,
    pub slack: Slack,
    pub c: Option<f64>,
    pub m: Option<f64>,
    pub center: Option<f64>,
    pub search: Option<EtaSearch>,
    /// Comparison of the dominant powers at infinity, when known.
    pub leading_order: Option<String>,
}

fn scalar_model(damping: &DampingSpec, drift: &DriftSpec) -> Result<ModelSpec, TheoryError> {
    if drift.dim() != 1 {
        return Err(TheoryError::Unsupported(format!(
            "grid certificates need a scalar hidden process, got dimension {}",
            drift.dim()
        )));
    }
    if damping.coordinate() != 0 {
        return Err(TheoryError::Dimension {
            expected: damping.coordinate() + 1,
            got: 1,
        });
    }
    Ok(ModelSpec::Scalar(ScalarModel::new(damping.clone(), drift.clone(), 0.0)))
}

fn check_grid(grid: &[f64]) -> Result<(), TheoryError> {
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(domain("grid must be nonempty and finite"));
    }
    Ok(())
}

/// Evaluates one inequality pointwise; the margin is LHS - RHS in the
/// orientation where "holds" means nonnegative.
pub fn verify_drift_inequality(
    candidate: &dyn GeneratorFn,
    inequality: InequalityId,
    damping: &DampingSpec,
    drift: &DriftSpec,
    q: f64,
    slack: Slack,
    grid: &[f64],
) -> Result<LyapunovCheckReport, TheoryError> {
    if !(q.is_finite() && q > 0.0) {
        return Err(domain(format!("q must be positive, got {q}")));
    }
    if !(slack.delta >= 0.0 && slack.rho >= 0.0) {
        return Err(domain("slacks must be nonnegative"));
    }
    check_grid(grid)?;
    let model = scalar_model(damping, drift)?;
    let mut margins = Vec::with_capacity(grid.len());
    for &u in grid {
        let jet = candidate.jet(&[0.0], &[u])?;
        let gen = apply_generator(candidate, &model, &[0.0], &[u])?;
        let grad2 = jet.grad_u.norm_squared();
        let b = damping.eval(u);
        let margin = match inequality {
            InequalityId::EtaLower => {
                2.0 * gen + q * grad2 - 2.0 * b - 2.0 / q * (slack.delta + slack.delta * b.abs() + slack.rho)
            }
            InequalityId::ThetaUpper => {
                let bt = b - slack.delta * b.abs() / q;
                bt - (slack.rho + slack.delta) / q - 0.5 * q * grad2 - gen
            }
        };
        margins.push(margin);
    }
    let (i, min_margin) =
        margins.iter().copied().enumerate().fold(
            (0, f64::INFINITY),
            |a, (i, v)| if v < a.1 || v.is_nan() { (i, v) } else { a },
        );
    Ok(LyapunovCheckReport {
        inequality,
        grid: grid.to_vec(),
        pass: min_margin >= 0.0,
        argmin: grid[i],
        margins,
        min_margin,
        q,
        slack,
        c: None,
        m: None,
        center: None,
        search: None,
        leading_order: None,
    })
}

pub const ETA_C_RANGE: (f64, f64) = (1e-4, 1.0);
pub const ETA_Q_RANGE: (f64, f64) = (1.0, 1e4);
pub const ETA_POINTS: usize = 41;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default centre of the `η` family: the minimiser of `b` within two
/// stationary standard deviations of the hidden mean.
pub fn default_eta_center(damping: &DampingSpec, drift: &DriftSpec) -> f64 {
    let (mean, sd) = drift.typical_scale(0);
    let n = 401;
    (0..n)
        .map(|i| mean - 2.0 * sd + 4.0 * sd * i as f64 / (n - 1) as f64)
        .fold((mean, f64::INFINITY), |best, u| {
            let b = damping.eval(u);
            if b < best.1 {
                (u, b)
            } else {
                best
            }
        })
        .0
}

/// Scans `q` upward and, for each, `c` downward on log grids; the first
/// pair whose margins are all nonnegative is returned.
pub fn search_eta(
    damping: &DampingSpec,
    drift: &DriftSpec,
    m: f64,
    grid: &[f64],
    slack: Slack,
    center: Option<f64>,
) -> Result<LyapunovCheckReport, TheoryError> {
    if !(m.is_finite() && m >= 2.0) {
        return Err(domain(format!("η exponent m must be at least 2, got {m}")));
    }
    check_grid(grid)?;
    let model = scalar_model(damping, drift)?;
    let center = center.unwrap_or_else(|| default_eta_center(damping, drift));
    // With η = c η₁: margin = c A + q c² G - 2b - 2q⁻¹(δ + δ|b| + ρ).
    let unit = RadialPower::new(Block::U, -1.0, m, vec![center]);
    let mut pts = Vec::with_capacity(grid.len());
    for &u in grid {
        let jet = unit.jet(&[0.0], &[u])?;
        let a = 2.0 * apply_generator(&unit, &model, &[0.0], &[u])?;
        pts.push((a, jet.grad_u.norm_squared(), damping.eval(u)));
    }
    let c_grid = log_grid(ETA_C_RANGE.0, ETA_C_RANGE.1, ETA_POINTS);
    let q_grid = log_grid(ETA_Q_RANGE.0, ETA_Q_RANGE.1, ETA_POINTS);
    let mut best = (f64::NEG_INFINITY, c_grid[ETA_POINTS - 1], q_grid[0]);
    let mut evaluated = 0;
    let mut found = None;
    'outer: for &q in &q_grid {
        for &c in c_grid.iter().rev() {
            evaluated += 1;
            let worst = pts
                .iter()
                .map(|(a, g, b)| {
                    c * a + q * c * c * g - 2.0 * b - 2.0 / q * (slack.delta + slack.delta * b.abs() + slack.rho)
                })
                .fold(f64::INFINITY, f64::min);
            if worst > best.0 {
                best = (worst, c, q);
            }
            if worst >= 0.0 {
                found = Some((c, q));
                break 'outer;
            }
        }
    }
    let (c, q) = found.unwrap_or((best.1, best.2));
    let eta = RadialPower::new(Block::U, -c, m, vec![center]);
    let mut report = verify_drift_inequality(&eta, InequalityId::EtaLower, damping, drift, q, slack, grid)?;
    report.c = Some(c);
    report.m = Some(m);
    report.center = Some(center);
    report.search = Some(EtaSearch {
        c_range: ETA_C_RANGE,
        q_range: ETA_Q_RANGE,
        points_per_axis: ETA_POINTS,
        evaluated,
        found: found.is_some() && report.pass,
        best_margin: best.0,
    });
    // At infinity the q c² m² r^{2m-2} term must dominate b.
    let deg = damping.degree();
    report.leading_order = Some(if 2.0 * m - 2.0 > deg {
        format!(
            "gradient term of order {} dominates damping growth {}",
            2.0 * m - 2.0,
            deg
        )
    } else {
        format!(
            "gradient term of order {} does not dominate damping growth {}",
            2.0 * m - 2.0,
            deg
        )
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=240).map(|i| -6.0 + 0.05 * i as f64).collect()
    }

    #[test]
    fn eta_search_unstable_affine() {
        let b = DampingSpec::affine(1.0, 3.0, 0.0);
        let d = DriftSpec::ou(2.0);
        let r = search_eta(&b, &d, 2.0, &grid(), Slack::default_for(1.0), None).unwrap();
        assert_eq!(r.center, Some(-1.0));
        assert!(r.pass, "min margin {}", r.min_margin);
        assert!(r.search.as_ref().unwrap().found);
        assert!(r.min_margin >= 0.0);
    }

    #[test]
    fn constant_damping_eta_zero_fails() {
        let b = DampingSpec::constant(1.0);
        let d = DriftSpec::ou(2.0);
        let zero = RadialPower::new(Block::U, 0.0, 2.0, vec![]);
        let s = Slack::default_for(1.0);
        let r = verify_drift_inequality(&zero, InequalityId::EtaLower, &b, &d, 1.0, s, &grid()).unwrap();
        let expected = -(2.0 + 2.0 * (s.delta + s.delta + s.rho));
        assert!(!r.pass);
        assert!((r.min_margin - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_theta_plug_in() {
        let gamma = 2.0;
        let b = DampingSpec::affine(0.0, 1.0, 0.0);
        let d = DriftSpec::ou(gamma);
        let theta = crate::theory::generator::LinearU {
            weights: vec![-1.0 / gamma],
            offset: 0.0,
        };
        for (q, s) in [
            (0.5, Slack { delta: 0.0, rho: 0.0 }),
            (2.0, Slack { delta: 0.0, rho: 0.03 }),
        ] {
            let r = verify_drift_inequality(&theta, InequalityId::ThetaUpper, &b, &d, q, s, &grid()).unwrap();
            let expected = -(s.rho + s.delta) / q - 0.5 * q / (gamma * gamma);
            for m in &r.margins {
                assert!((m - expected).abs() < 1e-12);
            }
        }
    }
}
