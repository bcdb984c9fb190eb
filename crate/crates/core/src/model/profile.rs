//! Shape of a damping function: sign structure of its zero set, Lipschitz
//! constant and average under the stationary law of the hidden process.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::{DampingKind, DampingSpec, DriftSpec, ModelError};
use crate::integrate::rng::{StreamKey, StreamPurpose};
use crate::numeric::normal_expectation;

/// Zero-value tolerance for tabulated dampings.
pub const TABULATED_ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `mean ± width * sd` of the stationary marginal of `coordinate`.
    pub fn stationary_box(drift: &DriftSpec, coordinate: usize, width: f64) -> Self {
        let (m, sd) = drift.typical_scale(coordinate);
        Self::new(m - width * sd, m + width * sd)
    }

    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroSetKind {
    NegativeSomewhere,
    ZeroOnInterval,
    ZeroAtPoint,
    BoundedBelowPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiProvenance {
    ClosedForm,
    GaussHermite,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiAverage {
    pub value: f64,
    pub error: f64,
    pub provenance: PiProvenance,
}

/// Long-run Monte Carlo budget for π-averages under non-Gaussian laws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    pub t_final: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub seed: u64,
}

impl Default for McBudget {
    fn default() -> Self {
        Self {
            t_final: 2.0e4,
            dt: 1e-2,
            burn_in: 50.0,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub infimum: f64,
    pub zero_set_kind: ZeroSetKind,
    /// Where `b` vanishes, when that is an interval or a point.
    pub zero_set: Option<Interval>,
    pub lipschitz_constant: f64,
    pub global_lipschitz: f64,
    pub pi_average: PiAverage,
    pub growth_exponent: f64,
    pub verification_box: Interval,
    /// Grid spacing used when the zero set came from table inspection.
    pub resolution: Option<f64>,
    pub damping: DampingSpec,
    pub drift: DriftSpec,
}

pub fn damping_profile(spec: &DampingSpec, drift: &DriftSpec, bx: Interval) -> Result<Profile, ModelError> {
    if !(bx.lo < bx.hi) || !bx.lo.is_finite() || !bx.hi.is_finite() {
        return Err(ModelError::EmptyBox { lo: bx.lo, hi: bx.hi });
    }
    if spec.coordinate() >= drift.dim() {
        return Err(ModelError::Dimension {
            expected: spec.coordinate() + 1,
            got: drift.dim(),
        });
    }
    let (zero_set_kind, zero_set, resolution) = zero_structure(spec);
    let pi = pi_average_with(spec, drift, Some(&McBudget::default()))?;
    Ok(Profile {
        infimum: infimum_on(spec, bx),
        zero_set_kind,
        zero_set,
        lipschitz_constant: spec.lipschitz_on(bx.lo, bx.hi),
        global_lipschitz: spec.global_lipschitz(),
        pi_average: pi,
        growth_exponent: spec.degree().max(2.0),
        verification_box: bx,
        resolution,
        damping: spec.clone(),
        drift: drift.clone(),
    })
}

fn infimum_on(spec: &DampingSpec, bx: Interval) -> f64 {
    let clamp = |v: f64| v.clamp(bx.lo, bx.hi);
    match spec.kind() {
        DampingKind::Affine { .. } => spec.eval(bx.lo).min(spec.eval(bx.hi)),
        DampingKind::Hinge { shift, .. } => spec.eval(clamp(-shift)),
        DampingKind::Power { .. } => spec.eval(clamp(0.0)),
        DampingKind::Constant { value } => *value,
        DampingKind::Tabulated { grid, .. } => grid
            .iter()
            .copied()
            .filter(|g| *g > bx.lo && *g < bx.hi)
            .chain([bx.lo, bx.hi])
            .map(|g| spec.eval(g))
            .fold(f64::INFINITY, f64::min),
    }
}

fn zero_structure(spec: &DampingSpec) -> (ZeroSetKind, Option<Interval>, Option<f64>) {
    use ZeroSetKind::*;
    let constant = |v: f64| {
        if v < 0.0 {
            (NegativeSomewhere, None, None)
        } else if v == 0.0 {
            (
                ZeroOnInterval,
                Some(Interval::new(f64::NEG_INFINITY, f64::INFINITY)),
                None,
            )
        } else {
            (BoundedBelowPositive, None, None)
        }
    };
    match spec.kind() {
        DampingKind::Affine { intercept, slope, .. } => {
            if *slope != 0.0 {
                (NegativeSomewhere, None, None)
            } else {
                constant(*intercept)
            }
        }
        DampingKind::Constant { value } => constant(*value),
        DampingKind::Hinge { shift, offset, .. } => {
            let z = Interval::new(-shift - offset, -shift + offset);
            if *offset > 0.0 {
                (ZeroOnInterval, Some(z), None)
            } else {
                (ZeroAtPoint, Some(z), None)
            }
        }
        DampingKind::Power { offset, .. } => {
            if *offset > 0.0 {
                (BoundedBelowPositive, None, None)
            } else {
                (ZeroAtPoint, Some(Interval::new(0.0, 0.0)), None)
            }
        }
        DampingKind::Tabulated { grid, values } => {
            let res = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            if values.iter().any(|v| *v < -TABULATED_ZERO_TOL) {
                return (NegativeSomewhere, None, Some(res));
            }
            let zero: Vec<bool> = values.iter().map(|v| v.abs() <= TABULATED_ZERO_TOL).collect();
            let n = zero.len();
            let first = zero.iter().position(|z| *z);
            let Some(first) = first else {
                return (BoundedBelowPositive, None, Some(res));
            };
            let last = zero.iter().rposition(|z| *z).unwrap();
            let run = zero.windows(2).any(|w| w[0] && w[1]);
            let lo = if zero[0] { f64::NEG_INFINITY } else { grid[first] };
            let hi = if zero[n - 1] { f64::INFINITY } else { grid[last] };
            let span = Some(Interval::new(lo, hi));
            if run || zero[0] || zero[n - 1] {
                (ZeroOnInterval, span, Some(res))
            } else {
                (ZeroAtPoint, span, Some(res))
            }
        }
    }
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn big_phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E max(W, 0)` for `W ~ N(m, s²)`.
fn positive_part_mean(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        return m.max(0.0);
    }
    s * phi(m / s) + m * big_phi(m / s)
}

/// `⟨π, b⟩` with the default strategy: closed form, then Gauss–Hermite.
/// Gradient drifts need a Monte Carlo budget, see [`pi_average_with`].
pub fn pi_average(spec: &DampingSpec, drift: &DriftSpec) -> Result<PiAverage, ModelError> {
    pi_average_with(spec, drift, None)
}

pub fn pi_average_with(
    spec: &DampingSpec,
    drift: &DriftSpec,
    budget: Option<&McBudget>,
) -> Result<PiAverage, ModelError> {
    let coord = spec.coordinate();
    if coord >= drift.dim() {
        return Err(ModelError::Dimension {
            expected: coord + 1,
            got: drift.dim(),
        });
    }
    let Some((mu, sd)) = drift.marginal(coord) else {
        let budget = budget.ok_or_else(|| {
            ModelError::Unsupported("π-average under a gradient drift needs a Monte Carlo budget".into())
        })?;
        return Ok(monte_carlo_average(spec, drift, budget));
    };
    let closed = |value: f64| PiAverage {
        value,
        error: 0.0,
        provenance: PiProvenance::ClosedForm,
    };
    let out = match spec.kind() {
        DampingKind::Constant { value } => closed(*value),
        DampingKind::Affine {
            intercept,
            slope,
            shift,
        } => closed(intercept + slope * (mu + shift)),
        DampingKind::Hinge { shift, offset, scale } => {
            let m = mu + shift;
            closed(scale * (positive_part_mean(m - offset, sd) + positive_part_mean(-m - offset, sd)))
        }
        DampingKind::Power { exponent, offset } if mu == 0.0 => {
            // E|Z|^c = σ^c 2^{c/2} Γ((c+1)/2) / √π
            let c = *exponent;
            let log_m = c * sd.ln() + 0.5 * c * std::f64::consts::LN_2 + ln_gamma((c + 1.0) / 2.0)
                - 0.5 * std::f64::consts::PI.ln();
            closed(log_m.exp() + offset)
        }
        _ => gauss_hermite_average(spec, mu, sd),
    };
    Ok(out)
}

fn gauss_hermite_average(spec: &DampingSpec, mu: f64, sd: f64) -> PiAverage {
    let q64 = normal_expectation(|v| spec.eval(v), mu, sd, 64);
    let q48 = normal_expectation(|v| spec.eval(v), mu, sd, 48);
    PiAverage {
        value: q64,
        error: (q64 - q48).abs(),
        provenance: PiProvenance::GaussHermite,
    }
}

fn monte_carlo_average(spec: &DampingSpec, drift: &DriftSpec, budget: &McBudget) -> PiAverage {
    const BATCHES: usize = 20;
    let mut rng = StreamKey::new(budget.seed, StreamPurpose::PiAverage, 0).rng();
    let (center, _) = drift.typical_scale(spec.coordinate());
    let mut u = vec![center; drift.dim()];
    let mut h = vec![0.0; drift.dim()];
    let sq = budget.dt.sqrt();
    let burn = (budget.burn_in / budget.dt).ceil() as usize;
    let n = ((budget.t_final / budget.dt).ceil() as usize).max(BATCHES);
    let per = n / BATCHES;
    let mut batch_means = Vec::with_capacity(BATCHES);
    let mut step = |u: &mut Vec<f64>| {
        drift.eval_into(u, &mut h);
        for (ui, hi) in u.iter_mut().zip(&h) {
            let xi: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            *ui += hi * budget.dt + sq * xi;
        }
    };
    for _ in 0..burn {
        step(&mut u);
    }
    for _ in 0..BATCHES {
        let mut acc = 0.0;
        for _ in 0..per {
            step(&mut u);
            acc += spec.eval(u[spec.coordinate()]);
        }
        batch_means.push(acc / per as f64);
    }
    let mean = batch_means.iter().sum::<f64>() / BATCHES as f64;
    let var = batch_means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    PiAverage {
        value: mean,
        error: (var / BATCHES as f64).sqrt(),
        provenance: PiProvenance::MonteCarlo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou2() -> DriftSpec {
        DriftSpec::ou(2.0)
    }

    fn box6() -> Interval {
        Interval::stationary_box(&ou2(), 0, 6.0)
    }

    #[test]
    fn affine_profile() {
        let p = damping_profile(&DampingSpec::affine(1.0, 3.0, 0.0), &ou2(), box6()).unwrap();
        assert_eq!(p.zero_set_kind, ZeroSetKind::NegativeSomewhere);
        assert_eq!(p.pi_average.value, 1.0);
        assert_eq!(p.pi_average.provenance, PiProvenance::ClosedForm);
        assert_eq!(p.lipschitz_constant, 3.0);
        assert_eq!(p.infimum, 1.0 - 9.0);
        assert_eq!(p.growth_exponent, 2.0);
    }

    #[test]
    fn hinge_zero_interval() {
        let p = damping_profile(&DampingSpec::hinge(1.0, 1.0, 1.0), &ou2(), box6()).unwrap();
        assert_eq!(p.zero_set_kind, ZeroSetKind::ZeroOnInterval);
        assert_eq!(p.zero_set, Some(Interval::new(-2.0, 0.0)));
        assert_eq!(p.infimum, 0.0);
    }

    #[test]
    fn power_zero_point_and_positive() {
        let p = damping_profile(&DampingSpec::power(2.0, 0.0), &ou2(), box6()).unwrap();
        assert_eq!(p.zero_set_kind, ZeroSetKind::ZeroAtPoint);
        assert_eq!(p.zero_set, Some(Interval::new(0.0, 0.0)));
        let p = damping_profile(&DampingSpec::power(4.0, 1.0), &ou2(), box6()).unwrap();
        assert_eq!(p.zero_set_kind, ZeroSetKind::BoundedBelowPositive);
        assert_eq!(p.growth_exponent, 4.0);
        assert!((p.lipschitz_constant - 4.0 * 27.0).abs() < 1e-12);
    }

    #[test]
    fn empty_box_is_an_error() {
        let e = damping_profile(&DampingSpec::constant(1.0), &ou2(), Interval::new(1.0, 1.0));
        assert!(matches!(e, Err(ModelError::EmptyBox { .. })));
    }

    #[test]
    fn tabulated_zero_structure_by_inspection() {
        let t = |v: Vec<f64>| DampingSpec::tabulated(vec![-2.0, -1.0, 0.0, 1.0, 2.0], v).unwrap();
        let kind = |d: &DampingSpec| zero_structure(d).0;
        assert_eq!(kind(&t(vec![1.0, 0.5, -0.1, 0.5, 1.0])), ZeroSetKind::NegativeSomewhere);
        assert_eq!(kind(&t(vec![1.0, 0.0, 0.0, 0.5, 1.0])), ZeroSetKind::ZeroOnInterval);
        assert_eq!(kind(&t(vec![0.0, 0.5, 0.5, 0.5, 1.0])), ZeroSetKind::ZeroOnInterval);
        assert_eq!(kind(&t(vec![1.0, 0.5, 0.0, 0.5, 1.0])), ZeroSetKind::ZeroAtPoint);
        assert_eq!(kind(&t(vec![1.0, 0.5, 1e-13, 0.5, 1.0])), ZeroSetKind::ZeroAtPoint);
        assert_eq!(
            kind(&t(vec![1.0, 0.5, 0.2, 0.5, 1.0])),
            ZeroSetKind::BoundedBelowPositive
        );
        assert_eq!(zero_structure(&t(vec![1.0; 5])).2, Some(1.0));
    }

    #[test]
    fn pi_average_closed_forms() {
        assert_eq!(pi_average(&DampingSpec::constant(1.0), &ou2()).unwrap().value, 1.0);
        let p = pi_average(&DampingSpec::affine(1.0, 3.0, 0.0), &ou2()).unwrap();
        assert_eq!((p.value, p.error), (1.0, 0.0));
        // E Z² + 1 with Var Z = 1/4
        let p = pi_average(&DampingSpec::power(2.0, 1.0), &ou2()).unwrap();
        assert!((p.value - 1.25).abs() < 1e-14);
    }

    #[test]
    fn hinge_closed_form_matches_quadrature() {
        let d = DampingSpec::hinge(1.0, 1.0, 1.0);
        let closed = pi_average(&d, &ou2()).unwrap();
        assert_eq!(closed.provenance, PiProvenance::ClosedForm);
        // Midpoint rule on the Gaussian density; quadrature over the kinks
        // converges too slowly to serve as the oracle.
        let (n, lo, hi) = (400_000, -6.0, 6.0);
        let h = (hi - lo) / n as f64;
        let mid: f64 = (0..n)
            .map(|i| {
                let u = lo + (i as f64 + 0.5) * h;
                d.eval(u) * (-2.0 * u * u).exp() * (2.0 / std::f64::consts::PI).sqrt() * h
            })
            .sum();
        assert!((closed.value - mid).abs() < 1e-9, "{} vs {mid}", closed.value);
        assert!((closed.value - 0.1995).abs() < 5e-4, "{}", closed.value);
    }

    #[test]
    fn odd_tabulated_averages_to_zero() {
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.15).collect();
        let vals: Vec<f64> = grid.iter().map(|g: &f64| g.powi(3) - 0.5 * g).collect();
        let d = DampingSpec::tabulated(grid, vals).unwrap();
        let p = pi_average(&d, &ou2()).unwrap();
        assert_eq!(p.provenance, PiProvenance::GaussHermite);
        assert!(p.value.abs() < 1e-12);
    }

    #[test]
    fn gradient_needs_budget() {
        let g = DriftSpec::gradient(0.0, 1.0).unwrap();
        assert!(matches!(
            pi_average(&DampingSpec::power(2.0, 0.0), &g),
            Err(ModelError::Unsupported(_))
        ));
        // E u² under exp(-u⁴/2): Γ(3/4)/Γ(1/4) * √2.
        let exact = (ln_gamma(0.75) - ln_gamma(0.25)).exp() * 2f64.sqrt();
        let p = pi_average_with(&DampingSpec::power(2.0, 0.0), &g, Some(&McBudget::default())).unwrap();
        assert_eq!(p.provenance, PiProvenance::MonteCarlo);
        assert!(
            (p.value - exact).abs() < 4.0 * p.error + 0.01,
            "{} vs {exact} ± {}",
            p.value,
            p.error
        );
    }
}
