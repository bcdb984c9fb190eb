//! Tail class of `‖X‖` from the zero structure of the damping, with the
//! moment thresholds that come with it.

use serde::{Deserialize, Serialize};

use super::am::{check_am_with, AmOptions};
use super::lyapunov::{search_eta, Slack};
use super::TheoryError;
use crate::analysis::TailClass;
use crate::model::{
    damping_profile, surrogate_damping, ContractionCertificate, DampingKind, DampingSpec, DriftKind, Interval,
    MatrixModel, Profile, ZeroSetKind,
};
use crate::numeric::ext_f64;

/// Heaviest and lightest class compatible with the surrogate bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRange {
    pub heaviest: TailClass,
    pub lightest: TailClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPrediction {
    pub class: TailClass,
    /// Present when upper and lower surrogate statements disagree.
    pub class_range: Option<ClassRange>,
    /// All moments of order below this stay bounded.
    #[serde(with = "ext_f64")]
    pub p_up: f64,
    /// All moments of order above this blow up.
    #[serde(with = "ext_f64")]
    pub p_low: f64,
    pub q0: Option<f64>,
    pub variance_infinite: bool,
    /// Bounds on the `p log p` coefficient of `log E‖X‖^{2p}`.
    pub scaling_lower: Option<f64>,
    pub scaling_upper: Option<f64>,
    /// Largest `m` with a passing `𝒜_m` certificate, for intermediate tails.
    pub am_level: Option<u32>,
    pub pi_average: f64,
    pub notes: Vec<String>,
}

impl TailPrediction {
    fn empty(class: TailClass, pi_average: f64) -> Self {
        Self {
            class,
            class_range: None,
            p_up: f64::INFINITY,
            p_low: f64::INFINITY,
            q0: None,
            variance_infinite: false,
            scaling_lower: None,
            scaling_upper: None,
            am_level: None,
            pi_average,
            notes: Vec::new(),
        }
    }
}

/// Grid size for box certificates run by the classifier.
const CLASSIFY_GRID: usize = 1201;
const AM_LEVELS: u32 = 4;
const ETA_EXPONENT: f64 = 2.0;

/// `2⟨π,b⟩γ²/(C²‖b‖²_Lip)`; infinite for constant dampings.
pub fn moment_upper_threshold(profile: &Profile, certificate: &ContractionCertificate) -> Result<f64, TheoryError> {
    let pi = profile.pi_average.value;
    if !(pi > 0.0) {
        return Err(TheoryError::Domain(format!("⟨π,b⟩ = {pi} is not positive")));
    }
    let lip = profile.global_lipschitz;
    if !lip.is_finite() {
        return Err(TheoryError::InfiniteLipschitz);
    }
    if lip == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (c, g) = (certificate.c_gamma, certificate.gamma);
    Ok(2.0 * pi * (g * g) / (c * c * (lip * lip)))
}

fn spekf_with_mean(damping: &DampingSpec, gamma: f64, mean: f64) -> Result<f64, TheoryError> {
    match damping.kind() {
        DampingKind::Affine {
            intercept,
            slope,
            shift,
        } if *slope != 0.0 => Ok(2.0 * (intercept + slope * (mean + shift)) * (gamma * gamma) / (slope * slope)),
        _ => Err(TheoryError::Unsupported(format!(
            "exact threshold needs an affine damping with nonzero slope, got {}",
            damping.label()
        ))),
    }
}

/// `q₀ = 2 m_u γ² / slope` for `b = slope (u + m_u)` under a centred OU
/// process with rate `γ`.
pub fn spekf_exact_threshold(damping: &DampingSpec, gamma: f64) -> Result<f64, TheoryError> {
    spekf_with_mean(damping, gamma, 0.0)
}

fn class_of(kind: ZeroSetKind) -> TailClass {
    match kind {
        ZeroSetKind::NegativeSomewhere => TailClass::Polynomial,
        ZeroSetKind::ZeroOnInterval => TailClass::Exponential,
        ZeroSetKind::ZeroAtPoint => TailClass::Intermediate,
        ZeroSetKind::BoundedBelowPositive => TailClass::Gaussian,
    }
}

fn kebab(kind: ZeroSetKind) -> &'static str {
    match kind {
        ZeroSetKind::NegativeSomewhere => "negative somewhere",
        ZeroSetKind::ZeroOnInterval => "zero on an interval",
        ZeroSetKind::ZeroAtPoint => "zero at isolated points",
        ZeroSetKind::BoundedBelowPositive => "bounded below by a positive constant",
    }
}

pub fn classify(
    profile: &Profile,
    certificate: Option<&ContractionCertificate>,
) -> Result<TailPrediction, TheoryError> {
    let pi = profile.pi_average.value;
    if !(pi > 0.0) {
        let mut out = TailPrediction::empty(TailClass::NotClassifiable, pi);
        out.notes.push(format!("average damping nonpositive: ⟨π,b⟩ = {pi}"));
        return Ok(out);
    }
    let class = class_of(profile.zero_set_kind);
    let mut out = TailPrediction::empty(class, pi);
    out.notes
        .push(format!("⟨π,b⟩ = {pi:.6} > 0 ({:?})", profile.pi_average.provenance));
    out.notes.push(format!(
        "damping {} is {}",
        profile.damping.label(),
        kebab(profile.zero_set_kind)
    ));
    if let Some(c) = certificate {
        out.notes.push(format!(
            "hidden process contracts with C = {}, γ = {} ({:?})",
            c.c_gamma, c.gamma, c.provenance
        ));
    }
    match class {
        TailClass::Polynomial => polynomial(profile, certificate, &mut out)?,
        TailClass::Exponential => {
            out.scaling_lower = Some(2.0);
            out.scaling_upper = Some(2.0);
        }
        TailClass::Intermediate => intermediate(profile, &mut out)?,
        TailClass::Gaussian => out.scaling_upper = Some(1.0),
        TailClass::NotClassifiable => {}
    }
    Ok(out)
}

fn polynomial(
    profile: &Profile,
    certificate: Option<&ContractionCertificate>,
    out: &mut TailPrediction,
) -> Result<(), TheoryError> {
    let cert = certificate.ok_or_else(|| TheoryError::MissingCertificate("the polynomial moment threshold".into()))?;
    out.p_up = match moment_upper_threshold(profile, cert) {
        Ok(p) => p,
        Err(TheoryError::InfiniteLipschitz) => {
            out.notes
                .push("damping is not globally Lipschitz; no finite-moment guarantee".into());
            0.0
        }
        Err(e) => return Err(e),
    };
    if let (DriftKind::Ou { gamma, mean }, Some(_)) = (profile.drift.kind(), profile.damping.affine_normal_form()) {
        let q0 = spekf_with_mean(&profile.damping, *gamma, *mean)?;
        out.q0 = Some(q0);
        out.p_low = q0;
        if q0 < 2.0 {
            out.variance_infinite = true;
            out.notes.push("variance infinite".into());
        } else if q0 == 2.0 {
            out.notes.push("variance borderline: q₀ = 2".into());
        }
    } else if profile.drift.dim() == 1 {
        let grid = profile.verification_box.grid(CLASSIFY_GRID);
        let slack = Slack::default_for(profile.pi_average.value);
        let report = search_eta(&profile.damping, &profile.drift, ETA_EXPONENT, &grid, slack, None)?;
        if report.pass {
            out.p_low = report.q;
            out.notes.push(format!(
                "η = -c|u-u*|² certificate with c = {:.3e}, q = {:.3e} on the box",
                report.c.unwrap_or(0.0),
                report.q
            ));
        } else {
            out.notes.push("no η certificate within the search budget".into());
        }
        out.variance_infinite = out.p_low < 2.0;
        if out.variance_infinite {
            out.notes.push("variance infinite".into());
        }
    }
    Ok(())
}

fn intermediate(profile: &Profile, out: &mut TailPrediction) -> Result<(), TheoryError> {
    out.scaling_upper = Some(2.0);
    if profile.drift.dim() != 1 {
        return Ok(());
    }
    let grid = profile.verification_box.grid(CLASSIFY_GRID);
    let center = profile.zero_set.map(|z| 0.5 * (z.lo + z.hi));
    let mut level = None;
    for m in 1..=AM_LEVELS {
        let opts = AmOptions {
            center,
            ..Default::default()
        };
        let cert = check_am_with(&profile.damping, &profile.drift, m, &grid, 4.0, &opts);
        if cert.map(|c| c.member).unwrap_or(false) {
            level = Some(m);
        }
    }
    out.am_level = level;
    match level {
        Some(m) => {
            out.scaling_lower = Some(2.0 - 0.5f64.powi(m as i32));
            out.notes
                .push(format!("𝒜_{m} certificate gives scaling exponent >= 2 - 1/2^{m}"));
        }
        None => out
            .notes
            .push("no 𝒜_m certificate for m <= 4; lower scaling bound unavailable".into()),
    }
    Ok(())
}

/// Classifies a matrix model through its scalar surrogates: the weakest
/// damping `b̄` bounds the tail from above, the strongest `b̲` from below.
pub fn classify_matrix(
    model: &MatrixModel,
    certificate: Option<&ContractionCertificate>,
    bx: Interval,
    grid_points: usize,
) -> Result<TailPrediction, TheoryError> {
    let coords: Vec<usize> = model.terms().iter().map(|t| t.damping.coordinate()).collect();
    let coord = coords[0];
    if coords.iter().any(|c| *c != coord) {
        return Err(TheoryError::Unsupported(
            "surrogate classification needs every term to read the same hidden coordinate".into(),
        ));
    }
    if grid_points < 2 {
        return Err(super::domain("surrogate grid needs at least two points"));
    }
    let drift = model.drift();
    let (mean, _) = drift.typical_scale(coord);
    let grid = bx.grid(grid_points);
    let mut u = vec![mean; drift.dim()];
    let (mut upper, mut lower) = (Vec::new(), Vec::new());
    for &g in &grid {
        u[coord] = g;
        let s = surrogate_damping(model, &u);
        upper.push(s.b_bar);
        lower.push(s.b_under);
    }
    let b_bar = DampingSpec::tabulated(grid.clone(), upper)?.on_coordinate(coord);
    let b_under = DampingSpec::tabulated(grid, lower)?.on_coordinate(coord);
    let up = classify(&damping_profile(&b_bar, drift, bx)?, certificate)?;
    let low = classify(&damping_profile(&b_under, drift, bx)?, certificate)?;
    let mut out = up.clone();
    out.notes = vec![format!("upper statements from b̄ (⟨π,b̄⟩ = {:.6})", up.pi_average)];
    out.notes.extend(up.notes.iter().map(|n| format!("b̄: {n}")));
    out.notes.extend(low.notes.iter().map(|n| format!("b̲: {n}")));
    out.p_low = low.p_low;
    if up.class != low.class {
        out.class_range = Some(ClassRange {
            heaviest: up.class,
            lightest: low.class,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{contraction_certificate, DriftSpec};

    fn predict(b: DampingSpec) -> TailPrediction {
        let d = DriftSpec::ou(2.0);
        let p = damping_profile(&b, &d, Interval::stationary_box(&d, 0, 6.0)).unwrap();
        classify(&p, Some(&contraction_certificate(&d).unwrap())).unwrap()
    }

    #[test]
    fn figure_classes() {
        assert_eq!(predict(DampingSpec::affine(1.0, 1.0, 0.0)).class, TailClass::Polynomial);
        assert_eq!(predict(DampingSpec::hinge(1.0, 1.0, 1.0)).class, TailClass::Exponential);
        assert_eq!(predict(DampingSpec::power(2.0, 1.0)).class, TailClass::Gaussian);
        assert_eq!(predict(DampingSpec::power(2.0, 0.0)).class, TailClass::Intermediate);
    }

    #[test]
    fn spekf_thresholds() {
        for (c, q) in [(3.0, 8.0 / 9.0), (2.0, 2.0), (1.0, 8.0)] {
            let b = DampingSpec::affine(1.0, c, 0.0);
            let q0 = spekf_exact_threshold(&b, 2.0).unwrap();
            assert!((q0 - q).abs() < 1e-14);
            let p = predict(b);
            assert_eq!(p.q0, Some(q0));
            assert_eq!(p.p_up, q0, "threshold consistency is exact");
            assert_eq!(p.variance_infinite, c == 3.0);
        }
        assert!(spekf_exact_threshold(&DampingSpec::constant(1.0), 2.0).is_err());
    }

    #[test]
    fn constant_damping_threshold_is_infinite() {
        let d = DriftSpec::ou(2.0);
        let p = damping_profile(&DampingSpec::constant(1.0), &d, Interval::new(-3.0, 3.0)).unwrap();
        let cert = contraction_certificate(&d).unwrap();
        assert_eq!(moment_upper_threshold(&p, &cert).unwrap(), f64::INFINITY);
    }

    #[test]
    fn missing_certificate() {
        let d = DriftSpec::ou(2.0);
        let p = damping_profile(&DampingSpec::affine(1.0, 1.0, 0.0), &d, Interval::new(-3.0, 3.0)).unwrap();
        assert!(matches!(classify(&p, None), Err(TheoryError::MissingCertificate(_))));
        let p = damping_profile(&DampingSpec::power(2.0, 1.0), &d, Interval::new(-3.0, 3.0)).unwrap();
        assert_eq!(classify(&p, None).unwrap().class, TailClass::Gaussian);
    }

    #[test]
    fn nonpositive_average() {
        let d = DriftSpec::ou(2.0);
        let p = damping_profile(&DampingSpec::affine(0.0, 1.0, 0.0), &d, Interval::new(-3.0, 3.0)).unwrap();
        let out = classify(&p, None).unwrap();
        assert_eq!(out.class, TailClass::NotClassifiable);
        assert!(out.notes[0].contains("average damping nonpositive"));
    }
}
