//! Grid certificate for membership of `(b, h)` in `𝒜_m`, built from the
//! nested radial functions `g_k = -M_k‖u-u*‖^{2^{m+1-k}}`.

use serde::{Deserialize, Serialize};

use super::generator::{apply_generator, carre_du_champ, Block, RadialPower};
use super::{domain, TheoryError};
use crate::model::{DampingKind, DampingSpec, Dissipation, DriftSpec, ModelSpec, ScalarModel};
use crate::numeric::{ext_f64, normal_expectation};

/// Relative rounding band inside which a margin counts as zero.
pub const MARGIN_ROUNDING: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmOptions {
    /// `u*`; by default the hidden mean when `b` vanishes there, else the
    /// first grid minimiser of `b`.
    pub center: Option<f64>,
    /// Scale `M_1` by √2 when the level-1 margin is negative.
    pub auto_scale: bool,
}

impl Default for AmOptions {
    fn default() -> Self {
        Self {
            center: None,
            auto_scale: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmCondition {
    pub item: u8,
    pub name: String,
    #[serde(with = "ext_f64")]
    pub min_margin: f64,
    pub argmin: Option<f64>,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmCertificate {
    pub m: u32,
    pub center: f64,
    /// `2^{m+1} - 2`.
    pub bound_exponent: f64,
    /// Fitted `C` in `b <= C‖u-u*‖^{2^{m+1}-2}`.
    pub c_fit: f64,
    #[serde(with = "ext_f64")]
    pub vanishing_order: f64,
    pub growth_degree: f64,
    /// `M_1..M_m`.
    pub constants: Vec<f64>,
    /// `2^m, ..., 2`.
    pub exponents: Vec<f64>,
    pub level1_scale: f64,
    pub dissipation: Dissipation,
    pub big_m: f64,
    pub m0: f64,
    pub m1: f64,
    pub p_probe: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub conditions: Vec<AmCondition>,
    pub member: bool,
}

pub fn check_am(
    damping: &DampingSpec,
    drift: &DriftSpec,
    m: u32,
    grid: &[f64],
    p_probe: f64,
) -> Result<AmCertificate, TheoryError> {
    check_am_with(damping, drift, m, grid, p_probe, &AmOptions::default())
}

/// `lhs - rhs`, snapped to zero inside the rounding band.
fn margin(lhs: f64, rhs: f64) -> f64 {
    let d = lhs - rhs;
    if d.abs() <= MARGIN_ROUNDING * (lhs.abs() + rhs.abs()) {
        0.0
    } else {
        d
    }
}

struct Worst {
    value: f64,
    at: Option<f64>,
}

impl Worst {
    fn new() -> Self {
        Self {
            value: f64::INFINITY,
            at: None,
        }
    }
    fn see(&mut self, v: f64, u: f64) {
        if v < self.value || v.is_nan() {
            self.value = v;
            self.at = Some(u);
        }
    }
}

fn condition(item: u8, name: &str, w: Worst, extra_ok: bool, note: Option<String>) -> AmCondition {
    AmCondition {
        item,
        name: name.into(),
        min_margin: w.value,
        argmin: w.at,
        pass: w.value >= 0.0 && extra_ok,
        note,
    }
}

/// Order to which `b` vanishes at `c`: infinite on a zero ball, zero
/// where `b(c) != 0`.
fn vanishing_order(b: &DampingSpec, c: f64) -> f64 {
    if b.eval(c) != 0.0 {
        return 0.0;
    }
    match b.kind() {
        DampingKind::Constant { .. } => f64::INFINITY,
        DampingKind::Affine { .. } => 1.0,
        DampingKind::Hinge { shift, offset, .. } => {
            if (c + shift).abs() < *offset {
                f64::INFINITY
            } else {
                1.0
            }
        }
        DampingKind::Power { exponent, offset } => {
            if *offset == 0.0 && c == 0.0 {
                *exponent
            } else {
                1.0
            }
        }
        DampingKind::Tabulated { grid, values } => {
            // Zero on a neighbourhood iff the bracketing nodes are zero;
            // missing nodes inherit the flat extension.
            let j = grid.partition_point(|g| *g < c);
            let zero = |i: usize| values.get(i).is_none_or(|v| *v == 0.0);
            let below = j == 0 || zero(j - 1);
            let above = if grid.get(j) == Some(&c) {
                zero(j) && zero(j + 1)
            } else {
                zero(j)
            };
            if below && above {
                f64::INFINITY
            } else {
                1.0
            }
        }
    }
}

/// `E_π f(u)` for a scalar hidden process: Gauss–Hermite under a Gaussian
/// law, otherwise trapezoid quadrature of `exp(2∫h)`.
fn stationary_expectation(drift: &DriftSpec, f: impl Fn(f64) -> f64) -> f64 {
    if let Some((mean, sd)) = drift.marginal(0) {
        return normal_expectation(f, mean, sd, 64);
    }
    let (c, s) = drift.typical_scale(0);
    let n = 8001;
    let (lo, hi) = (c - 16.0 * s, c + 16.0 * s);
    let du = (hi - lo) / (n - 1) as f64;
    let us: Vec<f64> = (0..n).map(|i| lo + du * i as f64).collect();
    let hs: Vec<f64> = us.iter().map(|u| drift.eval(&[*u])[0]).collect();
    let mut logd = vec![0.0; n];
    for i in 1..n {
        logd[i] = logd[i - 1] + du * (hs[i - 1] + hs[i]);
    }
    let top = logd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut acc) = (0.0, 0.0);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * (logd[i] - top).exp();
        z += w;
        acc += w * f(us[i]);
    }
    acc / z
}

fn default_center(damping: &DampingSpec, drift: &DriftSpec, grid: &[f64]) -> f64 {
    let (mean, _) = drift.typical_scale(0);
    if damping.eval(mean) == 0.0 {
        return mean;
    }
    grid.iter()
        .copied()
        .fold((grid[0], f64::INFINITY), |best, u| {
            let b = damping.eval(u);
            if b < best.1 {
                (u, b)
            } else {
                best
            }
        })
        .0
}

pub fn check_am_with(
    damping: &DampingSpec,
    drift: &DriftSpec,
    m: u32,
    grid: &[f64],
    p_probe: f64,
    opts: &AmOptions,
) -> Result<AmCertificate, TheoryError> {
    if !(1..=6).contains(&m) {
        return Err(domain(format!("level m must lie in 1..=6, got {m}")));
    }
    if !(p_probe.is_finite() && p_probe >= 1.0) {
        return Err(domain(format!("p_probe must be at least 1, got {p_probe}")));
    }
    if grid.is_empty() || grid.iter().any(|g| !g.is_finite()) {
        return Err(domain("grid must be nonempty and finite"));
    }
    if drift.dim() != 1 || damping.coordinate() != 0 {
        return Err(TheoryError::Unsupported(
            "𝒜_m certificates need a scalar hidden process".into(),
        ));
    }
    let center = opts.center.unwrap_or_else(|| default_center(damping, drift, grid));
    let dissipation = drift
        .dissipation_about(&[center])
        .ok_or_else(|| TheoryError::Unsupported(format!("no dissipation constants about u* = {center}")))?;
    let model = ModelSpec::Scalar(ScalarModel::new(damping.clone(), drift.clone(), 0.0));
    let d_u = 1.0;
    let mi = m as i32;
    let exponents: Vec<f64> = (1..=mi).map(|k| 2f64.powi(mi + 1 - k)).collect();
    let bound_exponent = 2f64.powi(mi + 1) - 2.0;

    // (1) nonnegativity with a zero at u*.
    let mut w1 = Worst::new();
    for &u in grid {
        w1.see(damping.eval(u), u);
    }
    let b_star = damping.eval(center);
    if -b_star.abs() < w1.value {
        w1 = Worst {
            value: -b_star.abs(),
            at: Some(center),
        };
    }
    let c1 = condition(1, "b >= 0 with b(u*) = 0", w1, true, None);

    let c_fit = grid
        .iter()
        .filter(|u| **u != center)
        .map(|u| damping.eval(*u) / (u - center).abs().powf(bound_exponent))
        .fold(0.0, f64::max);
    let order = vanishing_order(damping, center);
    let degree = damping.degree();
    let growth_ok = order >= bound_exponent && degree <= bound_exponent;

    let g = |k: usize, mk: f64| RadialPower::new(Block::U, -mk, exponents[k], vec![center]);
    let lg = |f: &RadialPower, u: f64| apply_generator(f, &model, &[0.0], &[u]);
    let gamma = |f: &RadialPower, h: &RadialPower, u: f64| carre_du_champ(f, h, &[0.0], &[u], 0.0);

    // (2) Γ(g_1) >= b, starting from M_1 = √C / 2^m.
    let level2 = |m1: f64| -> Result<Worst, TheoryError> {
        let g1 = g(0, m1);
        let mut w = Worst::new();
        for &u in grid {
            w.see(margin(gamma(&g1, &g1, u)?, damping.eval(u)), u);
        }
        Ok(w)
    };
    let mut m1 = c_fit.sqrt() / 2f64.powi(mi);
    let mut level1_scale = 1.0;
    let mut w2 = level2(m1)?;
    if w2.value < 0.0 && opts.auto_scale {
        level1_scale = std::f64::consts::SQRT_2;
        m1 *= level1_scale;
        w2 = level2(m1)?;
    }
    let note2 = Some(format!(
        "C = {c_fit:.6e}; vanishing order {order} and growth degree {degree} against exponent {bound_exponent}{}",
        if level1_scale != 1.0 {
            "; M_1 scaled by √2"
        } else {
            ""
        }
    ));
    let c2 = condition(2, "Γ(g_1) >= b", w2, growth_ok, note2);

    // M_k from Γ(g_k) >= C_{k-1}‖u-u*‖^{e_{k-1}-2}, where dissipation gives
    // 𝓛g_{k-1} >= -C_{k-1}‖u-u*‖^{e_{k-1}-2}.
    let ml = dissipation.m_lambda;
    let mut constants = vec![m1];
    for k in 1..m as usize {
        let e = exponents[k - 1];
        let ck = constants[k - 1] * e * (ml + 0.5 * (e - 2.0 + d_u));
        constants.push((2.0 * ck).sqrt() / exponents[k]);
    }
    let gs: Vec<RadialPower> = constants.iter().enumerate().map(|(k, mk)| g(k, *mk)).collect();

    // (3) Γ(g_k) + 𝓛g_{k-1} >= 0.
    let mut w3 = Worst::new();
    for k in 1..gs.len() {
        for &u in grid {
            w3.see(margin(gamma(&gs[k], &gs[k], u)?, -lg(&gs[k - 1], u)?), u);
        }
    }
    let note3 = (m == 1).then(|| "vacuous for m = 1".to_string());
    let c3 = condition(3, "Γ(g_k) + 𝓛g_{k-1} >= 0", w3, true, note3);

    // (4) 𝓛g_m >= -M.
    let last = gs.last().expect("m >= 1");
    let big_m = constants[m as usize - 1] * (2.0 * ml + d_u);
    let mut w4 = Worst::new();
    for &u in grid {
        w4.see(margin(lg(last, u)?, -big_m), u);
    }
    let c4 = condition(4, "𝓛g_m >= -M", w4, true, None);

    // (5) G_p <= √p M_0 with M_0 = 0, and E_π G_p >= -√p M_1'.
    let m0 = 0.0;
    let m1_prime: f64 = constants
        .iter()
        .zip(&exponents)
        .map(|(mk, e)| mk * stationary_expectation(drift, |u| (u - center).abs().powf(*e)))
        .sum();
    let g_p = |p: f64, u: f64| -> f64 {
        gs.iter()
            .enumerate()
            .map(|(k, gk)| p.powf(0.5f64.powi(k as i32 + 1)) * -gk.coef.abs() * (u - center).abs().powf(gk.exponent))
            .sum()
    };
    let mut w5 = Worst::new();
    for p in [1.0, p_probe] {
        for &u in grid {
            w5.see(margin(p.sqrt() * m0, g_p(p, u)), u);
        }
        let mean = stationary_expectation(drift, |u| g_p(p, u));
        let v = margin(mean, -p.sqrt() * m1_prime);
        if v < w5.value {
            w5 = Worst { value: v, at: None };
        }
    }
    let c5 = condition(5, "G_p <= √p M_0 and E G_p >= -√p M_1", w5, true, None);

    // (6) Γ(g_j, g_k) >= 0.
    let mut w6 = Worst::new();
    for j in 0..gs.len() {
        for k in j..gs.len() {
            for &u in grid {
                w6.see(gamma(&gs[j], &gs[k], u)?, u);
            }
        }
    }
    let c6 = condition(6, "Γ(g_j, g_k) >= 0", w6, true, None);

    let conditions = vec![c1, c2, c3, c4, c5, c6];
    let member = conditions.iter().all(|c| c.pass);
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), u| (a.min(*u), b.max(*u)));
    Ok(AmCertificate {
        m,
        center,
        bound_exponent,
        c_fit,
        vanishing_order: order,
        growth_degree: degree,
        constants,
        exponents,
        level1_scale,
        dissipation,
        big_m,
        m0,
        m1: m1_prime,
        p_probe,
        grid_lo: lo,
        grid_hi: hi,
        grid_points: grid.len(),
        conditions,
        member,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;

    fn box_grid(drift: &DriftSpec) -> Vec<f64> {
        Interval::stationary_box(drift, 0, 6.0).grid(1201)
    }

    #[test]
    fn quadratic_level_one() {
        let d = DriftSpec::ou(2.0);
        let cert = check_am(&DampingSpec::power(2.0, 0.0), &d, 1, &box_grid(&d), 4.0).unwrap();
        assert!(cert.member, "{:#?}", cert.conditions);
        assert_eq!(cert.level1_scale, std::f64::consts::SQRT_2);
        assert!((cert.c_fit - 1.0).abs() < 1e-12);
        // M = M_1 d_u, M_1' = M_1 E u² = M_1 / 4.
        assert!((cert.big_m - cert.constants[0]).abs() < 1e-15);
        assert!((cert.m1 - cert.constants[0] / 4.0).abs() < 1e-12);
    }

    #[test]
    fn hinge_level_three() {
        let d = DriftSpec::ou_centered(2.0, -1.0);
        let cert = check_am(&DampingSpec::hinge(1.0, 1.0, 1.0), &d, 3, &box_grid(&d), 4.0).unwrap();
        assert_eq!(cert.center, -1.0);
        assert!(cert.member, "{:#?}", cert.conditions);
        // sup (r-1)/r^14 at r = 14/13.
        let r: f64 = 14.0 / 13.0;
        assert!((cert.c_fit - (r - 1.0) / r.powi(14)).abs() < 1e-4);
    }

    #[test]
    fn unstable_affine_fails_first_condition() {
        let d = DriftSpec::ou(2.0);
        let cert = check_am(&DampingSpec::affine(1.0, 3.0, 0.0), &d, 1, &box_grid(&d), 4.0).unwrap();
        assert!(!cert.member);
        assert!(!cert.conditions[0].pass);
    }

    #[test]
    fn quartic_power_has_no_level() {
        let d = DriftSpec::ou(2.0);
        for m in 1..=4 {
            let cert = check_am(&DampingSpec::power(4.0, 0.0), &d, m, &box_grid(&d), 4.0).unwrap();
            assert!(!cert.member);
        }
    }
}
