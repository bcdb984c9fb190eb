//! Closed-form helpers used as oracles by the theory and its tests.

use statrs::function::gamma::ln_gamma;

use super::{domain, TheoryError};

/// `E_p(x) = ‖x‖^{p+2}/(1+‖x‖²) + 1`, comparable to `‖x‖^p + 1`.
pub fn surrogate_moment(x: &[f64], p: f64) -> Result<f64, TheoryError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(domain(format!("p must be positive, got {p}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(domain("x must be finite"));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    Ok(r.powf(p) * r2 / (1.0 + r2) + 1.0)
}

fn check(p: f64, r: f64, c: f64) -> Result<(), TheoryError> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(domain(format!("p must be nonnegative, got {p}")));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(domain(format!("r must be positive, got {r}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(domain(format!("c must be positive, got {c}")));
    }
    Ok(())
}

/// `log ∫₀^∞ exp(-c x^r) x^p dx = ln Γ((p+1)/r) - ((p+1)/r) ln c - ln r`.
pub fn gamma_integral_oracle(p: f64, r: f64, c: f64) -> Result<f64, TheoryError> {
    check(p, r, c)?;
    let a = (p + 1.0) / r;
    Ok(ln_gamma(a) - a * c.ln() - r.ln())
}

/// Independent check of [`gamma_integral_oracle`]: adaptive Simpson on
/// `y ↦ exp(a ln y - y)` after `y = c x^r`, with the integrand scaled by
/// its peak so large `p` stays in range.
pub fn gamma_integral_quadrature(p: f64, r: f64, c: f64, tol: f64) -> Result<f64, TheoryError> {
    check(p, r, c)?;
    let a = (p + 1.0) / r;
    // ∫ y^{a-1} e^{-y} dy; substitute y = e^s to remove the endpoint
    // singularity: ∫ exp(a s - e^s) ds, peak at s = ln a.
    let s0 = a.ln();
    let peak = a * s0 - a;
    let f = |s: f64| (a * s - s.exp() - peak).exp();
    // Below the peak the integrand decays like e^{a(s-s0)}, above it
    // doubly exponentially; both ends sit ~e^{-50} under the peak.
    let lo = s0 - 50.0 / a - 50.0 / a.sqrt();
    let hi = s0 + 50.0 / a.sqrt() + (1.0 + 50.0 / a).ln() + 1.0;
    let integral = adaptive_simpson(&f, lo, hi, tol, 50);
    Ok(integral.ln() + peak - a * c.ln() - r.ln())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_examples() {
        assert_eq!(surrogate_moment(&[0.0], 1.0).unwrap(), 1.0);
        assert_eq!(surrogate_moment(&[1.0], 2.0).unwrap(), 1.5);
        assert!((surrogate_moment(&[2.0], 3.0).unwrap() - 7.4).abs() < 1e-12);
        assert!(surrogate_moment(&[f64::NAN], 1.0).is_err());
        assert!(surrogate_moment(&[1.0], 0.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert!((gamma_integral_oracle(5.0, 1.0, 1.0).unwrap() - 120f64.ln()).abs() < 1e-10);
        let half_sqrt_pi = (std::f64::consts::PI.sqrt() / 2.0).ln();
        assert!((gamma_integral_oracle(0.0, 2.0, 1.0).unwrap() - half_sqrt_pi).abs() < 1e-10);
        assert!(gamma_integral_oracle(1.0, 0.0, 1.0).is_err());
        assert!(gamma_integral_oracle(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_agrees() {
        for (p, r, c) in [
            (0.0, 2.0, 1.0),
            (5.0, 1.0, 1.0),
            (64.0, 1.0, 8.0),
            (3.5, 0.7, 2.0),
            (0.0, 4.0, 0.3),
        ] {
            let a = gamma_integral_oracle(p, r, c).unwrap();
            let b = gamma_integral_quadrature(p, r, c, 1e-12).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{p} {r} {c}: {a} vs {b}");
        }
    }
}
