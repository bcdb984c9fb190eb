//! Generator, carré du champ and oracle identities checked against
//! closed forms and finite differences.

use condgauss::model::{DampingSpec, DriftSpec, ModelSpec, ScalarModel};
use condgauss::theory::generator::{Block, Composed, LinearU, Phi, Product, RadialPower, SurrogateMoment};
use condgauss::theory::{
    apply_generator, carre_du_champ, gamma_integral_oracle, gamma_integral_quadrature, surrogate_moment, GeneratorFn,
};
use proptest::prelude::*;

fn model(b: DampingSpec, gamma: f64, sigma: f64) -> ModelSpec {
    ModelSpec::Scalar(ScalarModel::new(b, DriftSpec::ou(gamma), sigma))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn x_sq() -> Box<dyn GeneratorFn> {
    Box::new(RadialPower::new(Block::X, 1.0, 2.0, vec![]))
}

fn u_quad() -> Box<dyn GeneratorFn> {
    Box::new(RadialPower::new(Block::U, 0.5, 2.0, vec![0.3]))
}

/// Central differences of the value in one coordinate.
fn fd(f: &dyn GeneratorFn, x: f64, u: f64, in_x: bool) -> (f64, f64) {
    let h = 1e-4;
    let at = |d: f64| {
        if in_x {
            f.value(&[x + d], &[u]).unwrap()
        } else {
            f.value(&[x], &[u + d]).unwrap()
        }
    };
    let (p, m, c) = (at(h), at(-h), at(0.0));
    ((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h))
}

#[test]
fn generator_of_x_squared_matches_closed_form() {
    // 𝓛 x² = -2 b(u) x² + σ².
    let b = DampingSpec::affine(1.0, 2.0, 0.0);
    let m = model(b.clone(), 2.0, 1.7);
    for (x, u) in [(0.0, 0.0), (1.5, -0.3), (-2.0, 1.1)] {
        let got = apply_generator(&*x_sq(), &m, &[x], &[u]).unwrap();
        let want = -2.0 * b.eval(u) * x * x + 1.7 * 1.7;
        assert!(rel_close(got, want, 1e-12), "{got} vs {want}");
    }
}

#[test]
fn generator_of_linear_u_is_the_drift() {
    // 𝓛 u = -γ (u - μ).
    let m = ModelSpec::Scalar(ScalarModel::new(
        DampingSpec::constant(1.0),
        DriftSpec::ou_centered(3.0, -1.0),
        1.0,
    ));
    let f = LinearU {
        weights: vec![1.0],
        offset: 0.0,
    };
    for u in [-2.0, 0.0, 0.7] {
        let got = apply_generator(&f, &m, &[0.4], &[u]).unwrap();
        assert!(rel_close(got, -3.0 * (u + 1.0), 1e-12));
    }
}

#[test]
fn jets_match_finite_differences() {
    let fns: Vec<Box<dyn GeneratorFn>> = vec![
        Box::new(SurrogateMoment { p: 2.5 }),
        Box::new(Composed {
            phi: Phi::Exp,
            inner: Box::new(RadialPower::new(Block::U, 0.2, 2.0, vec![])),
        }),
        Box::new(Product(x_sq(), u_quad())),
        Box::new(Composed {
            phi: Phi::Power(1.5),
            inner: Box::new(SurrogateMoment { p: 1.0 }),
        }),
    ];
    for f in &fns {
        for (x, u) in [(0.7, -0.4), (-1.3, 0.9), (2.1, 0.1)] {
            let j = f.jet(&[x], &[u]).unwrap();
            let (gx, hx) = fd(f.as_ref(), x, u, true);
            let (gu, hu) = fd(f.as_ref(), x, u, false);
            assert!(rel_close(j.grad_x[0], gx, 1e-6), "grad_x {} vs {gx}", j.grad_x[0]);
            assert!(rel_close(j.grad_u[0], gu, 1e-6), "grad_u {} vs {gu}", j.grad_u[0]);
            assert!(
                rel_close(j.hess_x[(0, 0)], hx, 1e-4),
                "hess_x {} vs {hx}",
                j.hess_x[(0, 0)]
            );
            assert!(
                rel_close(j.hess_u[(0, 0)], hu, 1e-4),
                "hess_u {} vs {hu}",
                j.hess_u[(0, 0)]
            );
        }
    }
}

proptest! {
    #[test]
    fn chain_rule_for_power(x in -3.0f64..3.0, u in -3.0f64..3.0, k in 1.0f64..4.0, s in 0.2f64..2.0) {
        // 𝓛φ(g) = φ'(g)𝓛g + φ''(g)Γ(g,g) with g = E_2 >= 1.
        let m = model(DampingSpec::hinge(0.5, 0.2, 1.0), 2.0, s);
        let g = SurrogateMoment { p: 2.0 };
        let f = Composed { phi: Phi::Power(k), inner: Box::new(g.clone()) };
        let gv = g.value(&[x], &[u]).unwrap();
        let (_, d1, d2) = Phi::Power(k).derivatives(gv);
        let lhs = apply_generator(&f, &m, &[x], &[u]).unwrap();
        let rhs = d1 * apply_generator(&g, &m, &[x], &[u]).unwrap()
            + d2 * carre_du_champ(&g, &g, &[x], &[u], s).unwrap();
        prop_assert!(rel_close(lhs, rhs, 1e-9), "{lhs} vs {rhs}");
    }

    #[test]
    fn product_rule_for_generator(x in -3.0f64..3.0, u in -3.0f64..3.0) {
        // 𝓛(fg) = f𝓛g + g𝓛f + 2Γ(f,g).
        let m = model(DampingSpec::affine(1.0, 1.0, 0.0), 2.0, 0.8);
        let (f, g) = (x_sq(), u_quad());
        let lhs = apply_generator(&Product(x_sq(), u_quad()), &m, &[x], &[u]).unwrap();
        let rhs = f.value(&[x], &[u]).unwrap() * apply_generator(&*g, &m, &[x], &[u]).unwrap()
            + g.value(&[x], &[u]).unwrap() * apply_generator(&*f, &m, &[x], &[u]).unwrap()
            + 2.0 * carre_du_champ(&*f, &*g, &[x], &[u], 0.8).unwrap();
        prop_assert!(rel_close(lhs, rhs, 1e-10));
    }

    #[test]
    fn carre_du_champ_symmetric_and_nonnegative(x in -3.0f64..3.0, u in -3.0f64..3.0, s in 0.1f64..3.0) {
        let f = SurrogateMoment { p: 3.0 };
        let g = Composed { phi: Phi::Exp, inner: u_quad() };
        let ab = carre_du_champ(&f, &g, &[x], &[u], s).unwrap();
        let ba = carre_du_champ(&g, &f, &[x], &[u], s).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(carre_du_champ(&f, &f, &[x], &[u], s).unwrap() >= 0.0);
    }

    #[test]
    fn surrogate_sandwich(x in proptest::collection::vec(-6.0f64..6.0, 1..5), p in 0.0f64..8.0) {
        // ½(‖x‖^p + 1) <= E_p(x) <= ‖x‖^p + 1.
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let e = surrogate_moment(&x, p).unwrap();
        prop_assert!(e >= 0.5 * (r.powf(p) + 1.0) * (1.0 - 1e-12));
        prop_assert!(e <= (r.powf(p) + 1.0) * (1.0 + 1e-12));
    }
}

#[test]
fn gamma_oracle_exact_cases() {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    // ∫₀^∞ y^p e^{-c y^r} dy = Γ((p+1)/r) / (r c^{(p+1)/r}).
    for (p, r, c, exact) in [
        (1.0, 2.0, 1.0, 0.5),
        (2.0, 2.0, 1.0, sqrt_pi / 4.0),
        (3.0, 1.0, 2.0, 6.0 / 16.0),
        (0.0, 2.0, 1.0, sqrt_pi / 2.0),
        (4.0, 2.0, 1.0, 3.0 * sqrt_pi / 8.0),
    ] {
        let got = gamma_integral_oracle(p, r, c).unwrap().exp();
        assert!((got - exact).abs() <= 1e-12 * exact, "({p},{r},{c}): {got} vs {exact}");
        let quad = gamma_integral_quadrature(p, r, c, 1e-10).unwrap().exp();
        assert!(
            (quad - exact).abs() <= 1e-7 * exact,
            "quadrature ({p},{r},{c}): {quad} vs {exact}"
        );
    }
}

#[test]
fn gamma_oracle_rejects_bad_parameters() {
    assert!(gamma_integral_oracle(1.0, 0.0, 1.0).is_err());
    assert!(gamma_integral_oracle(1.0, 2.0, -1.0).is_err());
}
