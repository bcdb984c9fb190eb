//! Gauss–Hermite quadrature for Gaussian expectations.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)`, found by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

fn cached_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R64: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R48: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        64 => R64.get_or_init(|| gauss_hermite(64)),
        48 => R48.get_or_init(|| gauss_hermite(48)),
        _ => panic!("no cached Gauss–Hermite rule of order {n}"),
    }
}

/// `E f(Z)` for `Z ~ N(mean, sd²)` with an `n`-node rule (`n` ∈ {48, 64}).
pub fn normal_expectation(f: impl Fn(f64) -> f64, mean: f64, sd: f64, n: usize) -> f64 {
    let (x, w) = cached_rule(n);
    let scale = std::f64::consts::SQRT_2 * sd;
    x.iter().zip(w).map(|(xi, wi)| wi * f(mean + scale * xi)).sum::<f64>() / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        // E Z^{2k} = (2k-1)!! for a standard normal.
        let mut df = 1.0;
        for k in 1..=10 {
            df *= (2 * k - 1) as f64;
            let got = normal_expectation(|z| z.powi(2 * k), 0.0, 1.0, 64);
            assert!((got / df - 1.0).abs() < 1e-12, "k={k}: {got} vs {df}");
        }
        let total: f64 = gauss_hermite(64).1.iter().sum();
        assert!((total - PI.sqrt()).abs() < 1e-13);
    }
}
