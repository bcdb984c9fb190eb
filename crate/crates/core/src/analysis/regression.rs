use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Weighted least squares of `y` on `[1, z]`.
pub fn weighted_line(z: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    let sw: f64 = w.iter().sum();
    let zbar = z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ybar = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut szz, mut szy, mut syy) = (0.0, 0.0, 0.0);
    for ((zi, yi), wi) in z.iter().zip(y).zip(w) {
        let (dz, dy) = (zi - zbar, yi - ybar);
        szz += wi * dz * dz;
        szy += wi * dz * dy;
        syy += wi * dy * dy;
    }
    let slope = szy / szz;
    let intercept = ybar - slope * zbar;
    let sse = syy - slope * szy;
    LineFit {
        intercept,
        slope,
        r_squared: if syy > 0.0 { 1.0 - sse.max(0.0) / syy } else { 1.0 },
    }
}
