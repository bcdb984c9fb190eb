use serde::{Deserialize, Serialize};

use super::{invalid, ModelError};

/// Damping families. Each evaluates on a single coordinate of `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingKind {
    /// `intercept + slope * (u + shift)`
    Affine {
        intercept: f64,
        slope: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `scale * max(|u + shift| - offset, 0)`
    Hinge {
        shift: f64,
        offset: f64,
        scale: f64,
    },
    /// `|u|^exponent + offset`
    Power {
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
    Constant {
        value: f64,
    },
    /// Piecewise-linear through `(grid, values)`, flat outside the grid.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDamping", into = "RawDamping")]
pub struct DampingSpec {
    kind: DampingKind,
    coordinate: usize,
}

#[derive(Serialize, Deserialize)]
struct RawDamping {
    #[serde(flatten)]
    kind: DampingKind,
    #[serde(default)]
    coordinate: usize,
}

impl TryFrom<RawDamping> for DampingSpec {
    type Error = ModelError;
    fn try_from(raw: RawDamping) -> Result<Self, ModelError> {
        DampingSpec::new(raw.kind).map(|d| d.on_coordinate(raw.coordinate))
    }
}

impl From<DampingSpec> for RawDamping {
    fn from(d: DampingSpec) -> Self {
        RawDamping {
            kind: d.kind,
            coordinate: d.coordinate,
        }
    }
}

fn finite(field: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

impl DampingSpec {
    pub fn new(kind: DampingKind) -> Result<Self, ModelError> {
        match &kind {
            DampingKind::Affine {
                intercept,
                slope,
                shift,
            } => {
                finite("damping.a", *intercept)?;
                finite("damping.c", *slope)?;
                finite("damping.m_u", *shift)?;
            }
            DampingKind::Hinge { shift, offset, scale } => {
                finite("damping.s", *shift)?;
                finite("damping.k", *offset)?;
                finite("damping.scale", *scale)?;
                if *offset < 0.0 {
                    return Err(invalid("damping.k", "hinge offset must be >= 0"));
                }
                if *scale <= 0.0 {
                    return Err(invalid("damping.scale", "hinge scale must be > 0"));
                }
            }
            DampingKind::Power { exponent, offset } => {
                finite("damping.exponent", *exponent)?;
                finite("damping.offset", *offset)?;
                if *exponent <= 0.0 {
                    return Err(invalid("damping.exponent", "power exponent must be > 0"));
                }
                if *offset < 0.0 {
                    return Err(invalid("damping.offset", "power offset must be >= 0"));
                }
            }
            DampingKind::Constant { value } => finite("damping.value", *value)?,
            DampingKind::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(invalid(
                        "damping.grid",
                        "needs at least two nodes and one value per node",
                    ));
                }
                if grid.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(invalid("damping.grid", "nodes and values must be finite"));
                }
                if grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("damping.grid", "grid must be strictly increasing"));
                }
            }
        }
        Ok(Self { kind, coordinate: 0 })
    }

    pub fn affine(intercept: f64, slope: f64, shift: f64) -> Self {
        Self::new(DampingKind::Affine {
            intercept,
            slope,
            shift,
        })
        .expect("affine parameters")
    }

    pub fn hinge(shift: f64, offset: f64, scale: f64) -> Self {
        Self::new(DampingKind::Hinge { shift, offset, scale }).expect("hinge parameters")
    }

    pub fn power(exponent: f64, offset: f64) -> Self {
        Self::new(DampingKind::Power { exponent, offset }).expect("power parameters")
    }

    pub fn constant(value: f64) -> Self {
        Self::new(DampingKind::Constant { value }).expect("constant value")
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(DampingKind::Tabulated { grid, values })
    }

    pub fn on_coordinate(mut self, coordinate: usize) -> Self {
        self.coordinate = coordinate;
        self
    }

    pub fn kind(&self) -> &DampingKind {
        &self.kind
    }

    pub fn coordinate(&self) -> usize {
        self.coordinate
    }

    /// `b(u)`, checking that `u` reaches the selected coordinate.
    pub fn value(&self, u: &[f64]) -> Result<f64, ModelError> {
        match u.get(self.coordinate) {
            Some(&v) => Ok(self.eval(v)),
            None => Err(ModelError::Dimension {
                expected: self.coordinate + 1,
                got: u.len(),
            }),
        }
    }

    /// `b` as a function of the selected coordinate alone.
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        match &self.kind {
            DampingKind::Affine {
                intercept,
                slope,
                shift,
            } => intercept + slope * (v + shift),
            DampingKind::Hinge { shift, offset, scale } => scale * ((v + shift).abs() - offset).max(0.0),
            DampingKind::Power { exponent, offset } => v.abs().powf(*exponent) + offset,
            DampingKind::Constant { value } => *value,
            DampingKind::Tabulated { grid, values } => interpolate(grid, values, v),
        }
    }

    /// Exact Lipschitz constant of `b` on the interval `[lo, hi]`.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        match &self.kind {
            DampingKind::Affine { slope, .. } => slope.abs(),
            DampingKind::Hinge { scale, .. } => *scale,
            DampingKind::Constant { .. } => 0.0,
            DampingKind::Power { exponent, .. } => {
                let r = lo.abs().max(hi.abs());
                if *exponent >= 1.0 {
                    exponent * r.powf(exponent - 1.0)
                } else if lo < 0.0 && hi > 0.0 || lo == 0.0 || hi == 0.0 {
                    f64::INFINITY
                } else {
                    // Sublinear power away from the origin: steepest at the
                    // end nearest zero.
                    let near = lo.abs().min(hi.abs());
                    exponent * near.powf(exponent - 1.0)
                }
            }
            DampingKind::Tabulated { grid, values } => grid
                .windows(2)
                .zip(values.windows(2))
                .filter(|(g, _)| g[1] > lo && g[0] < hi)
                .map(|(g, v)| ((v[1] - v[0]) / (g[1] - g[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Global Lipschitz constant, infinite for super-linear powers.
    pub fn global_lipschitz(&self) -> f64 {
        match &self.kind {
            DampingKind::Power { exponent, .. } if *exponent != 1.0 => f64::INFINITY,
            DampingKind::Power { .. } => 1.0,
            _ => self.lipschitz_on(f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Polynomial growth degree of `b` at infinity.
    pub fn degree(&self) -> f64 {
        match &self.kind {
            DampingKind::Affine { slope, .. } if *slope != 0.0 => 1.0,
            DampingKind::Hinge { .. } => 1.0,
            DampingKind::Power { exponent, .. } => *exponent,
            _ => 0.0,
        }
    }

    /// The affine family in normal form `slope * (u + m)`, if applicable.
    pub fn affine_normal_form(&self) -> Option<(f64, f64)> {
        match self.kind {
            DampingKind::Affine {
                intercept,
                slope,
                shift,
            } if slope != 0.0 => Some((slope, shift + intercept / slope)),
            _ => None,
        }
    }

    /// Short human label such as `1+3u` used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            DampingKind::Affine {
                intercept,
                slope,
                shift,
            } => {
                let arg = if *shift == 0.0 {
                    "u".to_string()
                } else {
                    format!("(u{})", signed(*shift))
                };
                let term = match *slope {
                    1.0 => format!("+{arg}"),
                    -1.0 => format!("-{arg}"),
                    c => format!("{}{arg}", signed(c)),
                };
                if *intercept == 0.0 {
                    term.trim_start_matches('+').to_string()
                } else {
                    format!("{}{term}", fmt_num(*intercept))
                }
            }
            DampingKind::Hinge { shift, offset, scale } => {
                let scale = if *scale == 1.0 { String::new() } else { fmt_num(*scale) };
                format!("{scale}[|u{}|{}]+", signed(*shift), signed(-*offset))
            }
            DampingKind::Power { exponent, offset } => {
                let base = if *exponent == 1.0 {
                    "|u|".to_string()
                } else {
                    format!("|u|^{}", fmt_num(*exponent))
                };
                if *offset == 0.0 {
                    base
                } else {
                    format!("{base}{}", signed(*offset))
                }
            }
            DampingKind::Constant { value } => fmt_num(*value),
            DampingKind::Tabulated { grid, .. } => format!("tabulated[{}]", grid.len()),
        }
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// `+v` or `-|v|`, empty for zero.
fn signed(v: f64) -> String {
    if v == 0.0 {
        String::new()
    } else if v > 0.0 {
        format!("+{v}")
    } else {
        format!("{v}")
    }
}

pub(crate) fn interpolate(grid: &[f64], values: &[f64], v: f64) -> f64 {
    let n = grid.len();
    if v <= grid[0] {
        return values[0];
    }
    if v >= grid[n - 1] {
        return values[n - 1];
    }
    let i = grid.partition_point(|g| *g <= v) - 1;
    let w = (v - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + w * (values[i + 1] - values[i])
}
