//! `key = value` configuration files. Lines starting with `#` and blank
//! lines are ignored; keys are dotted identifiers and may appear once.
//!
//! Model keys:
//!
//! | key | meaning |
//! |---|---|
//! | `model` | `scalar` (default) or `matrix` |
//! | `damping.kind` | `affine`, `hinge`, `power`, `constant`, `tabulated` |
//! | `damping.a`, `damping.c`, `damping.m_u` | affine `a + c (u + m_u)` |
//! | `damping.s`, `damping.k`, `damping.scale` | hinge `scale max(\|u+s\|-k, 0)` |
//! | `damping.exponent`, `damping.offset` | power `\|u\|^exponent + offset` |
//! | `damping.value` | constant |
//! | `damping.grid`, `damping.values` | tabulated, comma lists |
//! | `damping.coord` | hidden coordinate read by the damping |
//! | `drift.kind` | `ou` (default), `ou_matrix`, `gradient` |
//! | `drift.gamma`, `drift.mean` | isotropic OU |
//! | `drift.matrix` | OU matrix, rows separated by `;` |
//! | `drift.quadratic`, `drift.quartic`, `drift.center` | gradient drift |
//! | `drift.lambda`, `drift.m_lambda`, `drift.u_star` | declared dissipation |
//! | `sigma_x`, `dims.x`, `dims.u` | scalar model noise and sizes |
//! | `term.N.damping.*`, `term.N.matrix`, `term.N.support` | matrix terms |
//! | `sigma.matrix` | matrix model noise, identity by default |
//! | `x0`, `u0` | initial state; `u0 = stationary` by default |

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    DampingKind, DampingSpec, Dissipation, DriftKind, DriftSpec, InitialCondition, MatrixModel, MatrixTerm, ModelError,
    ModelSpec, ScalarModel, StartU,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },
    #[error("unknown key `{key}` (line {line})")]
    Unknown { key: String, line: usize },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Parsed but not yet interpreted entries. Consumers `take` the keys they
/// understand and call [`FlatConfig::finish`] to reject leftovers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlatConfig {
    entries: BTreeMap<String, (String, usize)>,
}

pub fn parse_flat(text: &str) -> Result<FlatConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                reason: "expected `key = value`".into(),
            });
        };
        let key = k.trim();
        let ok = !key.is_empty()
            && key
                .split('.')
                .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        if !ok {
            return Err(ConfigError::Syntax {
                line,
                reason: format!("malformed key `{key}`"),
            });
        }
        if entries.contains_key(key) {
            return Err(ConfigError::Duplicate { key: key.into(), line });
        }
        entries.insert(key.to_string(), (v.trim().to_string(), line));
    }
    Ok(FlatConfig { entries })
}

impl FlatConfig {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    pub fn require(&mut self, key: &str) -> Result<String, ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key).map(|v| parse_f64(key, &v)).transpose()
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.take_f64(key)?.unwrap_or(default))
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        let v = self.require(key)?;
        parse_f64(key, &v)
    }

    pub fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.take(key)
            .map(|v| v.parse::<u64>().map_err(|e| invalid(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    pub fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.take(key).map(|v| parse_list(key, &v)).transpose()
    }

    pub fn take_matrix(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        self.take(key)
            .map(|v| v.split(';').map(|row| parse_list(key, row)).collect())
            .transpose()
    }

    /// Errors on the first key nobody consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
            Some((key, (_, line))) => Err(ConfigError::Unknown { key, line }),
            None => Ok(()),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|e| invalid(key, format!("`{}`: {e}", v.trim())))?;
    if !x.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(x)
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(key, s)).collect()
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim()
        .parse()
        .map_err(|e| invalid(key, format!("`{}`: {e}", v.trim())))
}

fn damping_from(cfg: &mut FlatConfig, prefix: &str) -> Result<DampingSpec, ConfigError> {
    let k = |s: &str| format!("{prefix}{s}");
    let kind_key = k("kind");
    let kind = cfg.require(&kind_key)?;
    let kind = match kind.as_str() {
        "affine" => DampingKind::Affine {
            intercept: cfg.require_f64(&k("a"))?,
            slope: cfg.require_f64(&k("c"))?,
            shift: cfg.f64_or(&k("m_u"), 0.0)?,
        },
        "hinge" => DampingKind::Hinge {
            shift: cfg.f64_or(&k("s"), 0.0)?,
            offset: cfg.f64_or(&k("k"), 0.0)?,
            scale: cfg.f64_or(&k("scale"), 1.0)?,
        },
        "power" => DampingKind::Power {
            exponent: cfg.require_f64(&k("exponent"))?,
            offset: cfg.f64_or(&k("offset"), 0.0)?,
        },
        "constant" => DampingKind::Constant {
            value: cfg.require_f64(&k("value"))?,
        },
        "tabulated" => DampingKind::Tabulated {
            grid: cfg
                .take_list(&k("grid"))?
                .ok_or_else(|| ConfigError::Missing(k("grid")))?,
            values: cfg
                .take_list(&k("values"))?
                .ok_or_else(|| ConfigError::Missing(k("values")))?,
        },
        other => return Err(invalid(&kind_key, format!("unknown damping kind `{other}`"))),
    };
    let coord = match cfg.take(&k("coord")) {
        Some(v) => parse_usize(&k("coord"), &v)?,
        None => 0,
    };
    Ok(DampingSpec::new(kind)?.on_coordinate(coord))
}

fn drift_from(cfg: &mut FlatConfig, dim_u: Option<usize>) -> Result<DriftSpec, ConfigError> {
    let kind = cfg.take("drift.kind").unwrap_or_else(|| "ou".into());
    let (kind, dim) = match kind.as_str() {
        "ou" => (
            DriftKind::Ou {
                gamma: cfg.require_f64("drift.gamma")?,
                mean: cfg.f64_or("drift.mean", 0.0)?,
            },
            dim_u.unwrap_or(1),
        ),
        "ou_matrix" => {
            let matrix = cfg
                .take_matrix("drift.matrix")?
                .ok_or_else(|| ConfigError::Missing("drift.matrix".into()))?;
            let n = matrix.len();
            if dim_u.is_some_and(|d| d != n) {
                return Err(invalid("dims.u", format!("drift.matrix is {n}x{n}")));
            }
            let mean = cfg.take_list("drift.mean")?.unwrap_or_default();
            (DriftKind::OuMatrix { matrix, mean }, n)
        }
        "gradient" => (
            DriftKind::Gradient {
                quadratic: cfg.f64_or("drift.quadratic", 0.0)?,
                quartic: cfg.f64_or("drift.quartic", 0.0)?,
                center: cfg.f64_or("drift.center", 0.0)?,
            },
            dim_u.unwrap_or(1),
        ),
        other => return Err(invalid("drift.kind", format!("unknown drift kind `{other}`"))),
    };
    let drift = DriftSpec::new(kind, dim)?;
    let lambda = cfg.take_f64("drift.lambda")?;
    let m_lambda = cfg.take_f64("drift.m_lambda")?;
    let u_star = cfg.take_list("drift.u_star")?;
    match (lambda, m_lambda) {
        (None, None) if u_star.is_none() => Ok(drift),
        (Some(lambda), Some(m_lambda)) => {
            let center = u_star.unwrap_or_else(|| vec![0.0; dim]);
            Ok(drift.with_dissipation(Dissipation {
                lambda,
                m_lambda,
                center,
            })?)
        }
        _ => Err(invalid(
            "drift.lambda",
            "declare drift.lambda and drift.m_lambda together",
        )),
    }
}

fn init_from(cfg: &mut FlatConfig) -> Result<InitialCondition, ConfigError> {
    let x0 = cfg.take_list("x0")?.unwrap_or_default();
    let u0 = match cfg.take("u0") {
        None => StartU::Stationary,
        Some(v) if v == "stationary" => StartU::Stationary,
        Some(v) => StartU::Point(parse_list("u0", &v)?),
    };
    Ok(InitialCondition { x0, u0 })
}

/// Consumes the model keys of `cfg` and builds a validated model.
pub fn model_from_flat(cfg: &mut FlatConfig) -> Result<ModelSpec, ConfigError> {
    let family = cfg.take("model").unwrap_or_else(|| {
        if cfg.has_prefix("term.") {
            "matrix".into()
        } else {
            "scalar".into()
        }
    });
    let dim_u = cfg.take("dims.u").map(|v| parse_usize("dims.u", &v)).transpose()?;
    let dim_x = cfg.take("dims.x").map(|v| parse_usize("dims.x", &v)).transpose()?;
    let drift = drift_from(cfg, dim_u)?;
    let init = init_from(cfg)?;
    let model = match family.as_str() {
        "scalar" => {
            let damping = damping_from(cfg, "damping.")?;
            let mut m = ScalarModel::new(damping, drift, cfg.f64_or("sigma_x", 1.0)?);
            m.dim_x = dim_x.unwrap_or(1);
            m.init = init;
            ModelSpec::Scalar(m)
        }
        "matrix" => {
            let mut indices: Vec<usize> = Vec::new();
            for key in cfg.keys().filter_map(|k| k.strip_prefix("term.")) {
                let idx = key.split('.').next().unwrap_or_default();
                let i = parse_usize(&format!("term.{idx}"), idx)?;
                if !indices.contains(&i) {
                    indices.push(i);
                }
            }
            indices.sort_unstable();
            if indices.iter().enumerate().any(|(a, b)| a != *b) {
                return Err(invalid("term", "term indices must be 0, 1, 2, ... without gaps"));
            }
            let mut terms = Vec::new();
            for i in indices {
                let p = format!("term.{i}.");
                let damping = damping_from(cfg, &format!("{p}damping."))?;
                let matrix = cfg
                    .take_matrix(&format!("{p}matrix"))?
                    .ok_or_else(|| ConfigError::Missing(format!("{p}matrix")))?;
                let support = match cfg.take(&format!("{p}support")) {
                    Some(v) => v
                        .split(',')
                        .map(|s| parse_usize(&format!("{p}support"), s))
                        .collect::<Result<Vec<_>, _>>()?,
                    None => Vec::new(),
                };
                terms.push(MatrixTerm {
                    damping,
                    matrix,
                    support,
                });
            }
            let n = terms.first().map(|t| t.matrix.len()).unwrap_or(0);
            let n = dim_x.unwrap_or(n);
            let sigma = match cfg.take_matrix("sigma.matrix")? {
                Some(s) => s,
                None => (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect(),
            };
            ModelSpec::Matrix(MatrixModel::new(terms, sigma, drift, init)?)
        }
        other => return Err(invalid("model", format!("unknown model family `{other}`"))),
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_affine() {
        let text = "# figure 1\ndamping.kind = affine\ndamping.a = 1\ndamping.c = 3\n\ndrift.gamma = 2\nsigma_x = 1\n";
        let mut cfg = parse_flat(text).unwrap();
        let m = model_from_flat(&mut cfg).unwrap();
        cfg.finish().unwrap();
        let ModelSpec::Scalar(s) = m else { panic!() };
        assert_eq!(s.damping, DampingSpec::affine(1.0, 3.0, 0.0));
        assert_eq!(s.drift, DriftSpec::ou(2.0));
    }

    #[test]
    fn matrix_terms() {
        let text =
            "term.0.damping.kind = constant\nterm.0.damping.value = 1\nterm.0.matrix = 1,1;0,1\ndrift.gamma = 2\n";
        let mut cfg = parse_flat(text).unwrap();
        let m = model_from_flat(&mut cfg).unwrap();
        cfg.finish().unwrap();
        assert_eq!(m.dim_x(), 2);
    }

    #[test]
    fn errors_name_the_field() {
        assert!(matches!(
            parse_flat("a = 1\na = 2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(parse_flat("oops"), Err(ConfigError::Syntax { line: 1, .. })));
        let mut cfg = parse_flat("damping.kind = affine\ndamping.a = x\ndamping.c = 1\ndrift.gamma = 2").unwrap();
        let err = model_from_flat(&mut cfg).unwrap_err();
        assert!(err.to_string().contains("damping.a"), "{err}");
        let mut cfg = parse_flat("damping.kind = constant\ndamping.value = 1\ndrift.gamma = -2").unwrap();
        let err = model_from_flat(&mut cfg).unwrap_err();
        assert!(err.to_string().contains("drift.gamma"), "{err}");
        let mut cfg = parse_flat("damping.kind = constant\ndamping.value = 1\ndrift.gamma = 2\nbogus = 1").unwrap();
        model_from_flat(&mut cfg).unwrap();
        assert!(matches!(cfg.finish(), Err(ConfigError::Unknown { .. })));
    }
}
