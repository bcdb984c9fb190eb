//! Canonical JSON: keys sorted, two-space indentation, trailing newline.
//! Identical values always serialize to identical bytes.

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, ModelSpec};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    // `Value` objects are BTreeMaps, so the round trip sorts every key.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_model_json(text: &str) -> Result<ModelSpec, JsonError> {
    let m: ModelSpec = serde_json::from_str(text)?;
    m.validate()?;
    Ok(m)
}
