//! File formats: the flat key–value configuration, the binary sample
//! spill format and canonical JSON.

mod config;
mod json;
mod samples;

pub use config::{model_from_flat, parse_flat, ConfigError, FlatConfig};
pub use json::{canonical_json, parse_model_json, JsonError};
pub use samples::{decode_samples, encode_samples, SampleError, SampleHeader, SampleWriter, HEADER_LEN, MAGIC};
