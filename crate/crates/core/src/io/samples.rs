//! Binary sample spill files.
//!
//! Layout, all little-endian: the 8-byte magic `CGSAMPLE`, a `u32` format
//! version, a `u32` sample dimension, `dt` as `f64`, the thinning factor and
//! the seed as `u64`, then samples as consecutive `f64` vectors.

use std::io::Write;

use thiserror::Error;

use crate::integrate::Sink;

pub const MAGIC: &[u8; 8] = b"CGSAMPLE";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleHeader {
    pub dim: u32,
    pub dt: f64,
    pub thinning: u64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("file shorter than the {HEADER_LEN}-byte header ({0} bytes)")]
    Truncated(usize),
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("invalid header field {field}: {reason}")]
    Header { field: &'static str, reason: String },
    #[error("body of {len} bytes is not a whole number of {dim}-dimensional samples")]
    Ragged { len: usize, dim: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SampleHeader {
    fn validate(&self) -> Result<(), SampleError> {
        if self.dim == 0 {
            return Err(SampleError::Header {
                field: "dim",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SampleError::Header {
                field: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if self.thinning == 0 {
            return Err(SampleError::Header {
                field: "thinning",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    fn bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..8].copy_from_slice(MAGIC);
        b[8..12].copy_from_slice(&VERSION.to_le_bytes());
        b[12..16].copy_from_slice(&self.dim.to_le_bytes());
        b[16..24].copy_from_slice(&self.dt.to_le_bytes());
        b[24..32].copy_from_slice(&self.thinning.to_le_bytes());
        b[32..40].copy_from_slice(&self.seed.to_le_bytes());
        b
    }
}

pub fn encode_samples(header: &SampleHeader, values: &[f64]) -> Result<Vec<u8>, SampleError> {
    header.validate()?;
    if !values.len().is_multiple_of(header.dim as usize) {
        return Err(SampleError::Ragged {
            len: values.len() * 8,
            dim: header.dim,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * values.len());
    out.extend_from_slice(&header.bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn word<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N].try_into().expect("slice length")
}

pub fn decode_samples(bytes: &[u8]) -> Result<(SampleHeader, Vec<f64>), SampleError> {
    if bytes.len() < HEADER_LEN {
        return Err(SampleError::Truncated(bytes.len()));
    }
    if &bytes[0..8] != MAGIC {
        return Err(SampleError::Magic);
    }
    let version = u32::from_le_bytes(word(bytes, 8));
    if version != VERSION {
        return Err(SampleError::Version(version));
    }
    let header = SampleHeader {
        dim: u32::from_le_bytes(word(bytes, 12)),
        dt: f64::from_le_bytes(word(bytes, 16)),
        thinning: u64::from_le_bytes(word(bytes, 24)),
        seed: u64::from_le_bytes(word(bytes, 32)),
    };
    header.validate()?;
    let body = &bytes[HEADER_LEN..];
    if !body.len().is_multiple_of(8 * header.dim as usize) {
        return Err(SampleError::Ragged {
            len: body.len(),
            dim: header.dim,
        });
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

/// Streams every observed state vector to a writer. Write failures are
/// held back and reported by [`SampleWriter::finish`].
pub struct SampleWriter<W: Write + Send> {
    out: W,
    dim: usize,
    written: u64,
    error: Option<std::io::Error>,
}

impl<W: Write + Send> SampleWriter<W> {
    pub fn new(mut out: W, header: SampleHeader) -> Result<Self, SampleError> {
        header.validate()?;
        out.write_all(&header.bytes())?;
        Ok(Self {
            out,
            dim: header.dim as usize,
            written: 0,
            error: None,
        })
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Result<W, SampleError> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write + Send> Sink for SampleWriter<W> {
    fn observe(&mut self, _t: f64, x: &[f64], _norm: f64) {
        if self.error.is_some() {
            return;
        }
        if x.len() != self.dim {
            self.error = Some(std::io::Error::other(format!(
                "sample of dimension {} written to a {}-dimensional file",
                x.len(),
                self.dim
            )));
            return;
        }
        for v in x {
            if let Err(e) = self.out.write_all(&v.to_le_bytes()) {
                self.error = Some(e);
                return;
            }
        }
        self.written += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> SampleHeader {
        SampleHeader {
            dim: 1,
            dt: 0.01,
            thinning: 10,
            seed: 7,
        }
    }

    #[test]
    fn round_trip() {
        let v = vec![0.5, -1.25, 3.0e300];
        let bytes = encode_samples(&header(), &v).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 24);
        let (h, back) = decode_samples(&bytes).unwrap();
        assert_eq!(h, header());
        assert_eq!(back, v);
    }

    #[test]
    fn writer_matches_encoder() {
        let mut w = SampleWriter::new(Vec::new(), header()).unwrap();
        for x in [1.0, 2.0] {
            w.observe(0.0, &[x], x.abs());
        }
        let bytes = w.finish().unwrap();
        assert_eq!(bytes, encode_samples(&header(), &[1.0, 2.0]).unwrap());
    }

    #[test]
    fn rejects_malformed() {
        let good = encode_samples(&header(), &[1.0]).unwrap();
        assert!(matches!(decode_samples(&good[..10]), Err(SampleError::Truncated(10))));
        assert!(matches!(
            decode_samples(&good[..HEADER_LEN + 3]),
            Err(SampleError::Ragged { .. })
        ));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_samples(&bad), Err(SampleError::Magic)));
        let mut bad = good;
        bad[16..24].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(matches!(
            decode_samples(&bad),
            Err(SampleError::Header { field: "dt", .. })
        ));
    }
}
