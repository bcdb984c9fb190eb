use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::integrate::Sink;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    Linear { lo: f64, hi: f64, bins: usize },
    Log { lo: f64, hi: f64, bins: usize },
}

impl Binning {
    pub fn bins(&self) -> usize {
        match *self {
            Binning::Linear { bins, .. } | Binning::Log { bins, .. } => bins,
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        match *self {
            Binning::Linear { lo, hi, bins } => (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect(),
            Binning::Log { lo, hi, bins } => {
                let (a, b) = (lo.ln(), hi.ln());
                (0..=bins)
                    .map(|i| (a + (b - a) * i as f64 / bins as f64).exp())
                    .collect()
            }
        }
    }

    /// Arithmetic midpoint for linear bins, geometric for log bins.
    pub fn centers(&self) -> Vec<f64> {
        let e = self.edges();
        e.windows(2)
            .map(|w| match self {
                Binning::Linear { .. } => 0.5 * (w[0] + w[1]),
                Binning::Log { .. } => (w[0] * w[1]).sqrt(),
            })
            .collect()
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        let (lo, hi, bins, log) = match *self {
            Binning::Linear { lo, hi, bins } => (lo, hi, bins, false),
            Binning::Log { lo, hi, bins } => (lo, hi, bins, true),
        };
        if bins == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() || (log && lo <= 0.0) {
            return Err(AnalysisError::OutOfRange(format!(
                "invalid binning [{lo}, {hi}] with {bins} bins"
            )));
        }
        Ok(())
    }

    #[inline]
    fn index(&self, v: f64) -> Option<Result<usize, bool>> {
        // Ok(bin), Err(true) overflow, Err(false) underflow, None for NaN.
        if v.is_nan() {
            return None;
        }
        let (pos, bins) = match *self {
            Binning::Linear { lo, hi, bins } => ((v - lo) / (hi - lo), bins),
            Binning::Log { lo, hi, bins } => {
                if v <= 0.0 {
                    return Some(Err(false));
                }
                ((v / lo).ln() / (hi / lo).ln(), bins)
            }
        };
        if pos < 0.0 {
            Some(Err(false))
        } else if pos >= 1.0 {
            Some(Err(true))
        } else {
            Some(Ok(((pos * bins as f64) as usize).min(bins - 1)))
        }
    }
}

/// Histogram for log-density plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    binning: Binning,
    counts: Vec<u64>,
    total: u64,
    underflow: u64,
    overflow: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_center: f64,
    pub count: u64,
    pub log_density: f64,
}

impl LogHistogram {
    pub fn new(binning: Binning) -> Result<Self, AnalysisError> {
        binning.validate()?;
        Ok(Self {
            binning,
            counts: vec![0; binning.bins()],
            total: 0,
            underflow: 0,
            overflow: 0,
        })
    }

    /// NaN is counted as overflow so that the total is conserved.
    pub fn push(&mut self, v: f64) {
        self.total += 1;
        match self.binning.index(v) {
            Some(Ok(i)) => self.counts[i] += 1,
            Some(Err(false)) => self.underflow += 1,
            _ => self.overflow += 1,
        }
    }

    pub fn merge(&mut self, other: &LogHistogram) -> Result<(), AnalysisError> {
        if self.binning != other.binning {
            return Err(AnalysisError::OutOfRange(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Rows for nonempty bins; density is normalized by the total count.
    pub fn rows(&self) -> Vec<HistogramRow> {
        let edges = self.binning.edges();
        self.binning
            .centers()
            .into_iter()
            .zip(&self.counts)
            .enumerate()
            .filter(|(_, (_, c))| **c > 0)
            .map(|(i, (center, &count))| HistogramRow {
                bin_center: center,
                count,
                log_density: (count as f64 / (self.total as f64 * (edges[i + 1] - edges[i]))).ln(),
            })
            .collect()
    }
}

impl Sink for LogHistogram {
    fn observe(&mut self, _t: f64, _x: &[f64], norm: f64) {
        self.push(norm);
    }
}
