use serde::{Deserialize, Serialize};

use super::histogram::{Binning, LogHistogram};
use super::regression::weighted_line;
use super::AnalysisError;

/// Minimum number of samples above the tail quantile.
pub const MIN_TAIL: u64 = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    Polynomial,
    Exponential,
    Intermediate,
    Gaussian,
    NotClassifiable,
}

impl std::fmt::Display for TailClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailClass::Polynomial => "polynomial",
            TailClass::Exponential => "exponential",
            TailClass::Intermediate => "intermediate",
            TailClass::Gaussian => "gaussian",
            TailClass::NotClassifiable => "not-classifiable",
        })
    }
}

impl TailClass {
    /// Heavier tails first.
    pub fn heaviness(self) -> u8 {
        match self {
            TailClass::Polynomial => 0,
            TailClass::Exponential => 1,
            TailClass::Intermediate => 2,
            TailClass::Gaussian => 3,
            TailClass::NotClassifiable => 4,
        }
    }
}

/// Regressor of log density: `log x`, `x` or `x²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Polynomial,
    Exponential,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub family: Family,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub tail_quantile: f64,
    /// Exponential and Gaussian fits tie when their R² gap, relative to the
    /// larger unexplained fraction `1 - R²`, is at most this.
    pub tie_margin: f64,
    pub bins: usize,
    pub min_bin_count: u64,
    /// Hill probe below which the tail is binned logarithmically.
    pub log_bin_alpha: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tail_quantile: 0.99,
            tie_margin: 0.02,
            bins: 40,
            min_bin_count: 5,
            log_bin_alpha: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub class: TailClass,
    /// Tail index `α` (density `~ x^{-α-1}`), exponential rate, or the
    /// quadratic coefficient; absent for `intermediate`.
    pub parameter: Option<f64>,
    pub fits: Vec<CandidateFit>,
    pub relative_gap: f64,
    pub tail_quantile: f64,
    pub threshold: f64,
    pub n_tail: u64,
    pub n_total: u64,
    pub binning: Binning,
    pub bins_used: usize,
    pub hill_probe: Option<f64>,
    pub options: FitOptions,
}

impl TailReport {
    pub fn fit(&self, family: Family) -> &CandidateFit {
        self.fits.iter().find(|f| f.family == family).unwrap()
    }
}

pub enum TailInput<'a> {
    Samples(&'a [f64]),
    /// The largest values in descending order, out of `n_total` samples.
    Top {
        top_desc: &'a [f64],
        n_total: u64,
    },
    Histogram(&'a LogHistogram),
}

pub fn fit_tail(input: TailInput<'_>, tail_quantile: f64) -> Result<TailReport, AnalysisError> {
    fit_tail_with(
        input,
        &FitOptions {
            tail_quantile,
            ..FitOptions::default()
        },
    )
}

fn tail_size(n: u64, q: f64) -> u64 {
    ((1.0 - q) * n as f64).floor() as u64
}

fn required(q: f64) -> u64 {
    (MIN_TAIL as f64 / (1.0 - q)).ceil() as u64
}

pub fn fit_tail_with(input: TailInput<'_>, opts: &FitOptions) -> Result<TailReport, AnalysisError> {
    let q = opts.tail_quantile;
    if !(q > 0.0 && q < 1.0) {
        return Err(AnalysisError::OutOfRange(format!("tail quantile {q} outside (0, 1)")));
    }
    match input {
        TailInput::Samples(s) => {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(AnalysisError::NonFinite("samples".into()));
            }
            let n = s.len() as u64;
            let k = tail_size(n, q) as usize;
            if (k as u64) < MIN_TAIL || k >= s.len() {
                return Err(AnalysisError::InsufficientTail {
                    required: required(q),
                    got: n,
                });
            }
            let mut v = s.to_vec();
            v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
            let threshold = v[k];
            fit_values(&v[..k], threshold, n, opts)
        }
        TailInput::Top { top_desc, n_total } => {
            let k = tail_size(n_total, q) as usize;
            if (k as u64) < MIN_TAIL {
                return Err(AnalysisError::InsufficientTail {
                    required: required(q),
                    got: n_total,
                });
            }
            if top_desc.len() <= k {
                return Err(AnalysisError::OutOfRange(format!(
                    "tail needs the top {} values, only {} kept",
                    k + 1,
                    top_desc.len()
                )));
            }
            fit_values(&top_desc[..k], top_desc[k], n_total, opts)
        }
        TailInput::Histogram(h) => fit_histogram(h, opts),
    }
}

fn fit_values(tail: &[f64], threshold: f64, n_total: u64, opts: &FitOptions) -> Result<TailReport, AnalysisError> {
    let max = tail.iter().copied().fold(threshold, f64::max);
    let probe = if threshold > 0.0 {
        let s: f64 = tail.iter().map(|x| (x / threshold).ln()).sum();
        Some(tail.len() as f64 / s)
    } else {
        None
    };
    let hi = max * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let binning = match probe {
        Some(a) if a < opts.log_bin_alpha => Binning::Log {
            lo: threshold,
            hi,
            bins: opts.bins,
        },
        _ => Binning::Linear {
            lo: threshold,
            hi,
            bins: opts.bins,
        },
    };
    let mut h = LogHistogram::new(binning)?;
    for &x in tail {
        h.push(x);
    }
    let edges = binning.edges();
    let centers = binning.centers();
    let mut pts = Vec::new();
    for (i, &c) in h.counts().iter().enumerate() {
        if c >= opts.min_bin_count {
            let density = c as f64 / (n_total as f64 * (edges[i + 1] - edges[i]));
            pts.push((centers[i], density.ln(), c as f64));
        }
    }
    classify_points(&pts, binning, threshold, tail.len() as u64, n_total, probe, opts)
}

fn fit_histogram(h: &LogHistogram, opts: &FitOptions) -> Result<TailReport, AnalysisError> {
    let n_total = h.total();
    let k = tail_size(n_total, opts.tail_quantile);
    if k < MIN_TAIL {
        return Err(AnalysisError::InsufficientTail {
            required: required(opts.tail_quantile),
            got: n_total,
        });
    }
    let edges = h.binning().edges();
    let centers = h.binning().centers();
    // Walk down from the top until the tail holds k samples.
    let mut acc = h.overflow();
    let mut first = h.counts().len();
    while first > 0 && acc + h.counts()[first - 1] <= k {
        first -= 1;
        acc += h.counts()[first];
    }
    let threshold = edges[first];
    let mut pts = Vec::new();
    for i in first..h.counts().len() {
        let c = h.counts()[i];
        if c >= opts.min_bin_count {
            let density = c as f64 / (n_total as f64 * (edges[i + 1] - edges[i]));
            pts.push((centers[i], density.ln(), c as f64));
        }
    }
    classify_points(&pts, *h.binning(), threshold, acc, n_total, None, opts)
}

fn classify_points(
    pts: &[(f64, f64, f64)],
    binning: Binning,
    threshold: f64,
    n_tail: u64,
    n_total: u64,
    hill_probe: Option<f64>,
    opts: &FitOptions,
) -> Result<TailReport, AnalysisError> {
    if pts.len() < 3 {
        return Err(AnalysisError::InsufficientTail {
            required: required(opts.tail_quantile),
            got: n_total,
        });
    }
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let w: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let mut fits = Vec::with_capacity(3);
    for family in [Family::Polynomial, Family::Exponential, Family::Gaussian] {
        let z: Vec<f64> = pts
            .iter()
            .map(|p| match family {
                Family::Polynomial => p.0.ln(),
                Family::Exponential => p.0,
                Family::Gaussian => p.0 * p.0,
            })
            .collect();
        let f = weighted_line(&z, &y, &w);
        fits.push(CandidateFit {
            family,
            intercept: f.intercept,
            slope: f.slope,
            r_squared: f.r_squared,
        });
    }
    let (rp, re, rg) = (fits[0].r_squared, fits[1].r_squared, fits[2].r_squared);
    let unexplained = (1.0 - re).max(1.0 - rg);
    let relative_gap = if unexplained > 0.0 {
        (re - rg).abs() / unexplained
    } else {
        0.0
    };
    let (class, parameter) = if rp >= re && rp >= rg {
        (TailClass::Polynomial, Some(-fits[0].slope - 1.0))
    } else if relative_gap <= opts.tie_margin {
        (TailClass::Intermediate, None)
    } else if re > rg {
        (TailClass::Exponential, Some(-fits[1].slope))
    } else {
        (TailClass::Gaussian, Some(-fits[2].slope))
    };
    Ok(TailReport {
        class,
        parameter,
        fits,
        relative_gap,
        tail_quantile: opts.tail_quantile,
        threshold,
        n_tail,
        n_total,
        binning,
        bins_used: pts.len(),
        hill_probe,
        options: opts.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub alpha: f64,
    pub std_error: f64,
    pub k: usize,
    /// The order statistic `x_(n-k)` the logs are taken against.
    pub threshold: f64,
}

/// Hill estimator over the top `k` order statistics.
pub fn hill_index(samples: &[f64], k: usize) -> Result<HillEstimate, AnalysisError> {
    check_k(k, samples.len() as u64)?;
    let mut v = samples.to_vec();
    v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let thr = v[k];
    hill_core(&v[..k], thr, k)
}

/// Hill estimator from the largest values in descending order.
pub fn hill_from_top(top_desc: &[f64], n_total: u64, k: usize) -> Result<HillEstimate, AnalysisError> {
    check_k(k, n_total)?;
    if top_desc.len() <= k {
        return Err(AnalysisError::OutOfRange(format!(
            "k = {k} needs {} top values, only {} kept",
            k + 1,
            top_desc.len()
        )));
    }
    hill_core(&top_desc[..k], top_desc[k], k)
}

fn check_k(k: usize, n: u64) -> Result<(), AnalysisError> {
    if k < 10 || k as u64 > n / 10 {
        return Err(AnalysisError::OutOfRange(format!(
            "Hill k = {k} must satisfy 10 <= k <= n/10 = {}",
            n / 10
        )));
    }
    Ok(())
}

fn hill_core(top: &[f64], thr: f64, k: usize) -> Result<HillEstimate, AnalysisError> {
    if !(thr > 0.0) || top.iter().any(|x| !(*x > 0.0)) {
        return Err(AnalysisError::OutOfRange(
            "nonpositive value among the top k + 1".into(),
        ));
    }
    if top.iter().any(|x| !x.is_finite()) {
        return Err(AnalysisError::NonFinite("top order statistics".into()));
    }
    let s: f64 = top.iter().map(|x| (x / thr).ln()).sum();
    let alpha = k as f64 / s;
    Ok(HillEstimate {
        alpha,
        std_error: alpha / (k as f64).sqrt(),
        k,
        threshold: thr,
    })
}
