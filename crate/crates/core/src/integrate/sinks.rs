//! Streaming statistics fed by the simulator. All of them merge exactly, so
//! per-worker results combine to the same bits in any order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::numeric::{ExactSum, TieredPowerSum};

/// Receives every emitted sample: time, full state `x`, and `‖x‖`.
pub trait Sink: Send {
    fn observe(&mut self, t: f64, x: &[f64], norm: f64);
}

/// Sums of `‖x‖^{2p}` and `‖x‖^{4p}` over a p-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    p_grid: Vec<f64>,
    sums: Vec<TieredPowerSum>,
    sq_sums: Vec<TieredPowerSum>,
    count: u64,
    max_norm: f64,
}

impl MomentAccumulator {
    pub fn new(p_grid: &[f64]) -> Self {
        Self {
            p_grid: p_grid.to_vec(),
            sums: vec![TieredPowerSum::new(); p_grid.len()],
            sq_sums: vec![TieredPowerSum::new(); p_grid.len()],
            count: 0,
            max_norm: 0.0,
        }
    }

    pub fn push(&mut self, norm: f64) {
        let r = norm.abs();
        for ((p, s), q) in self.p_grid.iter().zip(&mut self.sums).zip(&mut self.sq_sums) {
            s.add_power(r, 2.0 * p);
            q.add_power(r, 4.0 * p);
        }
        self.count += 1;
        self.max_norm = self.max_norm.max(r);
    }

    /// Panics if the p-grids differ.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!(self.p_grid, other.p_grid, "merging accumulators over different p-grids");
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
        for (a, b) in self.sq_sums.iter_mut().zip(&other.sq_sums) {
            a.merge(b);
        }
        self.count += other.count;
        self.max_norm = self.max_norm.max(other.max_norm);
    }

    pub fn p_grid(&self) -> &[f64] {
        &self.p_grid
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// `log max ‖x‖^{2p}` for grid entry `i`.
    pub fn log_max(&self, i: usize) -> f64 {
        2.0 * self.p_grid[i] * self.max_norm.ln()
    }

    pub fn uses_log_space(&self) -> bool {
        self.sums
            .iter()
            .chain(&self.sq_sums)
            .any(TieredPowerSum::uses_log_space)
    }

    /// `log` of the sample mean of `‖x‖^{2p}`.
    pub fn log_mean(&self, i: usize) -> f64 {
        self.sums[i].ln() - (self.count as f64).ln()
    }

    /// Standard error of [`Self::log_mean`]: the relative standard error of
    /// the mean, which is what the jackknife gives for a sample mean,
    /// computed entirely in log space.
    pub fn log_mean_se(&self, i: usize) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return f64::INFINITY;
        }
        let ln_n = n.ln();
        let l1 = self.sums[i].ln() - ln_n;
        let l2 = self.sq_sums[i].ln() - ln_n;
        if l1 == f64::NEG_INFINITY {
            return 0.0;
        }
        let ratio = (l2 - 2.0 * l1).exp() - 1.0;
        (ratio.max(0.0) * n / (n - 1.0) / n).sqrt()
    }
}

impl Sink for MomentAccumulator {
    fn observe(&mut self, _t: f64, _x: &[f64], norm: f64) {
        self.push(norm);
    }
}

/// Exact power sums of the first coordinate of `x`, for mean, variance and
/// kurtosis of a scalar component.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleStats {
    s1: ExactSum,
    s2: ExactSum,
    s3: ExactSum,
    s4: ExactSum,
    count: u64,
    /// A power overflowed `f64`; higher moments then report infinity.
    overflow: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    #[serde(with = "crate::numeric::ext_f64")]
    pub mean: f64,
    #[serde(with = "crate::numeric::ext_f64")]
    pub variance: f64,
    #[serde(with = "crate::numeric::ext_f64")]
    pub excess_kurtosis: f64,
}

impl SampleStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        let v2 = v * v;
        let v4 = v2 * v2;
        self.s1.add(v);
        if v4.is_finite() {
            self.s2.add(v2);
            self.s3.add(v2 * v);
            self.s4.add(v4);
        } else {
            self.overflow = true;
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &SampleStats) {
        self.s1.merge(&other.s1);
        self.s2.merge(&other.s2);
        self.s3.merge(&other.s3);
        self.s4.merge(&other.s4);
        self.count += other.count;
        self.overflow |= other.overflow;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn moments(&self) -> Moments {
        let n = self.count as f64;
        let m1 = self.s1.value() / n;
        let m2 = self.s2.value() / n;
        let m3 = self.s3.value() / n;
        let m4 = self.s4.value() / n;
        let var = m2 - m1 * m1;
        let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        if self.overflow {
            return Moments {
                count: self.count,
                mean: m1,
                variance: f64::INFINITY,
                excess_kurtosis: f64::INFINITY,
            };
        }
        Moments {
            count: self.count,
            mean: m1,
            variance: var,
            excess_kurtosis: c4 / (var * var) - 3.0,
        }
    }
}

impl Sink for SampleStats {
    fn observe(&mut self, _t: f64, x: &[f64], _norm: f64) {
        self.push(x[0]);
    }
}

/// Keeps the `k` largest norms seen.
#[derive(Clone, Debug)]
pub struct TailReservoir {
    k: usize,
    heap: BinaryHeap<Reverse<OrdF64>>,
    seen: u64,
}

/// Total order on `f64`, so equality and ordering agree.
#[derive(Clone, Copy, Debug)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TailReservoir {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
            seen: 0,
        }
    }

    pub fn push(&mut self, v: f64) {
        self.seen += 1;
        if self.heap.len() < self.k {
            self.heap.push(Reverse(OrdF64(v)));
        } else if let Some(Reverse(min)) = self.heap.peek() {
            if v > min.0 {
                self.heap.pop();
                self.heap.push(Reverse(OrdF64(v)));
            }
        }
    }

    pub fn merge(&mut self, other: &TailReservoir) {
        let seen = self.seen + other.seen;
        for Reverse(v) in &other.heap {
            self.push(v.0);
        }
        self.seen = seen;
    }

    /// Number of samples offered, kept or not.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    /// Kept values, largest first.
    pub fn top_descending(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.heap.iter().map(|r| r.0 .0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

impl Sink for TailReservoir {
    fn observe(&mut self, _t: f64, _x: &[f64], norm: f64) {
        self.push(norm);
    }
}

/// One recorded state: time, first coordinate and norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub norm: f64,
}

/// Records states with `t` in a closed window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceWindow {
    pub start: f64,
    pub end: f64,
    pub points: Vec<TracePoint>,
}

impl TraceWindow {
    pub fn new(start: f64, end: f64) -> Self {
        Self {
            start,
            end,
            points: Vec::new(),
        }
    }
}

impl Sink for TraceWindow {
    fn observe(&mut self, t: f64, x: &[f64], norm: f64) {
        if t >= self.start && t <= self.end {
            self.points.push(TracePoint { t, x: x[0], norm });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_sample_moments() {
        let mut s = SampleStats::new();
        for v in [-1.0, 1.0, -1.0, 1.0] {
            s.push(v);
        }
        let m = s.moments();
        assert_eq!((m.mean, m.variance, m.excess_kurtosis), (0.0, 1.0, -2.0));
    }

    #[test]
    fn moment_log_mean_and_se() {
        let mut a = MomentAccumulator::new(&[1.0]);
        for v in [1.0, 2.0, 3.0] {
            a.push(v);
        }
        // mean of x² = 14/3; x⁴ mean = 98/3.
        assert!((a.log_mean(0) - (14.0f64 / 3.0).ln()).abs() < 1e-14);
        let var = (98.0 / 3.0 - (14.0f64 / 3.0).powi(2)) * 3.0 / 2.0;
        let rel = (var / 3.0).sqrt() / (14.0 / 3.0);
        assert!((a.log_mean_se(0) - rel).abs() < 1e-12);
    }

    #[test]
    fn huge_norms_switch_to_log_space() {
        let mut a = MomentAccumulator::new(&[50.0]);
        a.push(1e10);
        a.push(1e10);
        assert!(a.uses_log_space());
        assert!((a.log_mean(0) - 100.0 * 1e10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn reservoir_keeps_top_k() {
        let mut r = TailReservoir::new(3);
        for v in [5.0, 1.0, 9.0, 7.0, 3.0, 8.0] {
            r.push(v);
        }
        assert_eq!(r.top_descending(), vec![9.0, 8.0, 7.0]);
        assert_eq!(r.seen(), 6);
    }

    proptest! {
        #[test]
        fn accumulator_merge_is_exactly_associative(
            a in proptest::collection::vec(0.0f64..1e3, 0..40),
            b in proptest::collection::vec(0.0f64..1e3, 0..40),
            c in proptest::collection::vec(0.0f64..1e3, 0..40),
        ) {
            let grid = [0.5, 1.0, 3.0, 40.0];
            let acc = |v: &[f64]| {
                let mut m = MomentAccumulator::new(&grid);
                v.iter().for_each(|x| m.push(*x));
                m
            };
            let (ma, mb, mc) = (acc(&a), acc(&b), acc(&c));
            let mut left = ma.clone();
            left.merge(&mb);
            left.merge(&mc);
            let mut bc = mb.clone();
            bc.merge(&mc);
            let mut right = ma.clone();
            right.merge(&bc);
            prop_assert_eq!(&left, &right);
            let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
            prop_assert_eq!(&left, &acc(&all));
        }
    }
}
