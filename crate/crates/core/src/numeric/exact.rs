//! Exact floating-point summation.
//!
//! [`ExactSum`] keeps the running total of any number of finite `f64` values
//! without rounding, as a fixed-point integer spread over 32-bit digits that
//! covers the whole double range plus 64 bits of carry headroom. Adding and
//! merging are therefore exactly associative and commutative, which is what
//! lets per-worker statistics be combined in any order with identical results.

use std::collections::BTreeMap;

const LIMBS: usize = 70;
/// Bit position of the least significant bit of limb 0 is `-BIAS`.
const BIAS: i32 = 1088;
const DIGIT_BITS: u32 = 32;
const NORMALIZE_EVERY: u32 = 1 << 30;

#[derive(Clone, Debug)]
pub struct ExactSum {
    limbs: Box<[i64; LIMBS]>,
    pending: u32,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self {
            limbs: Box::new([0; LIMBS]),
            pending: 0,
        }
    }

    /// Adds a finite value. Non-finite input panics: callers filter those
    /// before they reach a sum.
    pub fn add(&mut self, x: f64) {
        assert!(x.is_finite(), "ExactSum::add called with {x}");
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let exp_field = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exponent) = if exp_field == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp_field - 1075)
        };
        let pos = (exponent + BIAS) as u32;
        let idx = (pos / DIGIT_BITS) as usize;
        let shifted = (mantissa as u128) << (pos % DIGIT_BITS);
        let mask = (1u128 << DIGIT_BITS) - 1;
        for k in 0..3 {
            let chunk = ((shifted >> (DIGIT_BITS * k as u32)) & mask) as i64;
            if chunk != 0 {
                if negative {
                    self.limbs[idx + k] -= chunk;
                } else {
                    self.limbs[idx + k] += chunk;
                }
            }
        }
        self.pending += 1;
        if self.pending >= NORMALIZE_EVERY {
            self.normalize();
        }
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.normalize();
        let mut other = other.clone();
        other.normalize();
        for (a, b) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            *a += *b;
        }
        self.pending = 2;
        self.normalize();
    }

    /// Propagates carries so that every limb but the top one lies in
    /// `[0, 2^32)`. The canonical form is unique for each exact value.
    fn normalize(&mut self) {
        for i in 0..LIMBS - 1 {
            let carry = self.limbs[i] >> DIGIT_BITS;
            self.limbs[i] -= carry << DIGIT_BITS;
            self.limbs[i + 1] += carry;
        }
        self.pending = 0;
    }

    fn canonical(&self) -> [i64; LIMBS] {
        let mut c = self.clone();
        c.normalize();
        *c.limbs
    }

    pub fn is_zero(&self) -> bool {
        self.canonical().iter().all(|&l| l == 0)
    }

    /// Nearest-ish `f64` of the exact total. Deterministic in the exact value;
    /// may be off from correct rounding by a few ulps and overflows to
    /// infinity beyond the double range.
    pub fn value(&self) -> f64 {
        let mut limbs = self.canonical();
        // Negative totals carry a -1 top limb over full lower limbs; sum the
        // magnitude instead so no cancellation between huge terms occurs.
        let negative = limbs.iter().rev().find(|&&l| l != 0).is_some_and(|&l| l < 0);
        if negative {
            let mut neg = ExactSum {
                limbs: Box::new(limbs.map(|l| -l)),
                pending: 1,
            };
            neg.normalize();
            limbs = *neg.limbs;
        }
        let mut acc = 0.0f64;
        for i in (0..LIMBS).rev() {
            if limbs[i] != 0 {
                acc += scaled(limbs[i], DIGIT_BITS as i32 * i as i32 - BIAS);
            }
        }
        if negative {
            -acc
        } else {
            acc
        }
    }

    /// Natural log of a positive total, valid even when the total exceeds
    /// the `f64` range. Returns `-inf` for zero and NaN for a negative total.
    pub fn ln(&self) -> f64 {
        let limbs = self.canonical();
        let Some(top) = (0..LIMBS).rev().find(|&i| limbs[i] != 0) else {
            return f64::NEG_INFINITY;
        };
        if limbs[top] < 0 {
            return f64::NAN;
        }
        let lo = top.saturating_sub(2);
        let mut mant = 0.0f64;
        for i in (lo..=top).rev() {
            mant += scaled(limbs[i], DIGIT_BITS as i32 * (i - lo) as i32);
        }
        mant.ln() + (DIGIT_BITS as i32 * lo as i32 - BIAS) as f64 * std::f64::consts::LN_2
    }
}

impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

/// `digit * 2^e`, staying exact for digits far below the normal range.
fn scaled(digit: i64, e: i32) -> f64 {
    if e < -900 {
        digit as f64 * 2f64.powi(e + 300) * 2f64.powi(-300)
    } else {
        digit as f64 * 2f64.powi(e)
    }
}

const TIER_BITS: f64 = 1000.0;

/// Exact sum of `x^power` terms for nonnegative `x`, where individual terms
/// may exceed the double range. Terms with `power * log2(x) >= 1000` go into
/// tiers scaled by `2^(-1000 k)`; each tier is an [`ExactSum`], so merging
/// stays exact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TieredPowerSum {
    tiers: BTreeMap<i32, ExactSum>,
}

impl TieredPowerSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_power(&mut self, x: f64, power: f64) {
        debug_assert!(x >= 0.0 && x.is_finite());
        if x == 0.0 {
            return;
        }
        let l = power * x.log2();
        let (tier, term) = if l < TIER_BITS {
            (0, x.powf(power))
        } else {
            let k = (l / TIER_BITS).floor();
            (k as i32, (l - k * TIER_BITS).exp2())
        };
        self.tiers.entry(tier).or_default().add(term);
    }

    pub fn merge(&mut self, other: &TieredPowerSum) {
        for (k, s) in &other.tiers {
            self.tiers.entry(*k).or_default().merge(s);
        }
    }

    /// `true` once any term needed a scaled tier, i.e. the plain sum would
    /// have overflowed `f64`.
    pub fn uses_log_space(&self) -> bool {
        self.tiers.keys().any(|&k| k > 0)
    }

    /// Natural log of the total.
    pub fn ln(&self) -> f64 {
        let parts: Vec<f64> = self
            .tiers
            .iter()
            .map(|(k, s)| s.ln() + *k as f64 * TIER_BITS * std::f64::consts::LN_2)
            .filter(|v| *v > f64::NEG_INFINITY)
            .collect();
        log_sum_exp(&parts)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
