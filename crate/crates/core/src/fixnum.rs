//! Saturating signed fixed-point arithmetic.
//!
//! Values are two's-complement integers (`raw`) interpreted as
//! `raw * 2^-frac_bits`. Every operation rounds half-to-even and saturates to
//! the destination format; nothing ever wraps.
//!
//! The golden model carries fixed-point tensors as `f64` holding the exact
//! dequantized value. Formats are at most 48 bits wide, so that carrier is
//! lossless and [`FixFormat::to_raw`] recovers the integer exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed Q-format: `word_bits` total bits, `frac_bits` of them fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixFormat {
    pub word_bits: u32,
    pub frac_bits: u32,
}

impl FixFormat {
    /// Widest supported word. Keeps raw values exactly representable in f64.
    pub const MAX_WORD_BITS: u32 = 48;

    pub fn new(word_bits: u32, frac_bits: u32) -> Result<Self> {
        let fmt = FixFormat {
            word_bits,
            frac_bits,
        };
        fmt.check()?;
        Ok(fmt)
    }

    /// Default 8-bit activation split: sign + 3 integer + 4 fraction bits.
    pub const fn q8() -> Self {
        FixFormat {
            word_bits: 8,
            frac_bits: 4,
        }
    }

    /// Default 16-bit activation split: sign + 5 integer + 10 fraction bits.
    pub const fn q16() -> Self {
        FixFormat {
            word_bits: 16,
            frac_bits: 10,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(2..=Self::MAX_WORD_BITS).contains(&self.word_bits) {
            return Err(Error::config(format!(
                "fixed-point word width {} outside 2..={}",
                self.word_bits,
                Self::MAX_WORD_BITS
            )));
        }
        if self.frac_bits >= self.word_bits {
            return Err(Error::config(format!(
                "fraction bits {} must be below word width {}",
                self.frac_bits, self.word_bits
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.word_bits - 1)) - 1
    }

    #[inline]
    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.word_bits - 1))
    }

    /// Weight of one least significant bit.
    #[inline]
    pub fn lsb(&self) -> f64 {
        pow2(-(self.frac_bits as i32))
    }

    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.lsb()
    }

    pub fn min_value(&self) -> f64 {
        self.min_raw() as f64 * self.lsb()
    }

    #[inline]
    pub fn saturate(&self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }

    pub fn quantize(&self, x: f64) -> FixValue {
        quantize(x, *self)
    }

    /// Quantize and return the dequantized carrier value.
    #[inline]
    pub fn round_value(&self, x: f64) -> f64 {
        quantize(x, *self).to_f64()
    }

    /// Raw integer of a carrier value that is already on this format's grid.
    #[inline]
    pub fn to_raw(&self, value: f64) -> i64 {
        let scaled = value * pow2(self.frac_bits as i32);
        debug_assert!(
            scaled.fract() == 0.0,
            "{value} is not representable with {} fraction bits",
            self.frac_bits
        );
        scaled as i64
    }

    #[inline]
    pub fn from_raw(&self, raw: i64) -> f64 {
        raw as f64 * self.lsb()
    }
}

/// A raw value tagged with its format. Saturation is enforced on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixValue {
    raw: i64,
    format: FixFormat,
}

impl FixValue {
    pub fn from_raw(raw: i128, format: FixFormat) -> Self {
        FixValue {
            raw: format.saturate(raw),
            format,
        }
    }

    pub fn zero(format: FixFormat) -> Self {
        FixValue { raw: 0, format }
    }

    #[inline]
    pub fn raw(&self) -> i64 {
        self.raw
    }

    #[inline]
    pub fn format(&self) -> FixFormat {
        self.format
    }

    #[inline]
    pub fn to_f64(&self) -> f64 {
        self.format.from_raw(self.raw)
    }
}

/// Exact power of two as f64 for the exponent range used here.
#[inline]
pub(crate) fn pow2(exp: i32) -> f64 {
    f64::from_bits(((1023 + exp) as u64) << 52)
}

/// `raw = round_half_even(x * 2^frac)`, saturated. NaN maps to zero.
pub fn quantize(x: f64, fmt: FixFormat) -> FixValue {
    if x.is_nan() {
        return FixValue::zero(fmt);
    }
    let scaled = (x * pow2(fmt.frac_bits as i32)).round_ties_even();
    // f64 -> i128 casts saturate, so infinities land on the format limits.
    FixValue::from_raw(scaled as i128, fmt)
}

pub fn dequantize(v: FixValue) -> f64 {
    v.to_f64()
}

/// Move `raw` from `from_frac` to `to_frac` fraction bits, rounding half to even.
pub fn rescale(raw: i128, from_frac: u32, to_frac: u32) -> i128 {
    if to_frac >= from_frac {
        raw << (to_frac - from_frac)
    } else {
        let shift = from_frac - to_frac;
        let floor = raw >> shift;
        let rem = raw - (floor << shift);
        let half = 1i128 << (shift - 1);
        if rem > half || (rem == half && floor & 1 == 1) {
            floor + 1
        } else {
            floor
        }
    }
}

/// Integer division rounding half to even. `den` must be positive.
pub fn div_round_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let floor = num.div_euclid(den);
    let rem = num.rem_euclid(den);
    match (2 * rem).cmp(&den) {
        std::cmp::Ordering::Greater => floor + 1,
        std::cmp::Ordering::Less => floor,
        std::cmp::Ordering::Equal if floor & 1 == 1 => floor + 1,
        std::cmp::Ordering::Equal => floor,
    }
}

pub fn fix_mul(a: FixValue, b: FixValue, out: FixFormat) -> FixValue {
    let product = a.raw as i128 * b.raw as i128;
    let frac = a.format.frac_bits + b.format.frac_bits;
    FixValue::from_raw(rescale(product, frac, out.frac_bits), out)
}

pub fn fix_add(a: FixValue, b: FixValue, out: FixFormat) -> FixValue {
    let frac = a.format.frac_bits.max(b.format.frac_bits);
    let sum = rescale(a.raw as i128, a.format.frac_bits, frac)
        + rescale(b.raw as i128, b.format.frac_bits, frac);
    FixValue::from_raw(rescale(sum, frac, out.frac_bits), out)
}

/// Exact wide accumulator. Terms are added without rounding; rounding and
/// saturation happen once in [`Accumulator::finish`].
#[derive(Debug, Clone, Copy)]
pub struct Accumulator {
    raw: i128,
    frac: u32,
}

impl Accumulator {
    pub fn new(frac: u32) -> Self {
        Accumulator { raw: 0, frac }
    }

    pub fn frac(&self) -> u32 {
        self.frac
    }

    pub fn raw(&self) -> i128 {
        self.raw
    }

    /// Add `raw * 2^-frac`. `frac` must not exceed the accumulator's.
    #[inline]
    pub fn add_raw(&mut self, raw: i128, frac: u32) {
        assert!(frac <= self.frac, "term finer than accumulator");
        self.raw += raw << (self.frac - frac);
    }

    #[inline]
    pub fn add_product(&mut self, a: i64, a_frac: u32, b: i64, b_frac: u32) {
        self.add_raw(a as i128 * b as i128, a_frac + b_frac);
    }

    pub fn finish(&self, out: FixFormat) -> FixValue {
        FixValue::from_raw(rescale(self.raw, self.frac, out.frac_bits), out)
    }

    /// Divide by a positive integer count and round into `out`.
    pub fn finish_div(&self, count: i128, out: FixFormat) -> FixValue {
        let q = if out.frac_bits >= self.frac {
            div_round_even(self.raw << (out.frac_bits - self.frac), count)
        } else {
            div_round_even(self.raw, count << (self.frac - out.frac_bits))
        };
        FixValue::from_raw(q, out)
    }
}

/// Parameters of the exponential weighting table `w = exp(-alpha * d2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpLutConfig {
    pub alpha: f64,
    pub input_bits: u32,
    pub clamp_max: f64,
}

impl Default for ExpLutConfig {
    fn default() -> Self {
        ExpLutConfig {
            alpha: 10.0,
            input_bits: 10,
            clamp_max: 4.0,
        }
    }
}

impl ExpLutConfig {
    pub fn check(&self) -> Result<()> {
        if !(1..=20).contains(&self.input_bits) {
            return Err(Error::config(format!(
                "exp table address width {} outside 1..=20",
                self.input_bits
            )));
        }
        if !(self.clamp_max.is_finite() && self.clamp_max > 0.0) {
            return Err(Error::config("exp table clamp_max must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config("exp alpha must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn entries(&self) -> usize {
        1 << self.input_bits
    }

    pub fn bin_width(&self) -> f64 {
        self.clamp_max / self.entries() as f64
    }
}

/// Lookup table for `exp(-alpha * d2)` over `[0, clamp_max)`.
///
/// Address `a` covers inputs that round to `a * bin_width`, so every stored
/// sample sits at the midpoint of its bin and `d2 = 0` reads `exp(0)`.
#[derive(Debug, Clone)]
pub struct ExpLut {
    cfg: ExpLutConfig,
    out: FixFormat,
    table: Vec<i64>,
}

impl ExpLut {
    pub fn new(cfg: ExpLutConfig, out: FixFormat) -> Result<Self> {
        cfg.check()?;
        out.check()?;
        let width = cfg.bin_width();
        let table = (0..cfg.entries())
            .map(|a| quantize((-cfg.alpha * a as f64 * width).exp(), out).raw())
            .collect();
        Ok(ExpLut { cfg, out, table })
    }

    pub fn config(&self) -> &ExpLutConfig {
        &self.cfg
    }

    pub fn out_format(&self) -> FixFormat {
        self.out
    }

    pub fn table(&self) -> &[i64] {
        &self.table
    }

    /// Table address for a squared distance, `None` when clamped to zero.
    pub fn address(&self, d2: f64) -> Option<usize> {
        if d2 >= self.cfg.clamp_max {
            return None;
        }
        let a = (d2 / self.cfg.bin_width()).round_ties_even() as usize;
        Some(a.min(self.table.len() - 1))
    }

    /// Input value the entry at `address` was sampled at.
    pub fn sample_point(&self, address: usize) -> f64 {
        address as f64 * self.cfg.bin_width()
    }

    pub fn lookup(&self, d2: FixValue) -> Result<FixValue> {
        if d2.raw() < 0 {
            return Err(Error::data(format!(
                "negative squared distance {} fed to exp table",
                d2.to_f64()
            )));
        }
        Ok(self.lookup_nonneg(d2.to_f64()))
    }

    /// Lookup on a carrier value known to be non-negative (or +inf).
    pub fn lookup_nonneg(&self, d2: f64) -> FixValue {
        match self.address(d2) {
            Some(a) => FixValue::from_raw(self.table[a] as i128, self.out),
            None => FixValue::zero(self.out),
        }
    }
}

/// One-shot table lookup; builds the table for `cfg` on every call.
pub fn exp_weight(d2: FixValue, cfg: &ExpLutConfig, out: FixFormat) -> Result<FixValue> {
    ExpLut::new(*cfg, out)?.lookup(d2)
}
