//! Windowed power-of-two-sum quantization.
//!
//! A codeword `b_1..b_{N_q}` encodes `sum b_i 2^-i`. Set bits are confined to
//! a window of `S` consecutive positions that starts at the most significant
//! set bit `k`, so every magnitude lies in `[0, 1 - 2^-S]`. Weights are
//! scaled into that range by a per-tensor power of two (scale-down only) and
//! stored in sign-magnitude form.

mod stats;

pub use stats::{bit_sparsity_stats, quantization_mse, sweep_window, BitSparsityStats, SweepRow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::WeightTensor;

pub const MAX_NQ: u8 = 16;

/// Multiplies by `2^exp` without overflowing the intermediate power.
pub(crate) fn ldexp(mut x: f64, mut exp: i32) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Rounding {
    #[default]
    #[serde(rename = "half-away")]
    HalfAwayFromZero,
    #[serde(rename = "half-even")]
    HalfToEven,
}

impl Rounding {
    pub fn round(self, x: f64) -> f64 {
        match self {
            Rounding::HalfAwayFromZero => x.round(),
            Rounding::HalfToEven => x.round_ties_even(),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Rounding::HalfAwayFromZero => 0,
            Rounding::HalfToEven => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Rounding::HalfAwayFromZero),
            1 => Some(Rounding::HalfToEven),
            _ => None,
        }
    }
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rounding::HalfAwayFromZero => "half-away",
            Rounding::HalfToEven => "half-even",
        })
    }
}

impl FromStr for Rounding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-away" | "half-away-from-zero" => Ok(Rounding::HalfAwayFromZero),
            "half-even" | "half-to-even" => Ok(Rounding::HalfToEven),
            other => Err(Error::Config(format!(
                "unknown rounding {other:?} (expected half-away or half-even)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantConfig {
    n_q: u8,
    s: u8,
    rounding: Rounding,
}

impl QuantConfig {
    pub fn new(n_q: u8, s: u8, rounding: Rounding) -> Result<Self> {
        if !(1 <= s && s <= n_q && n_q <= MAX_NQ) {
            return Err(Error::Config(format!(
                "need 1 <= s <= n_q <= {MAX_NQ}, got s={s}, n_q={n_q}"
            )));
        }
        Ok(Self { n_q, s, rounding })
    }

    pub fn n_q(&self) -> u8 {
        self.n_q
    }

    pub fn s(&self) -> u8 {
        self.s
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    /// Largest representable magnitude, `1 - 2^-S`.
    pub fn max_magnitude(&self) -> f64 {
        1.0 - ldexp(1.0, -(self.s as i32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    #[default]
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> i64 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

/// Sign-magnitude codeword. `mag` holds `b_1..b_{N_q}` with `b_1` in bit
/// `N_q - 1`, so the magnitude is `mag / 2^N_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Codeword {
    sign: Sign,
    mag: u16,
    n_q: u8,
}

impl Codeword {
    pub fn new(sign: Sign, mag: u16, n_q: u8) -> Result<Self> {
        if n_q == 0 || n_q > MAX_NQ || (n_q < 16 && mag >> n_q != 0) {
            return Err(Error::Config(format!("magnitude {mag:#b} does not fit {n_q} bits")));
        }
        // zero carries no sign
        let sign = if mag == 0 { Sign::Positive } else { sign };
        Ok(Self { sign, mag, n_q })
    }

    pub fn zero(n_q: u8) -> Self {
        Self {
            sign: Sign::Positive,
            mag: 0,
            n_q,
        }
    }

    /// Builds from `b_1..b_{N_q}` given MSB first, e.g. `[1, 0, 1, 0]`.
    pub fn from_bits(sign: Sign, bits: &[u8]) -> Result<Self> {
        let n_q = u8::try_from(bits.len()).map_err(|_| Error::Config("too many bits".into()))?;
        let mag = bits.iter().fold(0u32, |acc, &b| acc << 1 | (b != 0) as u32);
        Self::new(sign, mag as u16, n_q)
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn mag(&self) -> u16 {
        self.mag
    }

    pub fn n_q(&self) -> u8 {
        self.n_q
    }

    pub fn is_zero(&self) -> bool {
        self.mag == 0
    }

    /// Bit `b_i`, 1-based from the MSB.
    pub fn bit(&self, i: u8) -> bool {
        assert!((1..=self.n_q).contains(&i), "bit index {i} outside 1..={}", self.n_q);
        self.mag >> (self.n_q - i) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (1..=self.n_q).map(|i| self.bit(i))
    }

    /// Position `k` of the most significant set bit.
    pub fn msb_pos(&self) -> Option<u8> {
        (self.mag != 0).then(|| self.n_q - (15 - self.mag.leading_zeros() as u8))
    }

    /// True when all set bits lie in `k..=min(N_q, k + S - 1)`.
    pub fn fits_window(&self, s: u8) -> bool {
        match self.msb_pos() {
            None => true,
            Some(k) => {
                let last = self.n_q.min(k + s - 1);
                // bits strictly below position `last`
                let tail = self.n_q - last;
                self.mag & ((1u32 << tail) - 1) as u16 == 0
            }
        }
    }

    pub fn magnitude(&self) -> f64 {
        ldexp(self.mag as f64, -(self.n_q as i32))
    }

    pub fn value(&self) -> f64 {
        self.sign.factor() as f64 * self.magnitude()
    }

    /// Signed integer code in units of `2^-N_q`.
    pub fn signed_code(&self) -> i64 {
        self.sign.factor() * self.mag as i64
    }

    pub fn bit_string(&self) -> String {
        self.bits().map(|b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for Codeword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign == Sign::Negative { '-' } else { '+' };
        write!(f, "{s}{}", self.bit_string())
    }
}

/// Smallest `e >= 0` with `max_abs / 2^e <= bound`.
fn scale_for(max_abs: f64, bound: f64) -> i32 {
    let mut x = max_abs;
    let mut e = 0;
    while x > bound {
        x /= 2.0;
        e += 1;
    }
    e
}

/// Power-of-two exponent that brings the tensor into `[-(1-2^-S), 1-2^-S]`.
pub fn compute_scale(tensor: &WeightTensor, config: &QuantConfig) -> i32 {
    scale_for(tensor.max_abs(), config.max_magnitude())
}

/// Nearest windowed codeword to an already scaled value.
pub fn quantize_value(w_scaled: f64, config: &QuantConfig) -> Result<Codeword> {
    let bound = config.max_magnitude();
    if !(w_scaled.abs() <= bound) {
        return Err(Error::Range {
            value: w_scaled,
            bound,
        });
    }
    let n_q = config.n_q as i32;
    let v = w_scaled.abs();
    if v == 0.0 {
        return Ok(Codeword::zero(config.n_q));
    }
    // Candidates with MSB at k plus 2^-(k-1) form one uniform grid of step
    // 2^-last; rounding on it is nearest-in-set. Below 2^-N_q the grid is
    // the LSB grid itself.
    let mut k = 1;
    while k < n_q && v < ldexp(1.0, -k) {
        k += 1;
    }
    let last = n_q.min(k + config.s as i32 - 1);
    let q = config.rounding.round(ldexp(v, last)) as u32;
    let mag = q << (n_q - last);
    let sign = if w_scaled < 0.0 { Sign::Negative } else { Sign::Positive };
    Codeword::new(sign, mag as u16, config.n_q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    codewords: Vec<Codeword>,
    scale_exp: i32,
    config: QuantConfig,
}

impl QuantizedTensor {
    pub fn from_parts(
        rows: usize,
        cols: usize,
        codewords: Vec<Codeword>,
        scale_exp: i32,
        config: QuantConfig,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || codewords.len() != rows * cols {
            return Err(Error::InvalidTensor(format!(
                "{rows}x{cols} quantized tensor with {} codewords",
                codewords.len()
            )));
        }
        for (i, cw) in codewords.iter().enumerate() {
            if cw.n_q() != config.n_q() || !cw.fits_window(config.s()) {
                return Err(Error::InvalidTensor(format!(
                    "codeword {cw} at ({}, {}) violates n_q={} s={}",
                    i / cols,
                    i % cols,
                    config.n_q(),
                    config.s()
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            codewords,
            scale_exp,
            config,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn codewords(&self) -> &[Codeword] {
        &self.codewords
    }

    pub fn get(&self, r: usize, c: usize) -> Codeword {
        self.codewords[r * self.cols + c]
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn config(&self) -> &QuantConfig {
        &self.config
    }

    pub fn n_q(&self) -> u8 {
        self.config.n_q()
    }

    pub fn has_negative(&self) -> bool {
        self.codewords.iter().any(|c| c.sign() == Sign::Negative)
    }
}

pub fn quantize_tensor(tensor: &WeightTensor, config: &QuantConfig) -> Result<QuantizedTensor> {
    let e = compute_scale(tensor, config);
    let codewords = tensor
        .data()
        .iter()
        .map(|&w| quantize_value(ldexp(w, -e), config))
        .collect::<Result<Vec<_>>>()?;
    QuantizedTensor::from_parts(tensor.rows(), tensor.cols(), codewords, e, *config)
}

/// Intra-layer mixed precision: weight `i` is quantized with `widths[i]`
/// bits (window `min(S, width)`) and left-aligned into the tensor's `N_q`
/// bits, leaving its low positions zero.
pub fn quantize_mixed(
    tensor: &WeightTensor,
    config: &QuantConfig,
    widths: &[u8],
) -> Result<QuantizedTensor> {
    if widths.len() != tensor.data().len() {
        return Err(Error::Dimension(format!(
            "{} bit-widths for {} weights",
            widths.len(),
            tensor.data().len()
        )));
    }
    if let Some(&w) = widths.iter().find(|&&w| w == 0 || w > config.n_q()) {
        return Err(Error::Config(format!(
            "bit-width {w} outside 1..={}",
            config.n_q()
        )));
    }
    let s_min = widths.iter().map(|&w| w.min(config.s())).min().unwrap_or(config.s());
    let bound = 1.0 - ldexp(1.0, -(s_min as i32));
    let e = scale_for(tensor.max_abs(), bound);
    let codewords = tensor
        .data()
        .iter()
        .zip(widths)
        .map(|(&w, &width)| {
            let local = QuantConfig::new(width, config.s().min(width), config.rounding())?;
            let cw = quantize_value(ldexp(w, -e), &local)?;
            Codeword::new(cw.sign(), cw.mag() << (config.n_q() - width), config.n_q())
        })
        .collect::<Result<Vec<_>>>()?;
    QuantizedTensor::from_parts(tensor.rows(), tensor.cols(), codewords, e, *config)
}

pub fn dequantize(qt: &QuantizedTensor) -> WeightTensor {
    let data = qt
        .codewords
        .iter()
        .map(|c| ldexp(c.value(), qt.scale_exp))
        .collect();
    WeightTensor::new(qt.rows, qt.cols, data, "dequantized").expect("shape already validated")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_q: u8, s: u8) -> QuantConfig {
        QuantConfig::new(n_q, s, Rounding::HalfAwayFromZero).unwrap()
    }

    /// Every magnitude code of R(n_q, s), by enumeration of all codes.
    fn enumerate(n_q: u8, s: u8) -> Vec<u16> {
        (0..1u32 << n_q)
            .map(|m| m as u16)
            .filter(|&m| Codeword::new(Sign::Positive, m, n_q).unwrap().fits_window(s))
            .collect()
    }

    #[test]
    fn config_bounds() {
        assert!(QuantConfig::new(8, 0, Rounding::default()).is_err());
        assert!(QuantConfig::new(4, 5, Rounding::default()).is_err());
        assert!(QuantConfig::new(17, 3, Rounding::default()).is_err());
        assert_eq!(cfg(8, 3).max_magnitude(), 0.875);
    }

    #[test]
    fn codeword_fields() {
        let c = Codeword::from_bits(Sign::Positive, &[1, 0, 1, 0]).unwrap();
        assert_eq!(c.magnitude(), 0.625);
        assert_eq!(c.msb_pos(), Some(1));
        let d = Codeword::from_bits(Sign::Negative, &[0, 0, 1, 1]).unwrap();
        assert_eq!(d.value(), -0.1875);
        assert_eq!(d.msb_pos(), Some(3));
        assert_eq!(d.signed_code(), -3);
        assert!(d.fits_window(2));
        assert!(!Codeword::from_bits(Sign::Positive, &[1, 0, 0, 1]).unwrap().fits_window(3));
        assert_eq!(Codeword::zero(4).msb_pos(), None);
        assert_eq!(Codeword::new(Sign::Negative, 0, 4).unwrap().sign(), Sign::Positive);
        assert!(Codeword::new(Sign::Positive, 16, 4).is_err());
        let wide = Codeword::new(Sign::Positive, 0x8000, 16).unwrap();
        assert_eq!(wide.msb_pos(), Some(1));
    }

    #[test]
    fn scale_examples() {
        let c = cfg(8, 3);
        let t = |v: f64| WeightTensor::new(1, 2, vec![v, -0.1], "").unwrap();
        assert_eq!(compute_scale(&t(0.875), &c), 0);
        assert_eq!(compute_scale(&t(-0.875), &c), 0);
        assert_eq!(compute_scale(&t(1.0), &c), 1);
        assert_eq!(compute_scale(&WeightTensor::zeros(3, 3).unwrap(), &c), 0);
        assert_eq!(compute_scale(&t(1.75), &c), 1);
        assert_eq!(compute_scale(&t(1.76), &c), 2);
    }

    #[test]
    fn scale_is_smallest_nonnegative() {
        // both candidate exponents around the boundary
        let c = cfg(8, 3);
        for &m in &[0.1, 0.875, 0.876, 1.0, 3.5, 1e6] {
            let t = WeightTensor::new(1, 1, vec![m], "").unwrap();
            let e = compute_scale(&t, &c);
            assert!(ldexp(m, -e) <= 0.875);
            assert!(e == 0 || ldexp(m, -(e - 1)) > 0.875);
        }
    }

    #[test]
    fn quantize_value_examples() {
        let c = cfg(8, 3);
        let q = |v| quantize_value(v, &c).unwrap();
        assert_eq!(q(0.3).bit_string(), "01010000");
        assert_eq!(q(0.3).magnitude(), 0.3125);
        assert_eq!(q(0.49).bit_string(), "10000000");
        assert_eq!(q(0.0), Codeword::zero(8));
        assert_eq!(q(0.002).bit_string(), "00000001");
        assert_eq!(q(-0.3).sign(), Sign::Negative);
        assert_eq!(q(-0.0001), Codeword::zero(8));
        assert!(matches!(quantize_value(0.9, &c), Err(Error::Range { .. })));
        assert!(quantize_value(f64::NAN, &c).is_err());
    }

    #[test]
    fn tie_rules() {
        // 0.3125 + half step (2^-5) between 0.3125 and 0.375 at grid 2^-4
        let v = 0.3125 + 0.03125;
        let away = quantize_value(v, &cfg(8, 3)).unwrap();
        let even = quantize_value(v, &QuantConfig::new(8, 3, Rounding::HalfToEven).unwrap()).unwrap();
        assert_eq!(away.magnitude(), 0.375);
        assert_eq!(even.magnitude(), 0.375); // q=5.5 -> 6 either way
        let v = 0.25 + 0.03125; // q = 4.5
        assert_eq!(quantize_value(v, &cfg(8, 3)).unwrap().magnitude(), 0.3125);
        let even = quantize_value(v, &QuantConfig::new(8, 3, Rounding::HalfToEven).unwrap()).unwrap();
        assert_eq!(even.magnitude(), 0.25);
        // sub-LSB tie
        let half_lsb = ldexp(1.0, -9);
        assert_eq!(quantize_value(half_lsb, &cfg(8, 3)).unwrap().mag(), 1);
        let even = QuantConfig::new(8, 3, Rounding::HalfToEven).unwrap();
        assert_eq!(quantize_value(half_lsb, &even).unwrap().mag(), 0);
    }

    #[test]
    fn idempotent_on_every_representable_code() {
        for n_q in 1..=8 {
            for s in 1..=n_q {
                let c = cfg(n_q, s);
                for m in enumerate(n_q, s) {
                    for sign in [Sign::Positive, Sign::Negative] {
                        let cw = Codeword::new(sign, m, n_q).unwrap();
                        assert_eq!(quantize_value(cw.value(), &c).unwrap(), cw);
                    }
                }
            }
        }
    }

    #[test]
    fn quantize_tensor_examples() {
        let c = cfg(8, 3);
        let t = WeightTensor::from_rows(&[&[0.875, -0.4375], &[0.0, 0.109375]]).unwrap();
        let qt = quantize_tensor(&t, &c).unwrap();
        assert_eq!(qt.scale_exp(), 0);
        assert!(dequantize(&qt).bit_eq(&t));
        assert!(qt.has_negative());

        let z = quantize_tensor(&WeightTensor::zeros(2, 3).unwrap(), &c).unwrap();
        assert!(z.codewords().iter().all(Codeword::is_zero));

        let one = WeightTensor::new(1, 1, vec![1.75], "").unwrap();
        let qt = quantize_tensor(&one, &c).unwrap();
        assert_eq!(qt.scale_exp(), 1);
        assert_eq!(qt.get(0, 0).bit_string(), "11100000");
        assert_eq!(dequantize(&qt).get(0, 0), 1.75);
    }

    #[test]
    fn dequantize_examples() {
        let c4 = cfg(4, 4);
        let mk = |sign, bits: &[u8], c: QuantConfig, e| {
            let cw = Codeword::from_bits(sign, bits).unwrap();
            dequantize(&QuantizedTensor::from_parts(1, 1, vec![cw], e, c).unwrap()).get(0, 0)
        };
        assert_eq!(mk(Sign::Positive, &[1, 0, 1, 0], c4, 0), 0.625);
        assert_eq!(mk(Sign::Negative, &[0, 0, 1, 1], c4, 0), -0.1875);
        assert_eq!(mk(Sign::Positive, &[1, 1, 1, 0, 0, 0, 0, 0], cfg(8, 3), 1), 1.75);
    }

    #[test]
    fn from_parts_checks_window() {
        let bad = Codeword::from_bits(Sign::Positive, &[1, 0, 0, 1]).unwrap();
        assert!(QuantizedTensor::from_parts(1, 1, vec![bad], 0, cfg(4, 3)).is_err());
        assert!(QuantizedTensor::from_parts(1, 1, vec![bad], 0, cfg(4, 4)).is_ok());
    }

    #[test]
    fn mixed_precision_pads_low_bits() {
        let c = cfg(8, 3);
        let t = WeightTensor::new(1, 3, vec![0.3, 0.3, -0.6], "").unwrap();
        let qt = quantize_mixed(&t, &c, &[8, 4, 5]).unwrap();
        assert_eq!(qt.get(0, 0).bit_string(), "01010000");
        assert_eq!(qt.get(0, 1).bit_string(), "01010000");
        assert_eq!(qt.get(0, 2).bit_string(), "10100000");
        let narrow = quantize_mixed(&t, &c, &[8, 2, 8]).unwrap();
        // width 2 forces S=2, bound 0.75 -> 0.6 fits, e = 0
        assert_eq!(narrow.scale_exp(), 0);
        assert_eq!(narrow.get(0, 1).bit_string(), "01000000");
        assert!(quantize_mixed(&t, &c, &[8, 9, 8]).is_err());
        assert!(quantize_mixed(&t, &c, &[8]).is_err());
    }
}
