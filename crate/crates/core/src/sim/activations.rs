use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ActivationVector;

pub const MAX_NA: u8 = 16;

/// Unsigned `n_a`-bit input codes; `value ~= code * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedActivations {
    codes: Vec<u64>,
    scale: f64,
    n_a: u8,
}

impl QuantizedActivations {
    pub fn new(codes: Vec<u64>, scale: f64, n_a: u8) -> Result<Self> {
        check_width(n_a)?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::Config(format!("activation scale {scale} must be finite and >= 0")));
        }
        if let Some((i, c)) = codes.iter().enumerate().find(|(_, &c)| c >> n_a != 0) {
            return Err(Error::Config(format!(
                "activation code {c} at index {i} does not fit in {n_a} bits"
            )));
        }
        Ok(Self { codes, scale, n_a })
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn n_a(&self) -> u8 {
        self.n_a
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Bit `t` (LSB = 0) of row `r`'s code.
    pub fn bit(&self, r: usize, t: u32) -> bool {
        t < self.n_a as u32 && self.codes[r] >> t & 1 == 1
    }
}

fn check_width(n_a: u8) -> Result<()> {
    if !(1..=MAX_NA).contains(&n_a) {
        return Err(Error::Config(format!("n_a {n_a} not in 1..={MAX_NA}")));
    }
    Ok(())
}

/// Unsigned fixed point with `scale = max / (2^n_a - 1)` and codes rounded
/// half away from zero. An all-zero vector gets scale 0.
pub fn quantize_activations(act: &ActivationVector, n_a: u8) -> Result<QuantizedActivations> {
    check_width(n_a)?;
    let max = act.data().iter().copied().fold(0.0, f64::max);
    let top = ((1u64 << n_a) - 1) as f64;
    if max == 0.0 {
        return QuantizedActivations::new(vec![0; act.len()], 0.0, n_a);
    }
    let codes = act
        .data()
        .iter()
        .map(|&v| (v * top / max).round().min(top) as u64)
        .collect();
    QuantizedActivations::new(codes, max / top, n_a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(v: &[f64]) -> ActivationVector {
        ActivationVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn integers_on_grid() {
        let q = quantize_activations(&act(&[3.0, 1.0]), 2).unwrap();
        assert_eq!(q.codes(), &[3, 1]);
        assert_eq!(q.scale(), 1.0);
    }

    #[test]
    fn zero_vector() {
        let q = quantize_activations(&act(&[0.0, 0.0, 0.0]), 8).unwrap();
        assert_eq!(q.codes(), &[0, 0, 0]);
        assert_eq!(q.scale(), 0.0);
    }

    #[test]
    fn half_rounds_away() {
        let q = quantize_activations(&act(&[0.5, 0.25]), 8).unwrap();
        assert_eq!(q.codes(), &[255, 128]);
        assert_eq!(q.scale(), 0.5 / 255.0);
    }

    #[test]
    fn validation() {
        assert!(QuantizedActivations::new(vec![4], 1.0, 2).is_err());
        assert!(QuantizedActivations::new(vec![3], -1.0, 2).is_err());
        assert!(QuantizedActivations::new(vec![3], 1.0, 0).is_err());
        assert!(quantize_activations(&act(&[1.0]), 17).is_err());
        let q = QuantizedActivations::new(vec![0b101], 1.0, 3).unwrap();
        assert!(q.bit(0, 0) && !q.bit(0, 1) && q.bit(0, 2) && !q.bit(0, 3));
    }
}
