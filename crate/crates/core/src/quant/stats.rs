use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{dequantize, quantize_tensor, QuantConfig, QuantizedTensor, Rounding};
use crate::error::{Error, Result};
use crate::tensor::WeightTensor;

/// Per-position bit densities of a quantized tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitSparsityStats {
    pub n_q: u8,
    pub codewords: u64,
    /// `ones[i]` counts codewords with `b_{i+1} = 1`.
    pub ones: Vec<u64>,
    pub density: Vec<f64>,
    pub total_ones: u64,
    pub overall_density: f64,
    pub overall_sparsity: f64,
}

pub fn bit_sparsity_stats(qt: &QuantizedTensor) -> BitSparsityStats {
    let n_q = qt.n_q();
    let mut ones = vec![0u64; n_q as usize];
    for cw in qt.codewords() {
        for (i, b) in cw.bits().enumerate() {
            ones[i] += b as u64;
        }
    }
    let n = qt.codewords().len() as u64;
    let density = ones.iter().map(|&o| o as f64 / n as f64).collect();
    let total_ones: u64 = ones.iter().sum();
    let overall_density = total_ones as f64 / (n * n_q as u64) as f64;
    BitSparsityStats {
        n_q,
        codewords: n,
        ones,
        density,
        total_ones,
        overall_density,
        overall_sparsity: 1.0 - overall_density,
    }
}

/// Mean of `(w - dequantized)^2` over all elements.
pub fn quantization_mse(tensor: &WeightTensor, qt: &QuantizedTensor) -> Result<f64> {
    if tensor.shape() != qt.shape() {
        return Err(Error::Dimension(format!(
            "tensor is {:?} but quantized tensor is {:?}",
            tensor.shape(),
            qt.shape()
        )));
    }
    let deq = dequantize(qt);
    let sum: f64 = tensor
        .data()
        .iter()
        .zip(deq.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / tensor.data().len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: u8,
    pub scale_exp: i32,
    pub mse: f64,
    pub bit_sparsity: Vec<f64>,
    pub overall_sparsity: f64,
    pub total_ones: u64,
}

/// Quantizes once per window size and tabulates error against sparsity.
pub fn sweep_window(
    tensor: &WeightTensor,
    n_q: u8,
    s_range: RangeInclusive<u8>,
    rounding: Rounding,
) -> Result<Vec<SweepRow>> {
    if s_range.is_empty() || *s_range.start() < 1 || *s_range.end() > n_q {
        return Err(Error::Config(format!(
            "window range {}..={} not within 1..={n_q}",
            s_range.start(),
            s_range.end()
        )));
    }
    s_range
        .map(|s| {
            let config = QuantConfig::new(n_q, s, rounding)?;
            let qt = quantize_tensor(tensor, &config)?;
            let stats = bit_sparsity_stats(&qt);
            Ok(SweepRow {
                s,
                scale_exp: qt.scale_exp(),
                mse: quantization_mse(tensor, &qt)?,
                bit_sparsity: stats.density.iter().map(|d| 1.0 - d).collect(),
                overall_sparsity: stats.overall_sparsity,
                total_ones: stats.total_ones,
            })
        })
        .collect()
}
