//! Shared workloads for the pipeline benchmarks.

use sme_core::mapper::{map_tensor, CrossbarLayout};
use sme_core::quant::{quantize_tensor, QuantConfig, QuantizedTensor, Rounding};
use sme_core::sim::{quantize_activations, QuantizedActivations};
use sme_core::{synth, WeightTensor};

pub struct Workload {
    pub tensor: WeightTensor,
    pub quantized: QuantizedTensor,
    pub layout: CrossbarLayout,
    pub acts: QuantizedActivations,
}

/// Normal(0, 0.05) `size x size` layer, `N_q = 8`, `S = 3`, 128x128 SLC crossbars.
pub fn workload(size: usize, seed: u64) -> Workload {
    let tensor = synth::normal_tensor(size, size, 0.05, seed);
    let cfg = QuantConfig::new(8, 3, Rounding::HalfAwayFromZero).expect("valid config");
    let quantized = quantize_tensor(&tensor, &cfg).expect("finite tensor");
    let layout = map_tensor(&quantized, 128, 128, 1).expect("valid geometry");
    let acts = quantize_activations(&synth::activations(size, 1.0, seed + 1), 8).expect("valid width");
    Workload {
        tensor,
        quantized,
        layout,
        acts,
    }
}
