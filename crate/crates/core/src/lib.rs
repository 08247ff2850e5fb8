//! Windowed power-of-two quantization, bit-sliced crossbar mapping,
//! bit-wise squeeze-out and a bit-serial crossbar simulator.
//!
//! Pipeline: [`quant::quantize_tensor`] -> [`mapper::map_tensor`] ->
//! [`squeeze::squeeze`] -> [`sim::simulate_layer`], with
//! [`cost::estimate_cost`] for resource accounting.

pub mod bits;
pub mod cost;
pub mod error;
pub mod mapper;
pub mod quant;
pub mod report;
pub mod sim;
pub mod squeeze;
pub mod store;
pub mod synth;
pub mod tensor;

pub use bits::{BitMatrix, Bitmap};
pub use cost::{CostConfig, CostReport, IndexOverhead};
pub use error::{Error, Result};
pub use mapper::{BitPlaneSet, CrossbarCount, CrossbarGroup, CrossbarLayout, LayoutSummary};
pub use quant::{Codeword, QuantConfig, QuantizedTensor, Rounding, Sign};
pub use sim::{Adc, QuantizedActivations, SimOptions, SimResult};
pub use squeeze::{LedgerEntry, SqueezePlan, SqueezePolicy};
pub use tensor::{ActivationVector, WeightTensor};
