//! Crossbar, index-storage and parameterised energy/area accounting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{crossbar_count, CrossbarLayout};
use crate::sim::{OpCounts, SimResult};
use crate::squeeze::SqueezePlan;

/// Unit costs. Every field must be present and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Energy per driven cell per cycle.
    pub energy_per_op: f64,
    pub energy_per_adc_conversion: f64,
    pub energy_per_register_bit: f64,
    pub area_per_crossbar: f64,
    pub area_per_adc: f64,
    pub area_per_kb_buffer: f64,
    pub adcs_per_crossbar: f64,
}

const FIELDS: [&str; 7] = [
    "energy_per_op",
    "energy_per_adc_conversion",
    "energy_per_register_bit",
    "area_per_crossbar",
    "area_per_adc",
    "area_per_kb_buffer",
    "adcs_per_crossbar",
];

impl CostConfig {
    pub fn zero() -> Self {
        Self::from_values([0.0; 7])
    }

    fn from_values(v: [f64; 7]) -> Self {
        Self {
            energy_per_op: v[0],
            energy_per_adc_conversion: v[1],
            energy_per_register_bit: v[2],
            area_per_crossbar: v[3],
            area_per_adc: v[4],
            area_per_kb_buffer: v[5],
            adcs_per_crossbar: v[6],
        }
    }

    fn values(&self) -> [f64; 7] {
        [
            self.energy_per_op,
            self.energy_per_adc_conversion,
            self.energy_per_register_bit,
            self.area_per_crossbar,
            self.area_per_adc,
            self.area_per_kb_buffer,
            self.adcs_per_crossbar,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in FIELDS.iter().zip(self.values()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("cost field {name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Parses a JSON object, naming the first missing or invalid field.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("cost config: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("cost config must be a JSON object".into()))?;
        if let Some(k) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown cost field {k}")));
        }
        let mut v = [0.0; 7];
        for (slot, name) in v.iter_mut().zip(FIELDS) {
            *slot = obj
                .get(name)
                .ok_or_else(|| Error::Config(format!("missing cost field {name}")))?
                .as_f64()
                .ok_or_else(|| Error::Config(format!("cost field {name} must be a number")))?;
        }
        let cfg = Self::from_values(v);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::store::read_bytes(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::Config(format!("{}: not UTF-8: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Index storage in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IndexOverhead {
    /// One bit per (group, cell plane) of the layout.
    pub empty_index_bits: u64,
    /// `xb_rows` bits per group per applied squeeze step.
    pub rcmr_bits: u64,
    pub total_bits: u64,
}

pub fn index_overhead(layout: &CrossbarLayout, plan: Option<&SqueezePlan>) -> IndexOverhead {
    let empty = layout.empty_index().len() as u64;
    let rcmr = match plan {
        Some(p) => p.groups.iter().map(|g| g.degree as u64).sum::<u64>() * p.xb_rows as u64,
        None => layout
            .groups()
            .iter()
            .map(|g| g.removed() as u64 * layout.xb_rows() as u64)
            .sum(),
    };
    IndexOverhead {
        empty_index_bits: empty,
        rcmr_bits: rcmr,
        total_bits: empty + rcmr,
    }
}

/// Resource counts feeding the cost terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostInputs {
    pub occupied_crossbars: u64,
    pub op_count: u64,
    pub adc_conversions: u64,
    pub index: IndexOverhead,
    /// Input bits buffered per inference: `H * (n_a + x)`.
    pub input_buffer_bits: u64,
}

impl CostInputs {
    pub fn from_counts(layout: &CrossbarLayout, plan: Option<&SqueezePlan>, ops: &OpCounts) -> Self {
        Self {
            occupied_crossbars: crossbar_count(layout).occupied as u64,
            op_count: ops.op_count,
            adc_conversions: ops.adc_conversions,
            index: index_overhead(layout, plan),
            input_buffer_bits: layout.rows() as u64 * ops.cycle_count as u64,
        }
    }

    pub fn from_layer(layout: &CrossbarLayout, plan: Option<&SqueezePlan>, result: &SimResult) -> Self {
        Self::from_counts(layout, plan, &result.op_counts())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub ops: f64,
    pub adc: f64,
    pub registers: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AreaTerms {
    pub crossbars: f64,
    pub adcs: f64,
    pub buffer: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub config: CostConfig,
    pub inputs: CostInputs,
    pub buffer_kb: f64,
    pub energy: EnergyTerms,
    pub area: AreaTerms,
}

pub fn estimate(inputs: CostInputs, config: &CostConfig) -> Result<CostReport> {
    config.validate()?;
    let buffer_kb = (inputs.index.total_bits + inputs.input_buffer_bits) as f64 / 8192.0;
    let xb = inputs.occupied_crossbars as f64;
    let ops = inputs.op_count as f64 * config.energy_per_op;
    let adc = inputs.adc_conversions as f64 * config.energy_per_adc_conversion;
    let registers = inputs.index.total_bits as f64 * config.energy_per_register_bit;
    let crossbars = xb * config.area_per_crossbar;
    let adcs = xb * config.adcs_per_crossbar * config.area_per_adc;
    let buffer = buffer_kb * config.area_per_kb_buffer;
    Ok(CostReport {
        config: *config,
        inputs,
        buffer_kb,
        energy: EnergyTerms {
            ops,
            adc,
            registers,
            total: ops + adc + registers,
        },
        area: AreaTerms {
            crossbars,
            adcs,
            buffer,
            total: crossbars + adcs + buffer,
        },
    })
}

pub fn estimate_cost(
    layout: &CrossbarLayout,
    plan: Option<&SqueezePlan>,
    result: &SimResult,
    config: &CostConfig,
) -> Result<CostReport> {
    estimate(CostInputs::from_layer(layout, plan, result), config)
}

impl CostInputs {
    /// Resources of two disjoint layer sets together.
    pub fn combine(&self, other: &Self) -> Self {
        let total = |a: IndexOverhead, b: IndexOverhead| IndexOverhead {
            empty_index_bits: a.empty_index_bits + b.empty_index_bits,
            rcmr_bits: a.rcmr_bits + b.rcmr_bits,
            total_bits: a.total_bits + b.total_bits,
        };
        Self {
            occupied_crossbars: self.occupied_crossbars + other.occupied_crossbars,
            op_count: self.op_count + other.op_count,
            adc_conversions: self.adc_conversions + other.adc_conversions,
            index: total(self.index, other.index),
            input_buffer_bits: self.input_buffer_bits + other.input_buffer_bits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::map_tensor;
    use crate::quant::{quantize_tensor, QuantConfig, Rounding};
    use crate::sim::{quantize_activations, simulate_layer, SimOptions};
    use crate::squeeze::{squeeze, SqueezePolicy};
    use crate::synth;

    fn unit() -> CostConfig {
        CostConfig::from_values([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1.0])
    }

    fn layer(seed: u64, x: u8) -> (CrossbarLayout, Option<SqueezePlan>, SimResult) {
        let t = synth::normal_tensor(256, 256, 0.05, seed);
        let qt = quantize_tensor(&t, &QuantConfig::new(8, 3, Rounding::HalfAwayFromZero).unwrap()).unwrap();
        let l = map_tensor(&qt, 128, 128, 1).unwrap();
        let q = quantize_activations(&synth::activations(256, 1.0, seed + 1), 8).unwrap();
        let (l, plan) = if x == 0 {
            (l, None)
        } else {
            let (s, p) = squeeze(&l, SqueezePolicy::new(x)).unwrap();
            (s, Some(p))
        };
        let r = simulate_layer(&l, plan.as_ref(), &q, &SimOptions::default()).unwrap();
        (l, plan, r)
    }

    #[test]
    fn index_bits() {
        let (l, _, _) = layer(1, 0);
        let groups = l.groups().len() as u64;
        assert_eq!(index_overhead(&l, None).total_bits, groups * 8);
        let (s, plan, _) = layer(1, 1);
        let o = index_overhead(&s, plan.as_ref());
        assert_eq!(o.rcmr_bits, groups * 128);
        assert_eq!(o.empty_index_bits, groups * 7);
        assert_eq!(index_overhead(&s, None), o);
    }

    #[test]
    fn zero_config_costs_nothing() {
        let (l, p, r) = layer(2, 1);
        let rep = estimate_cost(&l, p.as_ref(), &r, &CostConfig::zero()).unwrap();
        assert_eq!(rep.energy.total, 0.0);
        assert_eq!(rep.area.total, 0.0);
    }

    #[test]
    fn crossbar_term_is_linear() {
        let (l, p, r) = layer(3, 0);
        let mut inputs = CostInputs::from_layer(&l, p.as_ref(), &r);
        let a = estimate(inputs, &unit()).unwrap();
        inputs.occupied_crossbars *= 2;
        let b = estimate(inputs, &unit()).unwrap();
        assert_eq!(b.area.crossbars, 2.0 * a.area.crossbars);
    }

    #[test]
    fn additive_over_layers() {
        let (la, pa, ra) = layer(4, 0);
        let (lb, pb, rb) = layer(5, 2);
        let ia = CostInputs::from_layer(&la, pa.as_ref(), &ra);
        let ib = CostInputs::from_layer(&lb, pb.as_ref(), &rb);
        let sep_a = estimate(ia, &unit()).unwrap();
        let sep_b = estimate(ib, &unit()).unwrap();
        let joint = estimate(ia.combine(&ib), &unit()).unwrap();
        assert_eq!(joint.energy.total, sep_a.energy.total + sep_b.energy.total);
        assert_eq!(joint.area.total, sep_a.area.total + sep_b.area.total);
    }

    #[test]
    fn config_fields_are_named() {
        let full = serde_json::to_string(&unit()).unwrap();
        assert_eq!(CostConfig::from_json(&full).unwrap(), unit());
        let missing = full.replace("\"area_per_adc\":5.0,", "");
        let e = CostConfig::from_json(&missing).unwrap_err().to_string();
        assert!(e.contains("area_per_adc"), "{e}");
        let negative = full.replace("\"energy_per_op\":1.0", "\"energy_per_op\":-1.0");
        let e = CostConfig::from_json(&negative).unwrap_err().to_string();
        assert!(e.contains("energy_per_op"), "{e}");
    }
}
