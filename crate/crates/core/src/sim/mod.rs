//! Digital-equivalent bit-serial execution of a crossbar layout.
//!
//! Inputs are presented LSB-first, one bit per cycle. Row `r` is delayed by
//! its squeeze shift, so a layer squeezed by `x` runs `n_a + x` cycles. Each
//! cycle every driven cell plane produces integer column sums, which are
//! shifted by plane significance and accumulated with weight `2^t`.
//! Accumulations are integers in units of `2^-N_q` times the input code.

mod activations;

pub use activations::{quantize_activations, QuantizedActivations, MAX_NA};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapper::{CrossbarGroup, CrossbarLayout};
use crate::quant::{ldexp, QuantizedTensor};
use crate::squeeze::{dropped_correction, SqueezePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adc {
    /// Column sums are read exactly.
    #[default]
    Ideal,
    /// Column sums are quantized to `B` bits over the crossbar's full scale
    /// and clamped at the top code.
    Bits(u8),
}

impl Adc {
    /// Digitises column sum `s` of a crossbar with `xb_rows` rows of
    /// `cell_bits`-bit cells.
    pub fn convert(self, s: u64, xb_rows: usize, cell_bits: u8) -> u64 {
        match self {
            Adc::Ideal => s,
            Adc::Bits(b) => {
                let full = xb_rows as u64 * ((1u64 << cell_bits) - 1);
                let top = (1u64 << b) - 1;
                let mut step = 1u64;
                while full > top * step {
                    step <<= 1;
                }
                let level = (s + step / 2) / step;
                level.min(top) * step
            }
        }
    }
}

impl fmt::Display for Adc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adc::Ideal => f.write_str("ideal"),
            Adc::Bits(b) => write!(f, "bits:{b}"),
        }
    }
}

impl FromStr for Adc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ideal" {
            return Ok(Adc::Ideal);
        }
        let digits = s.strip_prefix("bits:").unwrap_or(s);
        match digits.parse::<u8>() {
            Ok(b) if (1..=32).contains(&b) => Ok(Adc::Bits(b)),
            _ => Err(Error::Config(format!(
                "unknown ADC mode {s:?} (expected ideal or bits:B with 1 <= B <= 32)"
            ))),
        }
    }
}

impl Serialize for Adc {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Adc {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub adc: Adc,
    /// Skip crossbars the empty index marks as all-zero.
    pub skip_empty: bool,
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            adc: Adc::Ideal,
            skip_empty: true,
            trace: false,
        }
    }
}

/// Pre-ADC column sum of one cell plane in one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub cycle: u32,
    pub group: usize,
    /// 1-based cell plane.
    pub plane: usize,
    /// Layer column.
    pub column: usize,
    pub sum: u64,
}

/// Result of one group: accumulations over its valid columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    pub acc: Vec<i64>,
    pub op_count: u64,
    pub conversions: u64,
    pub crossbars_driven: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub n_q: u8,
    pub n_a: u8,
    pub scale_exp: i32,
    pub act_scale: f64,
    pub adc: Adc,
    pub cycle_count: u32,
    pub op_count: u64,
    pub adc_conversions: u64,
    pub crossbars_driven: usize,
    /// Integer accumulations, units of `2^-N_q` times input code.
    pub accumulations: Vec<i64>,
    /// `accumulations * 2^(scale_exp - N_q) * act_scale`.
    pub outputs: Vec<f64>,
    /// Present when a squeeze plan was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected_accumulations: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected_outputs: Option<Vec<f64>>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Work a layer performs per inference, independent of input values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub cycle_count: u32,
    /// Driven cells times cycles, summed over driven crossbars.
    pub op_count: u64,
    pub adc_conversions: u64,
    pub crossbars_driven: usize,
}

pub fn op_counts(layout: &CrossbarLayout, n_a: u8, skip_empty: bool) -> OpCounts {
    let m = layout.cell_bits();
    let cycles = n_a as u32 + layout.squeeze_degree() as u32;
    let mut out = OpCounts {
        cycle_count: cycles,
        ..Default::default()
    };
    for (gi, g) in layout.groups().iter().enumerate() {
        for p in 1..=g.cell_plane_count(m) {
            if skip_empty && layout.is_empty_crossbar(gi, p) {
                continue;
            }
            out.crossbars_driven += 1;
            out.op_count += (g.valid_rows() * g.valid_cols()) as u64 * cycles as u64;
            out.adc_conversions += g.valid_cols() as u64 * cycles as u64;
        }
    }
    out
}

impl SimResult {
    pub fn op_counts(&self) -> OpCounts {
        OpCounts {
            cycle_count: self.cycle_count,
            op_count: self.op_count,
            adc_conversions: self.adc_conversions,
            crossbars_driven: self.crossbars_driven,
        }
    }
}

/// Converts integer accumulations to real values.
pub fn real_outputs(acc: &[i64], scale_exp: i32, n_q: u8, act_scale: f64) -> Vec<f64> {
    acc.iter()
        .map(|&a| ldexp(a as f64, scale_exp - n_q as i32) * act_scale)
        .collect()
}

/// Runs group `gi` of `layout` for `cycles` cycles. Trace rows are appended
/// to `trace` when given.
pub fn simulate_group(
    layout: &CrossbarLayout,
    gi: usize,
    acts: &QuantizedActivations,
    cycles: u32,
    opts: &SimOptions,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> GroupOutcome {
    let g = &layout.groups()[gi];
    let m = layout.cell_bits();
    let cols = g.valid_cols();
    let mut acc = vec![0i64; cols];
    let mut out = GroupOutcome {
        acc: Vec::new(),
        op_count: 0,
        conversions: 0,
        crossbars_driven: 0,
    };
    let driven_rows = |t: u32| -> Vec<usize> {
        (0..g.valid_rows())
            .filter(|&r| {
                let shift = g.row_shift()[r] as u32;
                t >= shift && acts.bit(g.row_offset() + r, t - shift)
            })
            .collect()
    };
    let schedule: Vec<Vec<usize>> = (0..cycles).map(driven_rows).collect();
    for p in 1..=g.cell_plane_count(m) {
        if opts.skip_empty && layout.is_empty_crossbar(gi, p) {
            continue;
        }
        out.crossbars_driven += 1;
        out.op_count += (g.valid_rows() * cols) as u64 * cycles as u64;
        out.conversions += cols as u64 * cycles as u64;
        let cells = cell_matrix(g, p, m);
        let shift = g.cell_plane_shift(p, m);
        let mut sums = vec![0u64; cols];
        for (t, rows) in schedule.iter().enumerate() {
            sums.iter_mut().for_each(|s| *s = 0);
            for &r in rows {
                for (s, &v) in sums.iter_mut().zip(&cells[r * cols..(r + 1) * cols]) {
                    *s += v as u64;
                }
            }
            for (c, &s) in sums.iter().enumerate() {
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(TraceRow {
                        cycle: t as u32,
                        group: gi,
                        plane: p,
                        column: g.col_offset() + c,
                        sum: s,
                    });
                }
                let v = opts.adc.convert(s, layout.xb_rows(), m) as i64;
                acc[c] += v << shift << t;
            }
        }
    }
    let f = g.sign().factor();
    out.acc = acc.into_iter().map(|a| f * a).collect();
    out
}

fn cell_matrix(g: &CrossbarGroup, p: usize, m: u8) -> Vec<u8> {
    let cols = g.valid_cols();
    let mut cells = vec![0u8; g.valid_rows() * cols];
    for r in 0..g.valid_rows() {
        for c in 0..cols {
            cells[r * cols + c] = g.cell_value(p, r, c, m);
        }
    }
    cells
}

/// Simulates every group of a layer and merges them in group order. With a
/// plan, also reports the ledger correction and corrected outputs.
pub fn simulate_layer(
    layout: &CrossbarLayout,
    plan: Option<&SqueezePlan>,
    acts: &QuantizedActivations,
    opts: &SimOptions,
) -> Result<SimResult> {
    if acts.len() != layout.rows() {
        return Err(Error::Dimension(format!(
            "activation length {} does not match layer rows {} (layer is {}x{})",
            acts.len(),
            layout.rows(),
            layout.rows(),
            layout.cols()
        )));
    }
    if let Some(plan) = plan {
        plan.check_layout(layout)?;
    }
    let cycles = acts.n_a() as u32 + layout.squeeze_degree() as u32;
    let mut acc = vec![0i64; layout.cols()];
    let mut trace = Vec::new();
    let (mut ops, mut conv, mut driven) = (0, 0, 0);
    for gi in 0..layout.groups().len() {
        let o = simulate_group(layout, gi, acts, cycles, opts, opts.trace.then_some(&mut trace));
        let off = layout.groups()[gi].col_offset();
        for (c, v) in o.acc.iter().enumerate() {
            acc[off + c] += v;
        }
        ops += o.op_count;
        conv += o.conversions;
        driven += o.crossbars_driven;
    }
    let (se, n_q, s) = (layout.scale_exp(), layout.n_q(), acts.scale());
    let correction = plan.map(|p| dropped_correction(p, acts.codes())).transpose()?;
    let corrected = correction
        .as_ref()
        .map(|corr| acc.iter().zip(corr).map(|(a, c)| a + c).collect::<Vec<_>>());
    Ok(SimResult {
        n_q,
        n_a: acts.n_a(),
        scale_exp: se,
        act_scale: s,
        adc: opts.adc,
        cycle_count: cycles,
        op_count: ops,
        adc_conversions: conv,
        crossbars_driven: driven,
        outputs: real_outputs(&acc, se, n_q, s),
        accumulations: acc,
        corrected_outputs: corrected.as_ref().map(|c| real_outputs(c, se, n_q, s)),
        corrected_accumulations: corrected,
        correction,
        trace,
    })
}

/// Reference `a^T W` over signed integer codes: `sum_r a_r * code(r, c)`.
pub fn oracle_vmm(qt: &QuantizedTensor, codes: &[u64]) -> Result<Vec<i64>> {
    if codes.len() != qt.rows() {
        return Err(Error::Dimension(format!(
            "activation length {} does not match weight rows {}",
            codes.len(),
            qt.rows()
        )));
    }
    let mut out = vec![0i64; qt.cols()];
    for (r, &a) in codes.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += a as i64 * qt.get(r, c).signed_code();
        }
    }
    Ok(out)
}
