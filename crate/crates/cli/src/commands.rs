use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sme_core::cost::{estimate, index_overhead, CostConfig, CostInputs};
use sme_core::mapper::{conventional_count, crossbar_count, map_tensor, summarize, CrossbarCount};
use sme_core::quant::{
    bit_sparsity_stats, quantization_mse, quantize_mixed, quantize_tensor, sweep_window, QuantConfig, Rounding,
};
use sme_core::report::{envelope, fmt_f64, to_json, CsvWriter};
use sme_core::sim::{op_counts, quantize_activations, simulate_layer, Adc, SimOptions};
use sme_core::squeeze::{squeeze, SqueezePlan, SqueezePolicy};
use sme_core::store::{
    load_activations, load_layout, load_quantized, load_tensor, save_activations, save_layout, save_quantized,
    save_tensor,
};
use sme_core::{synth, WeightTensor};

use crate::{
    CompareArgs, Command, CostArgs, MapArgs, QuantArgs, QuantizeArgs, SimulateArgs, SqueezeArgs, StatsArgs,
    SweepArgs, SynthArgs, SynthKind,
};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Quantize(a) => quantize(a),
        Command::Map(a) => map(a),
        Command::Squeeze(a) => squeeze_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Stats(a) => stats(a),
        Command::Sweep(a) => sweep(a),
        Command::Cost(a) => cost(a),
        Command::Compare(a) => compare(a),
        Command::Synth(a) => synth_cmd(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_report<C: Serialize, T: Serialize>(path: &Path, command: &str, config: &C, result: &T) -> Result<()> {
    write_text(path, &to_json(&envelope(command, config, result))?)
}

fn rounding(s: &str) -> Result<Rounding> {
    Ok(s.parse::<Rounding>()?)
}

fn quant_config(q: &QuantArgs) -> Result<QuantConfig> {
    Ok(QuantConfig::new(q.nq, q.s, rounding(&q.rounding)?)?)
}

fn parse_xb(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("crossbar size {s:?} is not ROWSxCOLS"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .with_context(|| format!("crossbar size {s:?} is not ROWSxCOLS"))
    };
    Ok((num(r)?, num(c)?))
}

fn parse_s_range(s: &str) -> Result<(u8, u8)> {
    let num = |v: &str| {
        v.trim()
            .parse::<u8>()
            .with_context(|| format!("window range {s:?} is not LO..HI"))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (num(lo)?, num(hi.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if lo == 0 || lo > hi {
        bail!("window range {s:?} must satisfy 1 <= LO <= HI");
    }
    Ok((lo, hi))
}

fn load_widths(path: &Path, like: &WeightTensor) -> Result<Vec<u8>> {
    let w = load_tensor(path)?;
    if w.shape() != like.shape() {
        bail!(
            "bit-width tensor {} is {}x{} but weights are {}x{}",
            path.display(),
            w.rows(),
            w.cols(),
            like.rows(),
            like.cols()
        );
    }
    w.data()
        .iter()
        .map(|&v| {
            if v.fract() == 0.0 && (1.0..=16.0).contains(&v) {
                Ok(v as u8)
            } else {
                bail!("bit width {v} in {} is not an integer in 1..=16", path.display())
            }
        })
        .collect()
}

#[derive(Serialize)]
struct QuantizeConfig<'a> {
    input: &'a Path,
    n_q: u8,
    s: u8,
    rounding: Rounding,
    widths: Option<&'a Path>,
}

#[derive(Serialize)]
struct QuantizeReport {
    rows: usize,
    cols: usize,
    scale_exp: i32,
    mse: f64,
    sparsity: sme_core::quant::BitSparsityStats,
}

fn quantize(a: QuantizeArgs) -> Result<()> {
    let cfg = quant_config(&a.quant)?;
    let t = load_tensor(&a.input)?;
    let qt = match &a.widths {
        Some(p) => quantize_mixed(&t, &cfg, &load_widths(p, &t)?)?,
        None => quantize_tensor(&t, &cfg)?,
    };
    save_quantized(&qt, &a.out)?;
    if let Some(stats) = &a.stats {
        let config = QuantizeConfig {
            input: &a.input,
            n_q: cfg.n_q(),
            s: cfg.s(),
            rounding: cfg.rounding(),
            widths: a.widths.as_deref(),
        };
        let report = QuantizeReport {
            rows: qt.rows(),
            cols: qt.cols(),
            scale_exp: qt.scale_exp(),
            mse: quantization_mse(&t, &qt)?,
            sparsity: bit_sparsity_stats(&qt),
        };
        write_report(stats, "quantize", &config, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MapConfig<'a> {
    input: &'a Path,
    xb_rows: usize,
    xb_cols: usize,
    cell_bits: u8,
}

fn map(a: MapArgs) -> Result<()> {
    let (xr, xc) = parse_xb(&a.xb)?;
    let qt = load_quantized(&a.input)?;
    let layout = map_tensor(&qt, xr, xc, a.cell_bits)?;
    save_layout(&layout, &a.out)?;
    if let Some(summary) = &a.summary {
        let config = MapConfig {
            input: &a.input,
            xb_rows: xr,
            xb_cols: xc,
            cell_bits: a.cell_bits,
        };
        write_report(summary, "map", &config, &summarize(&layout))?;
    }
    Ok(())
}

fn squeeze_cmd(a: SqueezeArgs) -> Result<()> {
    let layout = load_layout(&a.input)?;
    let policy = SqueezePolicy::new(a.degree).with_threshold(a.threshold);
    let (sq, plan) = squeeze(&layout, policy)?;
    save_layout(&sq, &a.out)?;
    write_text(&a.plan, &to_json(&plan)?)
}

fn load_plan(path: &Path) -> Result<SqueezePlan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing squeeze plan {}", path.display()))
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    layout: &'a Path,
    plan: Option<&'a Path>,
    act: &'a Path,
    n_a: u8,
    adc: Adc,
    skip_empty: bool,
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let layout = load_layout(&a.layout)?;
    let plan = a.plan.as_deref().map(load_plan).transpose()?;
    let act = load_activations(&a.act)?;
    if act.len() != layout.rows() {
        bail!(
            "activation length {} ({}) does not match layer input rows {} ({})",
            act.len(),
            a.act.display(),
            layout.rows(),
            a.layout.display()
        );
    }
    let acts = quantize_activations(&act, a.na)?;
    let opts = SimOptions {
        adc: a.adc.parse()?,
        skip_empty: !a.no_skip_empty,
        trace: a.trace.is_some(),
    };
    let result = simulate_layer(&layout, plan.as_ref(), &acts, &opts)?;
    let config = SimulateConfig {
        layout: &a.layout,
        plan: a.plan.as_deref(),
        act: &a.act,
        n_a: a.na,
        adc: opts.adc,
        skip_empty: opts.skip_empty,
    };
    write_report(&a.out, "simulate", &config, &result)?;
    if let Some(path) = &a.trace {
        let mut w = CsvWriter::new(&["cycle", "group", "plane", "column", "sum"]);
        for t in &result.trace {
            w.row(&[
                t.cycle.to_string(),
                t.group.to_string(),
                t.plane.to_string(),
                t.column.to_string(),
                t.sum.to_string(),
            ]);
        }
        write_text(path, &w.finish())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InputConfig<'a> {
    input: &'a Path,
}

fn stats(a: StatsArgs) -> Result<()> {
    let qt = load_quantized(&a.input)?;
    write_report(&a.out, "stats", &InputConfig { input: &a.input }, &bit_sparsity_stats(&qt))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let (lo, hi) = parse_s_range(&a.s)?;
    let t = load_tensor(&a.input)?;
    let rows = sweep_window(&t, a.nq, lo..=hi, rounding(&a.rounding)?)?;
    let mut header = vec!["s".to_string(), "scale_exp".into(), "mse".into(), "overall_sparsity".into(), "total_ones".into()];
    header.extend((1..=a.nq).map(|j| format!("sparsity_b{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvWriter::new(&header);
    for r in &rows {
        let mut fields = vec![
            r.s.to_string(),
            r.scale_exp.to_string(),
            fmt_f64(r.mse),
            fmt_f64(r.overall_sparsity),
            r.total_ones.to_string(),
        ];
        fields.extend(r.bit_sparsity.iter().map(|&v| fmt_f64(v)));
        w.row(&fields);
    }
    write_text(&a.out, &w.finish())
}

#[derive(Serialize)]
struct CostCliConfig<'a> {
    layout: &'a Path,
    plan: Option<&'a Path>,
    n_a: u8,
    units: &'a CostConfig,
}

fn cost(a: CostArgs) -> Result<()> {
    let layout = load_layout(&a.layout)?;
    let plan = a.plan.as_deref().map(load_plan).transpose()?;
    if let Some(p) = &plan {
        p.check_layout(&layout)?;
    }
    let units = CostConfig::load(&a.config)?;
    if !(1..=sme_core::sim::MAX_NA).contains(&a.na) {
        bail!("n_a {} not in 1..={}", a.na, sme_core::sim::MAX_NA);
    }
    let ops = op_counts(&layout, a.na, true);
    let report = estimate(CostInputs::from_counts(&layout, plan.as_ref(), &ops), &units)?;
    let config = CostCliConfig {
        layout: &a.layout,
        plan: a.plan.as_deref(),
        n_a: a.na,
        units: &units,
    };
    write_report(&a.out, "cost", &config, &report)
}

#[derive(Serialize)]
struct CompareConfig<'a> {
    input: &'a Path,
    n_q: u8,
    s: u8,
    rounding: Rounding,
    xb_rows: usize,
    xb_cols: usize,
    cell_bits: u8,
    degree: Option<u8>,
    widths: Option<&'a Path>,
}

#[derive(Serialize)]
struct SqueezedCounts {
    degree: u8,
    counts: CrossbarCount,
    index_bits: u64,
    dropped_bits: usize,
}

#[derive(Serialize)]
struct CompareReport {
    rows: usize,
    cols: usize,
    scale_exp: i32,
    sme: CrossbarCount,
    conventional: usize,
    saved: i64,
    saved_fraction: f64,
    index_bits: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    squeezed: Option<SqueezedCounts>,
}

fn compare(a: CompareArgs) -> Result<()> {
    let cfg = quant_config(&a.quant)?;
    let (xr, xc) = parse_xb(&a.xb)?;
    let t = load_tensor(&a.input)?;
    let qt = match &a.widths {
        Some(p) => quantize_mixed(&t, &cfg, &load_widths(p, &t)?)?,
        None => quantize_tensor(&t, &cfg)?,
    };
    let layout = map_tensor(&qt, xr, xc, a.cell_bits)?;
    let sme = crossbar_count(&layout);
    let conventional = conventional_count(&qt, xr, xc, a.cell_bits);
    let squeezed = a
        .degree
        .map(|x| -> Result<SqueezedCounts> {
            let (sq, plan) = squeeze(&layout, SqueezePolicy::new(x))?;
            Ok(SqueezedCounts {
                degree: x,
                counts: crossbar_count(&sq),
                index_bits: index_overhead(&sq, Some(&plan)).total_bits,
                dropped_bits: plan.ledger.len(),
            })
        })
        .transpose()?;
    let saved = conventional as i64 - sme.occupied as i64;
    let report = CompareReport {
        rows: qt.rows(),
        cols: qt.cols(),
        scale_exp: qt.scale_exp(),
        sme,
        conventional,
        saved,
        saved_fraction: saved as f64 / conventional as f64,
        index_bits: index_overhead(&layout, None).total_bits,
        squeezed,
    };
    let config = CompareConfig {
        input: &a.input,
        n_q: cfg.n_q(),
        s: cfg.s(),
        rounding: cfg.rounding(),
        xb_rows: xr,
        xb_cols: xc,
        cell_bits: a.cell_bits,
        degree: a.degree,
        widths: a.widths.as_deref(),
    };
    write_report(&a.out, "compare", &config, &report)
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    if a.rows == 0 || (a.cols == 0 && !matches!(a.kind, SynthKind::Act)) {
        bail!("synthetic shape must be non-empty");
    }
    if !(a.scale.is_finite() && a.scale >= 0.0) {
        bail!("--scale {} must be finite and >= 0", a.scale);
    }
    match a.kind {
        SynthKind::Normal => save_tensor(&synth::normal_tensor(a.rows, a.cols, a.scale, a.seed), &a.out)?,
        SynthKind::Uniform => save_tensor(&synth::uniform_tensor(a.rows, a.cols, a.scale, a.seed), &a.out)?,
        SynthKind::Act => save_activations(&synth::activations(a.rows, a.scale, a.seed), &a.out)?,
    }
    Ok(())
}
