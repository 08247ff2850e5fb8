//! Bit-wise squeeze-out.
//!
//! One step takes every crossbar row that holds a `1` in the leading plane
//! `XB^1`, moves that row one plane deeper (`XB^j -> XB^{j+1}`), drops what
//! falls off the last plane, and removes the now all-zero `XB^1`. The row's
//! input is shifted left once to compensate, which the bit-serial schedule
//! realises as a one-cycle delay. Flags are re-evaluated at every step.
//!
//! Dropped bits are recorded so that
//! `simulate(original) == simulate(squeezed) + dropped_correction` holds
//! exactly.

use serde::{Deserialize, Serialize};

use crate::bits::Bitmap;
use crate::error::{Error, Result};
use crate::mapper::{CrossbarGroup, CrossbarLayout};
use crate::quant::Sign;

/// A set bit discarded from the last plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LedgerEntry {
    pub group: usize,
    /// Layer row (word-line) index.
    pub row: usize,
    /// Layer column (bit-line) index.
    pub col: usize,
    /// 1-based squeeze step at which the bit was dropped.
    pub step: u8,
    /// Input shift the row had already accumulated before this step.
    pub prior_shift: u8,
    pub sign: Sign,
}

impl LedgerEntry {
    /// Contribution lost for input code `a`, in units of `2^-N_q`.
    pub fn lost(&self, a: u64) -> i64 {
        self.sign.factor() * ((a as i64) << self.prior_shift)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPlan {
    pub group: usize,
    pub sign: Sign,
    pub row_tile: usize,
    pub col_tile: usize,
    /// Steps actually applied (may stop early under a threshold policy).
    pub degree: u8,
    /// One mask per applied step; bit `r` set = row `r` was shifted.
    pub rcmr_masks: Vec<Bitmap>,
}

impl GroupPlan {
    /// Total input shift per crossbar row.
    pub fn row_shifts(&self, xb_rows: usize) -> Vec<u8> {
        let mut s = vec![0u8; xb_rows];
        for m in &self.rcmr_masks {
            for r in m.iter_ones() {
                s[r] += 1;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezePlan {
    pub degree: u8,
    pub threshold: f64,
    pub n_q: u8,
    pub effective_nq: u8,
    pub rows: usize,
    pub cols: usize,
    pub xb_rows: usize,
    pub groups: Vec<GroupPlan>,
    pub ledger: Vec<LedgerEntry>,
}

impl SqueezePlan {
    /// Checks that `layout` is the output this plan describes.
    pub fn check_layout(&self, layout: &CrossbarLayout) -> Result<()> {
        let mismatch = |what: String| Err(Error::Dimension(format!("plan does not match layout: {what}")));
        if (self.rows, self.cols, self.xb_rows, self.n_q, self.degree)
            != (layout.rows(), layout.cols(), layout.xb_rows(), layout.n_q(), layout.squeeze_degree())
        {
            return mismatch(format!(
                "plan {}x{} xb_rows {} n_q {} degree {}, layout {}x{} xb_rows {} n_q {} degree {}",
                self.rows,
                self.cols,
                self.xb_rows,
                self.n_q,
                self.degree,
                layout.rows(),
                layout.cols(),
                layout.xb_rows(),
                layout.n_q(),
                layout.squeeze_degree()
            ));
        }
        if self.groups.len() != layout.groups().len() {
            return mismatch(format!(
                "{} plan groups vs {} layout groups",
                self.groups.len(),
                layout.groups().len()
            ));
        }
        for (gp, g) in self.groups.iter().zip(layout.groups()) {
            if gp.degree != g.removed() || gp.row_shifts(self.xb_rows) != g.row_shift() {
                return mismatch(format!("group {} RCMR state differs", gp.group));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezePolicy {
    pub degree: u8,
    /// A group stops squeezing at the first step whose flagged-row fraction
    /// exceeds this value. `1.0` squeezes unconditionally.
    pub threshold: f64,
}

impl SqueezePolicy {
    pub fn new(degree: u8) -> Self {
        Self {
            degree,
            threshold: 1.0,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }
}

/// Rows of `XB^1` holding at least one `1`.
pub fn flag_rows(group: &CrossbarGroup) -> Bitmap {
    let lead = group.plane(1);
    Bitmap::from_bools((0..group.xb_rows()).map(|r| lead.row_any(r)))
}

fn step(group: &mut CrossbarGroup, group_idx: usize, step_no: u8, flags: &Bitmap, ledger: &mut Vec<LedgerEntry>) {
    let last = group.planes.len() - 1;
    for r in flags.iter_ones() {
        for c in group.planes[last].row_ones(r) {
            ledger.push(LedgerEntry {
                group: group_idx,
                row: group.row_offset + r,
                col: group.col_offset + c,
                step: step_no,
                prior_shift: group.row_shift[r],
                sign: group.sign,
            });
        }
        for j in (1..=last).rev() {
            let (head, tail) = group.planes.split_at_mut(j);
            tail[0].copy_row_from(&head[j - 1], r);
        }
        group.planes[0].clear_row(r);
        group.row_shift[r] += 1;
    }
    debug_assert!(group.planes[0].is_zero());
    group.planes.remove(0);
    group.removed += 1;
}

fn squeeze_group_inner(
    group: &CrossbarGroup,
    group_idx: usize,
    policy: SqueezePolicy,
) -> Result<(CrossbarGroup, GroupPlan, Vec<LedgerEntry>)> {
    let n = group.plane_count() as u8;
    if policy.degree >= n {
        return Err(Error::Degree {
            degree: policy.degree,
            n_q: n,
        });
    }
    let mut out = group.clone();
    let mut masks = Vec::new();
    let mut ledger = Vec::new();
    for t in 1..=policy.degree {
        let flags = flag_rows(&out);
        let fraction = flags.count_ones() as f64 / out.valid_rows as f64;
        if fraction > policy.threshold {
            break;
        }
        step(&mut out, group_idx, t, &flags, &mut ledger);
        masks.push(flags);
    }
    let plan = GroupPlan {
        group: group_idx,
        sign: group.sign(),
        row_tile: group.row_tile(),
        col_tile: group.col_tile(),
        degree: masks.len() as u8,
        rcmr_masks: masks,
    };
    Ok((out, plan, ledger))
}

/// Squeezes one group by `degree` steps. Ledger entries carry group id 0.
pub fn squeeze_group(
    group: &CrossbarGroup,
    degree: u8,
) -> Result<(CrossbarGroup, GroupPlan, Vec<LedgerEntry>)> {
    squeeze_group_inner(group, 0, SqueezePolicy::new(degree))
}

/// Squeezes every group of a layer. Degree 0 yields an identity plan.
pub fn squeeze(layout: &CrossbarLayout, policy: SqueezePolicy) -> Result<(CrossbarLayout, SqueezePlan)> {
    if layout.squeeze_degree() != 0 {
        return Err(Error::Config(format!(
            "layout is already squeezed by {}",
            layout.squeeze_degree()
        )));
    }
    if policy.degree >= layout.n_q() {
        return Err(Error::Degree {
            degree: policy.degree,
            n_q: layout.n_q(),
        });
    }
    if !(0.0..=1.0).contains(&policy.threshold) {
        return Err(Error::Config(format!(
            "squeeze threshold {} outside [0, 1]",
            policy.threshold
        )));
    }
    let mut out = layout.clone();
    let mut groups = Vec::with_capacity(layout.groups().len());
    let mut ledger = Vec::new();
    for (gi, g) in layout.groups().iter().enumerate() {
        let (sq, plan, mut entries) = squeeze_group_inner(g, gi, policy)?;
        out.groups[gi] = sq;
        groups.push(plan);
        ledger.append(&mut entries);
    }
    out.squeeze_degree = policy.degree;
    out.rebuild_index();
    let plan = SqueezePlan {
        degree: policy.degree,
        threshold: policy.threshold,
        n_q: layout.n_q(),
        effective_nq: layout.n_q() - policy.degree,
        rows: layout.rows(),
        cols: layout.cols(),
        xb_rows: layout.xb_rows(),
        groups,
        ledger,
    };
    Ok((out, plan))
}

/// Exact per-column value the squeeze discarded for input codes `codes`, in
/// units of `2^-N_q` of the unscaled fixed-point domain.
pub fn dropped_correction(plan: &SqueezePlan, codes: &[u64]) -> Result<Vec<i64>> {
    if codes.len() != plan.rows {
        return Err(Error::Dimension(format!(
            "{} input codes for a plan over {} rows",
            codes.len(),
            plan.rows
        )));
    }
    let mut out = vec![0i64; plan.cols];
    for e in &plan.ledger {
        out[e.col] += e.lost(codes[e.row]);
    }
    Ok(out)
}

// JSON form: masks as hex strings, ledger as integer arrays.

#[derive(Serialize, Deserialize)]
struct RawGroupPlan {
    group: usize,
    sign: Sign,
    row_tile: usize,
    col_tile: usize,
    degree: u8,
    rcmr_masks: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawPlan {
    degree: u8,
    threshold: f64,
    n_q: u8,
    effective_nq: u8,
    rows: usize,
    cols: usize,
    xb_rows: usize,
    groups: Vec<RawGroupPlan>,
    ledger_columns: Vec<String>,
    ledger: Vec<[i64; 6]>,
}

const LEDGER_COLUMNS: [&str; 6] = ["group", "row", "col", "step", "prior_shift", "sign"];

impl Serialize for SqueezePlan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawPlan {
            degree: self.degree,
            threshold: self.threshold,
            n_q: self.n_q,
            effective_nq: self.effective_nq,
            rows: self.rows,
            cols: self.cols,
            xb_rows: self.xb_rows,
            groups: self
                .groups
                .iter()
                .map(|g| RawGroupPlan {
                    group: g.group,
                    sign: g.sign,
                    row_tile: g.row_tile,
                    col_tile: g.col_tile,
                    degree: g.degree,
                    rcmr_masks: g.rcmr_masks.iter().map(Bitmap::to_hex).collect(),
                })
                .collect(),
            ledger_columns: LEDGER_COLUMNS.iter().map(|s| s.to_string()).collect(),
            ledger: self
                .ledger
                .iter()
                .map(|e| {
                    [
                        e.group as i64,
                        e.row as i64,
                        e.col as i64,
                        e.step as i64,
                        e.prior_shift as i64,
                        e.sign.factor(),
                    ]
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SqueezePlan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = RawPlan::deserialize(d)?;
        if raw.ledger_columns != LEDGER_COLUMNS {
            return Err(D::Error::custom(format!(
                "unexpected ledger columns {:?}",
                raw.ledger_columns
            )));
        }
        let groups = raw
            .groups
            .into_iter()
            .map(|g| {
                let masks = g
                    .rcmr_masks
                    .iter()
                    .map(|h| {
                        Bitmap::from_hex(h, raw.xb_rows)
                            .ok_or_else(|| D::Error::custom(format!("bad RCMR mask {h:?}")))
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok(GroupPlan {
                    group: g.group,
                    sign: g.sign,
                    row_tile: g.row_tile,
                    col_tile: g.col_tile,
                    degree: g.degree,
                    rcmr_masks: masks,
                })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        let ledger = raw
            .ledger
            .iter()
            .map(|a| {
                let sign = match a[5] {
                    1 => Sign::Positive,
                    -1 => Sign::Negative,
                    s => return Err(D::Error::custom(format!("bad ledger sign {s}"))),
                };
                let idx = |v: i64| usize::try_from(v).map_err(|_| D::Error::custom(format!("bad ledger index {v}")));
                let small = |v: i64| u8::try_from(v).map_err(|_| D::Error::custom(format!("bad ledger field {v}")));
                let e = LedgerEntry {
                    group: idx(a[0])?,
                    row: idx(a[1])?,
                    col: idx(a[2])?,
                    step: small(a[3])?,
                    prior_shift: small(a[4])?,
                    sign,
                };
                if e.row >= raw.rows || e.col >= raw.cols {
                    return Err(D::Error::custom(format!("ledger entry ({}, {}) outside layer", e.row, e.col)));
                }
                Ok(e)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(SqueezePlan {
            degree: raw.degree,
            threshold: raw.threshold,
            n_q: raw.n_q,
            effective_nq: raw.effective_nq,
            rows: raw.rows,
            cols: raw.cols,
            xb_rows: raw.xb_rows,
            groups,
            ledger,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::map_tensor;
    use crate::quant::{quantize_tensor, Codeword, QuantConfig, QuantizedTensor, Rounding};
    use crate::synth;

    fn cfg(n_q: u8, s: u8) -> QuantConfig {
        QuantConfig::new(n_q, s, Rounding::HalfAwayFromZero).unwrap()
    }

    fn qt_from(rows: usize, cols: usize, bits: &[&[u8]], s: u8) -> QuantizedTensor {
        let cws = bits
            .iter()
            .map(|b| Codeword::from_bits(Sign::Positive, b).unwrap())
            .collect();
        QuantizedTensor::from_parts(rows, cols, cws, 0, cfg(bits[0].len() as u8, s)).unwrap()
    }

    /// Row 0 holds 1010 and 0011, row 1 holds 0001 and 0000.
    fn worked_example() -> CrossbarLayout {
        let qt = qt_from(2, 2, &[&[1, 0, 1, 0], &[0, 0, 1, 1], &[0, 0, 0, 1], &[0, 0, 0, 0]], 3);
        map_tensor(&qt, 4, 4, 1).unwrap()
    }

    fn stored(g: &CrossbarGroup, r: usize, c: usize) -> String {
        g.planes().iter().map(|p| if p.get(r, c) { '1' } else { '0' }).collect()
    }

    #[test]
    fn flags_follow_leading_plane() {
        let l = worked_example();
        let f = flag_rows(&l.groups()[0]);
        assert_eq!(f.iter_ones().collect::<Vec<_>>(), vec![0]);
        let empty = map_tensor(&qt_from(1, 2, &[&[0, 1, 0, 0], &[0, 0, 1, 0]], 3), 4, 4, 1).unwrap();
        assert!(!flag_rows(&empty.groups()[0]).any());
    }

    #[test]
    fn one_bit_squeeze_halves_flagged_rows() {
        let l = worked_example();
        let (sq, plan) = squeeze(&l, SqueezePolicy::new(1)).unwrap();
        let g = &sq.groups()[0];
        assert_eq!(g.plane_count(), 3);
        // 1010 -> 0101 stored as planes 2..4 = 101; row input doubled
        assert_eq!(stored(g, 0, 0), "101");
        assert_eq!(g.row_shift()[0], 1);
        // 0011 -> 0001 with b_4 dropped
        assert_eq!(stored(g, 0, 1), "001");
        assert_eq!(
            plan.ledger,
            vec![LedgerEntry { group: 0, row: 0, col: 1, step: 1, prior_shift: 0, sign: Sign::Positive }]
        );
        // unflagged row keeps bit significance
        assert_eq!(stored(g, 1, 0), "001");
        assert_eq!(g.row_shift()[1], 0);
        assert_eq!(plan.effective_nq, 3);
    }

    #[test]
    fn correction_for_dropped_lsb() {
        let l = worked_example();
        let (_, plan) = squeeze(&l, SqueezePolicy::new(1)).unwrap();
        // input a = 1 on row 0: lost 2^-4
        assert_eq!(dropped_correction(&plan, &[1, 0]).unwrap(), vec![0, 1]);
        assert_eq!(dropped_correction(&plan, &[3, 7]).unwrap(), vec![0, 3]);
        assert!(dropped_correction(&plan, &[1]).is_err());
    }

    #[test]
    fn nothing_flagged_is_plane_drop_only() {
        let qt = qt_from(1, 2, &[&[0, 1, 0, 0], &[0, 0, 1, 0]], 3);
        let l = map_tensor(&qt, 4, 4, 1).unwrap();
        let (sq, plan) = squeeze(&l, SqueezePolicy::new(1)).unwrap();
        assert_eq!(sq.groups()[0].planes(), &l.groups()[0].planes()[1..]);
        assert!(plan.ledger.is_empty());
        assert_eq!(sq.effective_codes(), l.effective_codes());
    }

    #[test]
    fn degree_bounds() {
        let l = worked_example();
        assert!(matches!(squeeze(&l, SqueezePolicy::new(4)), Err(Error::Degree { degree: 4, n_q: 4 })));
        let (same, plan) = squeeze(&l, SqueezePolicy::new(0)).unwrap();
        assert_eq!(same.groups(), l.groups());
        assert!(plan.ledger.is_empty());
        let (sq, _) = squeeze(&l, SqueezePolicy::new(1)).unwrap();
        assert!(squeeze(&sq, SqueezePolicy::new(1)).is_err());
        assert!(squeeze_group(&l.groups()[0], 5).is_err());
    }

    #[test]
    fn multi_step_reflags_rows() {
        // row 1 has no b_1 but has b_2: flagged only at step 2
        let qt = qt_from(2, 1, &[&[1, 1, 0, 0], &[0, 1, 1, 1]], 3);
        let l = map_tensor(&qt, 2, 1, 1).unwrap();
        let (sq, plan) = squeeze(&l, SqueezePolicy::new(2)).unwrap();
        let masks: Vec<Vec<usize>> = plan.groups[0].rcmr_masks.iter().map(|m| m.iter_ones().collect()).collect();
        assert_eq!(masks, vec![vec![0], vec![0, 1]]);
        assert_eq!(sq.groups()[0].row_shift(), &[2, 1]);
        // row 1 lost its b_4 at step 2 with no prior shift
        assert_eq!(
            plan.ledger,
            vec![LedgerEntry { group: 0, row: 1, col: 0, step: 2, prior_shift: 0, sign: Sign::Positive }]
        );
        // effective codes + correction == original codes
        let corr = dropped_correction(&plan, &[0, 1]).unwrap();
        let orig = l.effective_codes();
        let now = sq.effective_codes();
        assert_eq!(now[1] + corr[0], orig[1]);
        assert_eq!(now[0], orig[0]);
    }

    #[test]
    fn threshold_stops_dense_groups() {
        let t = synth::uniform_tensor(32, 32, 0.8, 8);
        let qt = quantize_tensor(&t, &cfg(8, 3)).unwrap();
        let l = map_tensor(&qt, 16, 16, 1).unwrap();
        let (sq, plan) = squeeze(&l, SqueezePolicy::new(2).with_threshold(0.0)).unwrap();
        for (g, gp) in sq.groups().iter().zip(&plan.groups) {
            assert_eq!(g.removed(), gp.degree);
            if gp.degree == 0 {
                assert_eq!(g.plane_count(), 8);
            }
        }
        assert!(plan.groups.iter().any(|g| g.degree < 2));
        plan.check_layout(&sq).unwrap();
        assert!(squeeze(&l, SqueezePolicy::new(1).with_threshold(1.5)).is_err());
    }

    #[test]
    fn plan_json_round_trip() {
        let t = synth::uniform_tensor(20, 12, 0.8, 2);
        let qt = quantize_tensor(&t, &cfg(8, 3)).unwrap();
        let l = map_tensor(&qt, 8, 8, 1).unwrap();
        let (sq, plan) = squeeze(&l, SqueezePolicy::new(3)).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        let back: SqueezePlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        back.check_layout(&sq).unwrap();
        assert!(back.check_layout(&l).is_err());
    }
}
