use std::ops::RangeInclusive;

use crate::bits::{BitMatrix, Bitmap};
use crate::error::{Error, Result};
use crate::quant::{QuantConfig, Sign};

use super::planes::BitPlaneSet;

/// One tile of every bit plane: `XB^1..XB^P` for a (row tile, column tile,
/// sign) triple.
///
/// Bit planes are the stored truth. Cell-plane crossbars (MLC) are derived by
/// packing `cell_bits` consecutive bit planes, MSB first. After a squeeze the
/// group keeps `N_q - removed` planes; current plane `j` then carries
/// original significance `2^-(j + removed)`, and row `r` is driven with its
/// input shifted left by `row_shift[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarGroup {
    pub(crate) sign: Sign,
    pub(crate) row_tile: usize,
    pub(crate) col_tile: usize,
    pub(crate) row_offset: usize,
    pub(crate) col_offset: usize,
    pub(crate) valid_rows: usize,
    pub(crate) valid_cols: usize,
    pub(crate) n_q: u8,
    pub(crate) removed: u8,
    pub(crate) row_shift: Vec<u8>,
    pub(crate) planes: Vec<BitMatrix>,
}

impl CrossbarGroup {
    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn row_tile(&self) -> usize {
        self.row_tile
    }

    pub fn col_tile(&self) -> usize {
        self.col_tile
    }

    pub fn row_offset(&self) -> usize {
        self.row_offset
    }

    pub fn col_offset(&self) -> usize {
        self.col_offset
    }

    /// Rows of this tile that map real weights (the rest is zero padding).
    pub fn valid_rows(&self) -> usize {
        self.valid_rows
    }

    pub fn valid_cols(&self) -> usize {
        self.valid_cols
    }

    pub fn xb_rows(&self) -> usize {
        self.row_shift.len()
    }

    pub fn xb_cols(&self) -> usize {
        self.planes.first().map_or(0, BitMatrix::cols)
    }

    pub fn n_q(&self) -> u8 {
        self.n_q
    }

    pub fn removed(&self) -> u8 {
        self.removed
    }

    pub fn row_shift(&self) -> &[u8] {
        &self.row_shift
    }

    /// Current bit planes, most significant first.
    pub fn planes(&self) -> &[BitMatrix] {
        &self.planes
    }

    /// Current bit plane `j` (1-based).
    pub fn plane(&self, j: usize) -> &BitMatrix {
        &self.planes[j - 1]
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn cell_plane_count(&self, cell_bits: u8) -> usize {
        self.planes.len().div_ceil(cell_bits as usize)
    }

    /// Bit planes (1-based, inclusive) packed into cell plane `p` (1-based).
    pub fn cell_plane_bits(&self, p: usize, cell_bits: u8) -> RangeInclusive<usize> {
        let m = cell_bits as usize;
        let first = (p - 1) * m + 1;
        first..=(p * m).min(self.planes.len())
    }

    /// Unsigned value of the cell at (`r`, `c`) in cell plane `p`.
    pub fn cell_value(&self, p: usize, r: usize, c: usize, cell_bits: u8) -> u8 {
        self.cell_plane_bits(p, cell_bits)
            .fold(0u8, |acc, j| acc << 1 | self.plane(j).get(r, c) as u8)
    }

    /// Left shift that converts cell plane `p` values into units of the
    /// original `2^-N_q`.
    pub fn cell_plane_shift(&self, p: usize, cell_bits: u8) -> u32 {
        (self.planes.len() - *self.cell_plane_bits(p, cell_bits).end()) as u32
    }

    pub fn cell_plane_is_empty(&self, p: usize, cell_bits: u8) -> bool {
        self.cell_plane_bits(p, cell_bits)
            .all(|j| self.plane(j).is_zero())
    }

    /// Effective signed contribution of local cell (`r`, `c`) in units of
    /// `2^-N_q`, including the row's input shift.
    pub fn effective_code(&self, r: usize, c: usize) -> i64 {
        let n = self.planes.len();
        let stored: i64 = self
            .planes
            .iter()
            .enumerate()
            .filter(|(_, p)| p.get(r, c))
            .map(|(j, _)| 1i64 << (n - 1 - j))
            .sum();
        self.sign.factor() * (stored << self.row_shift[r])
    }
}

/// Crossbar groups of one layer plus the positional empty-crossbar index.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarLayout {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) quant: QuantConfig,
    pub(crate) scale_exp: i32,
    pub(crate) xb_rows: usize,
    pub(crate) xb_cols: usize,
    pub(crate) cell_bits: u8,
    pub(crate) squeeze_degree: u8,
    pub(crate) groups: Vec<CrossbarGroup>,
    pub(crate) empty_index: Bitmap,
}

impl CrossbarLayout {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn quant(&self) -> &QuantConfig {
        &self.quant
    }

    pub fn n_q(&self) -> u8 {
        self.quant.n_q()
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn xb_rows(&self) -> usize {
        self.xb_rows
    }

    pub fn xb_cols(&self) -> usize {
        self.xb_cols
    }

    pub fn cell_bits(&self) -> u8 {
        self.cell_bits
    }

    pub fn squeeze_degree(&self) -> u8 {
        self.squeeze_degree
    }

    pub fn groups(&self) -> &[CrossbarGroup] {
        &self.groups
    }

    pub fn row_tiles(&self) -> usize {
        self.rows.div_ceil(self.xb_rows)
    }

    pub fn col_tiles(&self) -> usize {
        self.cols.div_ceil(self.xb_cols)
    }

    pub fn signs(&self) -> Vec<Sign> {
        let mut s: Vec<Sign> = self.groups.iter().map(|g| g.sign).collect();
        s.dedup();
        s
    }

    /// One bit per (group, cell plane), groups in order, `1` = all-zero.
    pub fn empty_index(&self) -> &Bitmap {
        &self.empty_index
    }

    /// Position of group `g`'s first cell plane in the empty index.
    pub fn index_offset(&self, g: usize) -> usize {
        self.groups[..g]
            .iter()
            .map(|gr| gr.cell_plane_count(self.cell_bits))
            .sum()
    }

    pub fn is_empty_crossbar(&self, g: usize, p: usize) -> bool {
        self.empty_index.get(self.index_offset(g) + p - 1)
    }

    pub(crate) fn rebuild_index(&mut self) {
        let m = self.cell_bits;
        self.empty_index = Bitmap::from_bools(self.groups.iter().flat_map(|g| {
            (1..=g.cell_plane_count(m)).map(move |p| g.cell_plane_is_empty(p, m))
        }));
    }

    /// Signed effective codes of the whole layer, row-major, in units of
    /// `2^-N_q` (row input shifts folded in).
    pub fn effective_codes(&self) -> Vec<i64> {
        let mut out = vec![0i64; self.rows * self.cols];
        for g in &self.groups {
            for r in 0..g.valid_rows {
                for c in 0..g.valid_cols {
                    out[(g.row_offset + r) * self.cols + g.col_offset + c] += g.effective_code(r, c);
                }
            }
        }
        out
    }
}

pub(crate) fn check_geometry(xb_rows: usize, xb_cols: usize, cell_bits: u8) -> Result<()> {
    if xb_rows == 0 || xb_cols == 0 {
        return Err(Error::Config(format!(
            "crossbar size {xb_rows}x{xb_cols} must be at least 1x1"
        )));
    }
    if !(1..=3).contains(&cell_bits) {
        return Err(Error::Config(format!("cell bits {cell_bits} not in 1..=3")));
    }
    Ok(())
}

/// Tiles every plane into `xb_rows x xb_cols` crossbars and builds the
/// empty-crossbar index. Partial tiles are zero padded.
pub fn partition(
    planes: &BitPlaneSet,
    xb_rows: usize,
    xb_cols: usize,
    cell_bits: u8,
) -> Result<CrossbarLayout> {
    check_geometry(xb_rows, xb_cols, cell_bits)?;
    let (rows, cols) = (planes.rows(), planes.cols());
    let mut groups = Vec::new();
    for sign in planes.signs() {
        let src = planes.planes(sign).expect("sign in use");
        for rt in 0..rows.div_ceil(xb_rows) {
            for ct in 0..cols.div_ceil(xb_cols) {
                let (r0, c0) = (rt * xb_rows, ct * xb_cols);
                let valid_rows = xb_rows.min(rows - r0);
                let valid_cols = xb_cols.min(cols - c0);
                let tiles = src
                    .iter()
                    .map(|plane| {
                        let mut xb = BitMatrix::new(xb_rows, xb_cols);
                        for r in 0..valid_rows {
                            for c in plane.row_ones(r0 + r) {
                                if (c0..c0 + valid_cols).contains(&c) {
                                    xb.set(r, c - c0, true);
                                }
                            }
                        }
                        xb
                    })
                    .collect();
                groups.push(CrossbarGroup {
                    sign,
                    row_tile: rt,
                    col_tile: ct,
                    row_offset: r0,
                    col_offset: c0,
                    valid_rows,
                    valid_cols,
                    n_q: planes.n_q(),
                    removed: 0,
                    row_shift: vec![0; xb_rows],
                    planes: tiles,
                });
            }
        }
    }
    let mut layout = CrossbarLayout {
        rows,
        cols,
        quant: *planes.config(),
        scale_exp: planes.scale_exp(),
        xb_rows,
        xb_cols,
        cell_bits,
        squeeze_degree: 0,
        groups,
        empty_index: Bitmap::new(0),
    };
    layout.rebuild_index();
    Ok(layout)
}
