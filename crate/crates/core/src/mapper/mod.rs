//! Inter-crossbar bit slicing: each bit position of every weight goes to its
//! own crossbar, so the sparsity of a bit position collects into whole
//! crossbars that the empty index can release.

mod layout;
mod planes;

pub(crate) use layout::check_geometry;
pub use layout::{partition, CrossbarGroup, CrossbarLayout};
pub use planes::{slice_planes, BitPlaneSet};

use serde::{Deserialize, Serialize};

use crate::bits::Bitmap;
use crate::error::Result;
use crate::quant::{QuantizedTensor, Sign};

/// Slice and partition in one step.
pub fn map_tensor(
    qt: &QuantizedTensor,
    xb_rows: usize,
    xb_cols: usize,
    cell_bits: u8,
) -> Result<CrossbarLayout> {
    partition(&slice_planes(qt), xb_rows, xb_cols, cell_bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossbarCount {
    pub allocated: usize,
    pub empty: usize,
    pub occupied: usize,
}

pub fn crossbar_count(layout: &CrossbarLayout) -> CrossbarCount {
    let allocated = layout.empty_index().len();
    let empty = layout.empty_index().count_ones();
    CrossbarCount {
        allocated,
        empty,
        occupied: allocated - empty,
    }
}

/// Crossbars needed when each weight occupies `ceil(n_q / m)` adjacent cells
/// of one crossbar row: `ceil(H / xb_rows) * ceil(W * ceil(n_q / m) / xb_cols)`
/// per sign in use.
pub fn conventional_count_for(
    rows: usize,
    cols: usize,
    n_q: u8,
    signs: usize,
    xb_rows: usize,
    xb_cols: usize,
    cell_bits: u8,
) -> usize {
    let cells_per_weight = (n_q as usize).div_ceil(cell_bits as usize);
    signs * rows.div_ceil(xb_rows) * (cols * cells_per_weight).div_ceil(xb_cols)
}

pub fn conventional_count(
    qt: &QuantizedTensor,
    xb_rows: usize,
    xb_cols: usize,
    cell_bits: u8,
) -> usize {
    let signs = 1 + qt.has_negative() as usize;
    conventional_count_for(qt.rows(), qt.cols(), qt.n_q(), signs, xb_rows, xb_cols, cell_bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub sign: Sign,
    pub row_tile: usize,
    pub col_tile: usize,
    pub bit_planes: usize,
    pub cell_planes: usize,
    pub squeezed: u8,
}

/// Counts, dimensions and the empty-crossbar bitmap of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSummary {
    pub rows: usize,
    pub cols: usize,
    pub n_q: u8,
    pub s: u8,
    pub scale_exp: i32,
    pub xb_rows: usize,
    pub xb_cols: usize,
    pub cell_bits: u8,
    pub squeeze_degree: u8,
    pub groups: Vec<GroupSummary>,
    pub counts: CrossbarCount,
    pub conventional: usize,
    pub empty_index: Bitmap,
}

pub fn summarize(layout: &CrossbarLayout) -> LayoutSummary {
    let m = layout.cell_bits();
    LayoutSummary {
        rows: layout.rows(),
        cols: layout.cols(),
        n_q: layout.n_q(),
        s: layout.quant().s(),
        scale_exp: layout.scale_exp(),
        xb_rows: layout.xb_rows(),
        xb_cols: layout.xb_cols(),
        cell_bits: m,
        squeeze_degree: layout.squeeze_degree(),
        groups: layout
            .groups()
            .iter()
            .map(|g| GroupSummary {
                sign: g.sign(),
                row_tile: g.row_tile(),
                col_tile: g.col_tile(),
                bit_planes: g.plane_count(),
                cell_planes: g.cell_plane_count(m),
                squeezed: g.removed(),
            })
            .collect(),
        counts: crossbar_count(layout),
        conventional: conventional_count_for(
            layout.rows(),
            layout.cols(),
            layout.n_q(),
            layout.signs().len(),
            layout.xb_rows(),
            layout.xb_cols(),
            m,
        ),
        empty_index: layout.empty_index().clone(),
    }
}
