//! Binary containers for quantized tensors (`SMEQ`) and crossbar layouts
//! (`SMEL`). Layout in `docs/formats.md`; all integers little-endian.

use std::path::Path;

use crate::bits::{BitMatrix, Bitmap};
use crate::error::{Error, Result};
use crate::mapper::{CrossbarGroup, CrossbarLayout};
use crate::quant::{Codeword, QuantConfig, QuantizedTensor, Rounding, Sign};

use super::{read_bytes, write_bytes};

pub const QUANT_MAGIC: &[u8; 4] = b"SMEQ";
pub const LAYOUT_MAGIC: &[u8; 4] = b"SMEL";
pub const VERSION: u16 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(self.pos, format!("file ends inside {what}"))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4], kind: &str) -> Result<()> {
        if self.bytes.get(..4) != Some(&magic[..]) {
            return Err(Error::format(0, format!("missing {kind} magic")));
        }
        self.pos = 4;
        let v = self.u16("version")?;
        if v != VERSION {
            return Err(Error::format(4, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn quant(&mut self) -> Result<QuantConfig> {
        let at = self.pos;
        let n_q = self.u8("n_q")?;
        let s = self.u8("s")?;
        let r = self.u8("rounding")?;
        let rounding = Rounding::from_code(r).ok_or_else(|| Error::format(at + 2, format!("unknown rounding code {r}")))?;
        QuantConfig::new(n_q, s, rounding).map_err(|e| Error::format(at, e.to_string()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Capacity(format!("{what} {v} exceeds u32")))
}

fn product(a: usize, b: usize) -> Result<usize> {
    a.checked_mul(b)
        .ok_or_else(|| Error::Capacity(format!("{a} x {b} overflows")))
}

pub fn encode_quantized(qt: &QuantizedTensor) -> Result<Vec<u8>> {
    let cfg = qt.config();
    let mut out = Vec::new();
    out.extend_from_slice(QUANT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&[cfg.n_q(), cfg.s(), cfg.rounding().code(), 0]);
    out.extend_from_slice(&qt.scale_exp().to_le_bytes());
    out.extend_from_slice(&u32_of(qt.rows(), "rows")?.to_le_bytes());
    out.extend_from_slice(&u32_of(qt.cols(), "cols")?.to_le_bytes());
    out.extend(qt.codewords().iter().map(|c| (c.sign() == Sign::Negative) as u8));
    for j in 1..=cfg.n_q() {
        out.extend(qt.codewords().iter().map(|c| c.bit(j) as u8));
    }
    Ok(out)
}

pub fn decode_quantized(bytes: &[u8]) -> Result<QuantizedTensor> {
    let mut rd = Reader::new(bytes);
    rd.header(QUANT_MAGIC, "SMEQ")?;
    let cfg = rd.quant()?;
    rd.u8("reserved")?;
    let scale_exp = rd.i32("scale exponent")?;
    let rows = rd.u32("rows")? as usize;
    let cols = rd.u32("cols")? as usize;
    let n = product(rows, cols)?;
    let plane_bytes = product(n, cfg.n_q() as usize + 1)?;
    if bytes.len() - rd.pos != plane_bytes {
        return Err(Error::Truncated {
            expected: rd.pos + plane_bytes,
            actual: bytes.len(),
        });
    }
    let flag = |rd: &mut Reader, what: &str| -> Result<bool> {
        let at = rd.pos;
        match rd.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::format(at, format!("{what} byte {v} is not 0 or 1"))),
        }
    };
    let mut neg = Vec::with_capacity(n);
    for _ in 0..n {
        neg.push(flag(&mut rd, "sign")?);
    }
    let mut mags = vec![0u16; n];
    for _ in 0..cfg.n_q() {
        for m in mags.iter_mut() {
            *m = *m << 1 | flag(&mut rd, "bit")? as u16;
        }
    }
    let cws = mags
        .iter()
        .zip(&neg)
        .map(|(&m, &ng)| Codeword::new(if ng { Sign::Negative } else { Sign::Positive }, m, cfg.n_q()))
        .collect::<Result<Vec<_>>>()?;
    QuantizedTensor::from_parts(rows, cols, cws, scale_exp, cfg)
}

pub fn encode_layout(layout: &CrossbarLayout) -> Result<Vec<u8>> {
    let q = layout.quant();
    let mut out = Vec::new();
    out.extend_from_slice(LAYOUT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&[
        q.n_q(),
        q.s(),
        q.rounding().code(),
        layout.cell_bits(),
        layout.squeeze_degree(),
        0,
    ]);
    out.extend_from_slice(&layout.scale_exp().to_le_bytes());
    for (v, what) in [
        (layout.rows(), "rows"),
        (layout.cols(), "cols"),
        (layout.xb_rows(), "crossbar rows"),
        (layout.xb_cols(), "crossbar cols"),
        (layout.groups().len(), "group count"),
    ] {
        out.extend_from_slice(&u32_of(v, what)?.to_le_bytes());
    }
    for g in layout.groups() {
        out.extend_from_slice(&[(g.sign() == Sign::Negative) as u8, g.removed(), 0, 0]);
        out.extend_from_slice(&u32_of(g.row_tile(), "row tile")?.to_le_bytes());
        out.extend_from_slice(&u32_of(g.col_tile(), "col tile")?.to_le_bytes());
        out.extend_from_slice(g.row_shift());
        for p in g.planes() {
            out.extend(p.to_packed_bytes());
        }
    }
    Ok(out)
}

pub fn decode_layout(bytes: &[u8]) -> Result<CrossbarLayout> {
    let mut rd = Reader::new(bytes);
    rd.header(LAYOUT_MAGIC, "SMEL")?;
    let quant = rd.quant()?;
    let cell_bits = rd.u8("cell bits")?;
    let degree_at = rd.pos;
    let squeeze_degree = rd.u8("squeeze degree")?;
    rd.u8("reserved")?;
    let scale_exp = rd.i32("scale exponent")?;
    let geo_at = rd.pos;
    let rows = rd.u32("rows")? as usize;
    let cols = rd.u32("cols")? as usize;
    let xb_rows = rd.u32("crossbar rows")? as usize;
    let xb_cols = rd.u32("crossbar cols")? as usize;
    let count = rd.u32("group count")? as usize;
    crate::mapper::check_geometry(xb_rows, xb_cols, cell_bits).map_err(|e| Error::format(geo_at, e.to_string()))?;
    if squeeze_degree >= quant.n_q() {
        return Err(Error::format(degree_at, format!("squeeze degree {squeeze_degree} >= n_q")));
    }
    let (row_tiles, col_tiles) = (rows.div_ceil(xb_rows), cols.div_ceil(xb_cols));
    let tiles = product(row_tiles, col_tiles)?;
    if rows == 0 || cols == 0 || (count != tiles && count != 2 * tiles) {
        return Err(Error::format(
            geo_at,
            format!("{count} groups inconsistent with {rows}x{cols} over {xb_rows}x{xb_cols} crossbars"),
        ));
    }
    let plane_len = product(xb_rows, xb_cols)?.div_ceil(8);
    let mut groups = Vec::with_capacity(count);
    for i in 0..count {
        let at = rd.pos;
        let sign = match rd.u8("group sign")? {
            0 => Sign::Positive,
            1 => Sign::Negative,
            v => return Err(Error::format(at, format!("bad group sign {v}"))),
        };
        let removed = rd.u8("group squeeze")?;
        rd.take(2, "reserved")?;
        let row_tile = rd.u32("row tile")? as usize;
        let col_tile = rd.u32("col tile")? as usize;
        let expect = (i % tiles / col_tiles, i % col_tiles, if i < tiles { Sign::Positive } else { Sign::Negative });
        if (row_tile, col_tile, sign) != expect || removed > squeeze_degree {
            return Err(Error::format(at, format!("group {i} header out of order or inconsistent")));
        }
        let shift_at = rd.pos;
        let row_shift = rd.take(xb_rows, "row shifts")?.to_vec();
        if row_shift.iter().any(|&s| s > removed) {
            return Err(Error::format(shift_at, format!("group {i} row shift exceeds its squeeze")));
        }
        let planes = (0..quant.n_q() - removed)
            .map(|_| rd.take(plane_len, "bit plane").map(|b| BitMatrix::from_packed_bytes(xb_rows, xb_cols, b)))
            .collect::<Result<Vec<_>>>()?;
        let (r0, c0) = (row_tile * xb_rows, col_tile * xb_cols);
        let group = CrossbarGroup {
            sign,
            row_tile,
            col_tile,
            row_offset: r0,
            col_offset: c0,
            valid_rows: xb_rows.min(rows - r0),
            valid_cols: xb_cols.min(cols - c0),
            n_q: quant.n_q(),
            removed,
            row_shift,
            planes,
        };
        let padded = group.planes.iter().any(|p| {
            (0..xb_rows).any(|r| p.row_ones(r).any(|c| r >= group.valid_rows || c >= group.valid_cols))
        });
        if padded {
            return Err(Error::format(at, format!("group {i} has bits in its zero padding")));
        }
        groups.push(group);
    }
    rd.finish()?;
    let mut layout = CrossbarLayout {
        rows,
        cols,
        quant,
        scale_exp,
        xb_rows,
        xb_cols,
        cell_bits,
        squeeze_degree,
        groups,
        empty_index: Bitmap::new(0),
    };
    layout.rebuild_index();
    Ok(layout)
}

pub fn save_quantized(qt: &QuantizedTensor, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_quantized(qt)?)
}

pub fn load_quantized(path: impl AsRef<Path>) -> Result<QuantizedTensor> {
    decode_quantized(&read_bytes(path.as_ref())?)
}

pub fn save_layout(layout: &CrossbarLayout, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_layout(layout)?)
}

pub fn load_layout(path: impl AsRef<Path>) -> Result<CrossbarLayout> {
    decode_layout(&read_bytes(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapper::map_tensor;
    use crate::quant::quantize_tensor;
    use crate::squeeze::{squeeze, SqueezePolicy};
    use crate::synth;

    fn qt() -> QuantizedTensor {
        let t = synth::normal_tensor(37, 21, 0.3, 5);
        quantize_tensor(&t, &QuantConfig::new(8, 3, Rounding::HalfToEven).unwrap()).unwrap()
    }

    #[test]
    fn quantized_round_trip() {
        let q = qt();
        let bytes = encode_quantized(&q).unwrap();
        assert_eq!(&bytes[..4], b"SMEQ");
        assert_eq!(decode_quantized(&bytes).unwrap(), q);
        assert!(matches!(decode_quantized(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() = 2;
        assert!(decode_quantized(&bad).is_err());
    }

    #[test]
    fn layout_round_trip_plain_and_squeezed() {
        for m in 1..=3 {
            let l = map_tensor(&qt(), 16, 8, m).unwrap();
            let bytes = encode_layout(&l).unwrap();
            assert_eq!(decode_layout(&bytes).unwrap(), l);
            let (sq, _) = squeeze(&l, SqueezePolicy::new(2)).unwrap();
            assert_eq!(decode_layout(&encode_layout(&sq).unwrap()).unwrap(), sq);
        }
    }

    #[test]
    fn layout_corruption_is_detected() {
        let l = map_tensor(&qt(), 16, 8, 1).unwrap();
        let bytes = encode_layout(&l).unwrap();
        assert!(decode_layout(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_layout(&extra).is_err());
        assert!(decode_layout(b"SMEQ").is_err());
    }
}
