//! SMET array container.
//!
//! ```text
//! offset  size     field
//! 0       4        magic "SMET"
//! 4       2        version (u16, = 1)
//! 6       1        dtype (0 = f64)
//! 7       1        ndim
//! 8       4*ndim   dims (u32 each)
//! ...     8*prod   payload, row-major f64
//! ```
//! All multi-byte fields are little-endian.

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SMET";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct SmetArray {
    pub dims: Vec<u32>,
    pub data: Vec<f64>,
}

pub fn encode(dims: &[u32], data: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * dims.len() + 8 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F64);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn header_byte(bytes: &[u8], offset: usize, what: &str) -> Result<u8> {
    bytes
        .get(offset)
        .copied()
        .ok_or_else(|| Error::format(offset, format!("header ends before {what}")))
}

pub fn decode(bytes: &[u8]) -> Result<SmetArray> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(0, "missing SMET magic"));
    }
    let version = u16::from_le_bytes([header_byte(bytes, 4, "version")?, header_byte(bytes, 5, "version")?]);
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let dtype = header_byte(bytes, 6, "dtype")?;
    if dtype != DTYPE_F64 {
        return Err(Error::format(6, format!("unsupported dtype code {dtype}")));
    }
    let ndim = header_byte(bytes, 7, "ndim")? as usize;
    if ndim == 0 {
        return Err(Error::format(7, "ndim must be at least 1"));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut count: usize = 1;
    for i in 0..ndim {
        let off = 8 + 4 * i;
        let raw = bytes
            .get(off..off + 4)
            .ok_or_else(|| Error::format(off, format!("header ends inside dim {i}")))?;
        let d = u32::from_le_bytes(raw.try_into().unwrap());
        if d == 0 {
            return Err(Error::format(off, format!("dim {i} is zero")));
        }
        count = count
            .checked_mul(d as usize)
            .ok_or_else(|| Error::Capacity(format!("element count overflows at dim {i}")))?;
        dims.push(d);
    }
    let header = 8 + 4 * ndim;
    let expected = count
        .checked_mul(8)
        .ok_or_else(|| Error::Capacity(format!("{count} f64 values overflow the address space")))?;
    let actual = bytes.len() - header;
    if actual != expected {
        return Err(Error::Truncated { expected, actual });
    }
    let data = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(SmetArray { dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let b = encode(&[2, 3], &[0.0; 6]);
        assert_eq!(&b[..8], b"SMET\x01\x00\x00\x02");
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(b.len(), 16 + 48);
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let good = encode(&[1, 1], &[1.0]);
        let err = |bytes: &[u8]| decode(bytes).unwrap_err();

        assert!(matches!(err(b"SMEX"), Error::Format { offset: 0, .. }));
        let mut v = good.clone();
        v[4] = 2;
        assert!(matches!(err(&v), Error::Format { offset: 4, .. }));
        let mut v = good.clone();
        v[6] = 1;
        assert!(matches!(err(&v), Error::Format { offset: 6, .. }));
        assert!(matches!(err(&good[..10]), Error::Format { offset: 8, .. }));
        let mut v = good.clone();
        v[12] = 0;
        assert!(matches!(err(&v), Error::Format { offset: 12, .. }));
    }

    #[test]
    fn truncated_payload_names_counts() {
        let good = encode(&[2, 2], &[0.625, 0.375, 0.0, 0.1875]);
        match decode(&good[..good.len() - 3]) {
            Err(Error::Truncated { expected, actual }) => {
                assert_eq!((expected, actual), (32, 29));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overflowing_dims_are_capacity_errors() {
        let mut b = Vec::new();
        b.extend_from_slice(b"SMET\x01\x00\x00\x04");
        for _ in 0..4 {
            b.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(matches!(decode(&b), Err(Error::Capacity(_))));
    }
}
