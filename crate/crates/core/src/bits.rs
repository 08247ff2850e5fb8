//! Packed bit containers used for bit planes, crossbar index bitmaps and
//! row masks.
//!
//! Bit `i` of a [`Bitmap`] lives in word `i / 64`, bit `i % 64`. The hex
//! rendering is byte oriented: byte `i / 8`, bit `i % 8` (LSB first), bytes
//! in ascending order. That makes the string independent of word size.

use serde::{Deserialize, Serialize};

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// Fixed-length one-dimensional bitmap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Bitmap {
    len: usize,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = Self::new(0);
        for b in bits {
            out.push(b);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        iter_word_ones(&self.words)
    }

    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = (0..self.len.div_ceil(8))
            .map(|b| (self.words[b / 8] >> ((b % 8) * 8)) as u8)
            .collect();
        hex::encode(bytes)
    }

    /// Parses a hex string produced by [`Bitmap::to_hex`]. Bits beyond `len`
    /// must be zero.
    pub fn from_hex(s: &str, len: usize) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut out = Self::new(len);
        for (b, byte) in bytes.iter().enumerate() {
            for k in 0..8 {
                if byte >> k & 1 == 1 {
                    let i = b * 8 + k;
                    if i >= len {
                        return None;
                    }
                    out.set(i, true);
                }
            }
        }
        Some(out)
    }
}

impl Serialize for Bitmap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("Bitmap", 2)?;
        st.serialize_field("len", &self.len)?;
        st.serialize_field("hex", &self.to_hex())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Bitmap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            len: usize,
            hex: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        Bitmap::from_hex(&raw.hex, raw.len)
            .ok_or_else(|| serde::de::Error::custom(format!("bad bitmap hex for len {}", raw.len)))
    }
}

fn iter_word_ones(words: &[u64]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let tz = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(wi * WORD + tz)
        })
    })
}

/// Row-major binary matrix, each row padded to whole words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        self.words[r * self.stride + c / WORD] >> (c % WORD) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.words[r * self.stride + c / WORD];
        let mask = 1u64 << (c % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_any(&self, r: usize) -> bool {
        self.row_words(r).iter().any(|&w| w != 0)
    }

    pub fn row_ones(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        iter_word_ones(self.row_words(r))
    }

    pub fn clear_row(&mut self, r: usize) {
        self.words[r * self.stride..(r + 1) * self.stride].fill(0);
    }

    /// Overwrites row `r` with row `r` of `src` (same shape required).
    pub fn copy_row_from(&mut self, src: &BitMatrix, r: usize) {
        debug_assert_eq!((self.rows, self.cols), (src.rows, src.cols));
        let range = r * self.stride..(r + 1) * self.stride;
        self.words[range.clone()].copy_from_slice(&src.words[range]);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Bits in row-major order, packed LSB first into bytes.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let n = self.rows * self.cols;
        let mut out = vec![0u8; n.div_ceil(8)];
        for r in 0..self.rows {
            for c in self.row_ones(r) {
                let i = r * self.cols + c;
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_packed_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Self {
        let mut m = Self::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if bytes[i / 8] >> (i % 8) & 1 == 1 {
                    m.set(r, c, true);
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitmap_hex_is_byte_lsb_first() {
        let mut b = Bitmap::new(12);
        b.set(0, true);
        b.set(9, true);
        assert_eq!(b.to_hex(), "0102");
        assert_eq!(Bitmap::from_hex("0102", 12), Some(b));
        // bit 12 set but len 12
        assert_eq!(Bitmap::from_hex("0110", 12), None);
    }

    #[test]
    fn bitmap_push_crosses_words() {
        let b = Bitmap::from_bools((0..130).map(|i| i % 3 == 0));
        assert_eq!(b.len(), 130);
        assert_eq!(b.count_ones(), 44);
        assert_eq!(b.iter_ones().collect::<Vec<_>>(), (0..130).step_by(3).collect::<Vec<_>>());
    }

    #[test]
    fn matrix_rows() {
        let mut m = BitMatrix::new(3, 70);
        m.set(1, 0, true);
        m.set(1, 69, true);
        assert!(!m.row_any(0));
        assert!(m.row_any(1));
        assert_eq!(m.row_ones(1).collect::<Vec<_>>(), vec![0, 69]);
        let mut n = BitMatrix::new(3, 70);
        n.copy_row_from(&m, 1);
        assert_eq!(n, m);
        n.clear_row(1);
        assert!(n.is_zero());
        let bytes = m.to_packed_bytes();
        assert_eq!(BitMatrix::from_packed_bytes(3, 70, &bytes), m);
    }
}
