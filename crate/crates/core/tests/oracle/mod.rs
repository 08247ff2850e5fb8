//! Brute-force reference implementations. Nothing here calls into the
//! quantizer or simulator under test.

#![allow(dead_code)]

use sme_core::{QuantizedTensor, Rounding};

/// Highest set position `k` (1-based from the MSB) of an `n_q`-bit code.
fn msb(mag: u32, n_q: u8) -> Option<u8> {
    (1..=n_q).find(|&i| mag >> (n_q - i) & 1 == 1)
}

/// Every magnitude code of R(n_q, s): set bits confined to `k..k+s-1`.
pub fn representable(n_q: u8, s: u8) -> Vec<u32> {
    (0..1u32 << n_q)
        .filter(|&m| match msb(m, n_q) {
            None => true,
            Some(k) => (1..=n_q).all(|i| mag_bit(m, n_q, i) <= (i < k + s) as u32),
        })
        .collect()
}

fn mag_bit(m: u32, n_q: u8, i: u8) -> u32 {
    m >> (n_q - i) & 1
}

fn trailing_zeros(m: u32) -> u32 {
    if m == 0 {
        u32::MAX
    } else {
        m.trailing_zeros()
    }
}

/// Nearest element of `set` to `v >= 0` (in units of `2^-n_q` after
/// scaling). Ties go to the larger magnitude (half-away) or to the code with
/// more trailing zeros (half-even).
pub fn nearest(v: f64, n_q: u8, set: &[u32], rounding: Rounding) -> u32 {
    let x = v * (1u64 << n_q) as f64;
    let mut best = set[0];
    let mut best_d = (x - best as f64).abs();
    for &m in &set[1..] {
        let d = (x - m as f64).abs();
        let better = d < best_d
            || (d == best_d
                && match rounding {
                    Rounding::HalfAwayFromZero => m > best,
                    Rounding::HalfToEven => trailing_zeros(m) > trailing_zeros(best),
                });
        if better {
            best = m;
            best_d = d;
        }
    }
    best
}

/// Signed integer weights in units of `2^-n_q`, recovered from the
/// dequantized values.
pub fn integer_weights(qt: &QuantizedTensor) -> Vec<i64> {
    let unit = (1u64 << qt.n_q()) as f64;
    qt.codewords()
        .iter()
        .map(|c| {
            let v = c.value() * unit;
            assert_eq!(v.fract(), 0.0);
            v as i64
        })
        .collect()
}

/// Double-loop `a^T W` over integer weights.
pub fn vmm(weights: &[i64], rows: usize, cols: usize, codes: &[u64]) -> Vec<i64> {
    let mut out = vec![0i64; cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c] += codes[r] as i64 * weights[r * cols + c];
        }
    }
    out
}
