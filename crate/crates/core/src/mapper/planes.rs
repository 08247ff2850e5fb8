use crate::bits::BitMatrix;
use crate::quant::{QuantConfig, QuantizedTensor, Sign};

/// `N_q` bit-sliced matrices per sign. Plane `j` (1-based) holds `b_j` of
/// every weight; zero codewords appear in neither set.
#[derive(Debug, Clone, PartialEq)]
pub struct BitPlaneSet {
    rows: usize,
    cols: usize,
    config: QuantConfig,
    scale_exp: i32,
    positive: Vec<BitMatrix>,
    negative: Option<Vec<BitMatrix>>,
}

impl BitPlaneSet {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_q(&self) -> u8 {
        self.config.n_q()
    }

    pub fn config(&self) -> &QuantConfig {
        &self.config
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn has_negative(&self) -> bool {
        self.negative.is_some()
    }

    /// Signs with an allocated plane set, positive first.
    pub fn signs(&self) -> Vec<Sign> {
        let mut s = vec![Sign::Positive];
        if self.negative.is_some() {
            s.push(Sign::Negative);
        }
        s
    }

    pub fn planes(&self, sign: Sign) -> Option<&[BitMatrix]> {
        match sign {
            Sign::Positive => Some(&self.positive),
            Sign::Negative => self.negative.as_deref(),
        }
    }

    /// Plane `j` (1-based) of one sign.
    pub fn plane(&self, sign: Sign, j: u8) -> Option<&BitMatrix> {
        self.planes(sign)?.get(j as usize - 1)
    }

    /// `sum_j 2^(N_q - j) (pos_j - neg_j)`, i.e. the signed codes in units of
    /// `2^-N_q`, row-major.
    pub fn reassemble(&self) -> Vec<i64> {
        let n_q = self.n_q() as u32;
        let mut out = vec![0i64; self.rows * self.cols];
        for sign in self.signs() {
            for (j, plane) in self.planes(sign).unwrap().iter().enumerate() {
                let weight = sign.factor() << (n_q - 1 - j as u32);
                for r in 0..self.rows {
                    for c in plane.row_ones(r) {
                        out[r * self.cols + c] += weight;
                    }
                }
            }
        }
        out
    }
}

pub fn slice_planes(qt: &QuantizedTensor) -> BitPlaneSet {
    let (rows, cols) = qt.shape();
    let n_q = qt.n_q();
    let fresh = || vec![BitMatrix::new(rows, cols); n_q as usize];
    let mut positive = fresh();
    let mut negative = qt.has_negative().then(fresh);
    for r in 0..rows {
        for c in 0..cols {
            let cw = qt.get(r, c);
            if cw.is_zero() {
                continue;
            }
            let set = match cw.sign() {
                Sign::Positive => &mut positive,
                Sign::Negative => negative.as_mut().expect("negative set allocated"),
            };
            for j in 1..=n_q {
                if cw.bit(j) {
                    set[j as usize - 1].set(r, c, true);
                }
            }
        }
    }
    BitPlaneSet {
        rows,
        cols,
        config: *qt.config(),
        scale_exp: qt.scale_exp(),
        positive,
        negative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::{quantize_tensor, Codeword, Rounding};
    use crate::synth;
    use crate::tensor::WeightTensor;

    fn cfg(n_q: u8, s: u8) -> QuantConfig {
        QuantConfig::new(n_q, s, Rounding::HalfAwayFromZero).unwrap()
    }

    #[test]
    fn first_weight_1010_lands_in_top_left_of_each_plane() {
        let cws = [[1, 0, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0], [0, 0, 1, 1]]
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let sign = if i == 3 { Sign::Negative } else { Sign::Positive };
                Codeword::from_bits(sign, b).unwrap()
            })
            .collect();
        let qt = QuantizedTensor::from_parts(2, 2, cws, 0, cfg(4, 3)).unwrap();
        let planes = slice_planes(&qt);
        let top_left: Vec<bool> = (1..=4)
            .map(|j| planes.plane(Sign::Positive, j).unwrap().get(0, 0))
            .collect();
        assert_eq!(top_left, vec![true, false, true, false]);
        // -0.1875 = -0011 at (1,1): negative planes 3 and 4
        let neg: Vec<bool> = (1..=4)
            .map(|j| planes.plane(Sign::Negative, j).unwrap().get(1, 1))
            .collect();
        assert_eq!(neg, vec![false, false, true, true]);
        assert!((1..=4).all(|j| !planes.plane(Sign::Positive, j).unwrap().get(1, 1)));
    }

    #[test]
    fn all_zero_tensor_has_zero_planes_and_no_negative_set() {
        let qt = quantize_tensor(&WeightTensor::zeros(3, 3).unwrap(), &cfg(8, 3)).unwrap();
        let p = slice_planes(&qt);
        assert!(!p.has_negative());
        assert!(p.planes(Sign::Positive).unwrap().iter().all(BitMatrix::is_zero));
    }

    #[test]
    fn reassembly_reproduces_codes() {
        let t = synth::uniform_tensor(17, 9, 1.0, 4);
        let qt = quantize_tensor(&t, &cfg(8, 3)).unwrap();
        let codes: Vec<i64> = qt.codewords().iter().map(|c| c.signed_code()).collect();
        assert_eq!(slice_planes(&qt).reassemble(), codes);
    }
}
