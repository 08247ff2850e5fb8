use crate::error::{Error, Result};

/// Real-valued weight matrix. Rows run along word-lines (input dimension),
/// columns along bit-lines (output dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    name: String,
}

impl WeightTensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidTensor(format!(
                "shape {rows}x{cols} has an empty dimension"
            )));
        }
        let expected = rows.checked_mul(cols).ok_or_else(|| {
            Error::Capacity(format!("shape {rows}x{cols} overflows the address space"))
        })?;
        if data.len() != expected {
            return Err(Error::InvalidTensor(format!(
                "shape {rows}x{cols} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!(
                "non-finite value {} at ({}, {})",
                data[i],
                i / cols,
                i % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            name: name.into(),
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols], "zeros")
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidTensor("ragged rows".into()));
        }
        Self::new(r, c, rows.concat(), "")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every element compares equal bit for bit.
    pub fn bit_eq(&self, other: &WeightTensor) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Non-negative input vector (post-ReLU activations).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationVector {
    data: Vec<f64>,
}

impl ActivationVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidTensor(format!(
                "activation {i} is {v}; activations must be finite and >= 0"
            )));
        }
        Ok(Self { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}
