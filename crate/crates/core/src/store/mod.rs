//! Loading and saving tensors, activation vectors and reports.

pub mod container;
pub mod csv;
pub mod smet;

pub use container::{load_layout, load_quantized, save_layout, save_quantized};

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ActivationVector, WeightTensor};

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Decodes a 2-D SMET buffer into a tensor.
pub fn decode_tensor(bytes: &[u8], name: &str) -> Result<WeightTensor> {
    let arr = smet::decode(bytes)?;
    if arr.dims.len() != 2 {
        return Err(Error::format(7, format!("expected a 2-D tensor, found ndim {}", arr.dims.len())));
    }
    WeightTensor::new(arr.dims[0] as usize, arr.dims[1] as usize, arr.data, name)
}

pub fn encode_tensor(tensor: &WeightTensor) -> Result<Vec<u8>> {
    let dims = [dim_u32(tensor.rows())?, dim_u32(tensor.cols())?];
    Ok(smet::encode(&dims, tensor.data()))
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::Capacity(format!("dimension {d} exceeds u32")))
}

/// Loads a weight tensor from SMET, or from CSV when the extension is `.csv`.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<WeightTensor> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if is_csv(path) {
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::format(e.utf8_error().valid_up_to(), "CSV is not UTF-8"))?;
        let (rows, cols, data) = csv::parse(&text)?;
        return WeightTensor::new(rows, cols, data, stem(path));
    }
    decode_tensor(&bytes, &stem(path))
}

/// Saves as CSV when the extension is `.csv`, SMET otherwise.
pub fn save_tensor(tensor: &WeightTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        let text = csv::render(tensor.rows(), tensor.cols(), tensor.data());
        return write_bytes(path, text.as_bytes());
    }
    write_bytes(path, &encode_tensor(tensor)?)
}

/// Loads activations from a 1-D SMET array, a single-row or single-column
/// 2-D SMET array, or a single-row / single-column CSV.
pub fn load_activations(path: impl AsRef<Path>) -> Result<ActivationVector> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let (dims, data) = if is_csv(path) {
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::format(e.utf8_error().valid_up_to(), "CSV is not UTF-8"))?;
        let (r, c, d) = csv::parse(&text)?;
        (vec![r as u32, c as u32], d)
    } else {
        let arr = smet::decode(&bytes)?;
        (arr.dims, arr.data)
    };
    let is_vector = dims.len() == 1 || (dims.len() == 2 && (dims[0] == 1 || dims[1] == 1));
    if !is_vector {
        return Err(Error::Dimension(format!(
            "activation file {} has shape {dims:?}; expected a vector",
            path.display()
        )));
    }
    ActivationVector::new(data)
}

pub fn save_activations(act: &ActivationVector, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        return write_bytes(path, csv::render(1, act.len(), act.data()).as_bytes());
    }
    write_bytes(path, &smet::encode(&[dim_u32(act.len())?], act.data()))
}
