//! N-dimensional tensor values and their on-disk container.
//!
//! The container is a fixed-layout binary file:
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 4         | magic `"GEVT"`                          |
//! | 4      | 1         | version, currently 1                    |
//! | 5      | 1         | dtype code: 1 = f32, 2 = u8, 3 = i64    |
//! | 6      | 1         | ndim, 1 through 4                       |
//! | 7      | 1         | reserved, written as 0                  |
//! | 8      | 8 * ndim  | dims, little-endian u64 each            |
//! | ...    | rest      | payload, row-major, little-endian       |
//!
//! Readers reject any file whose magic, version, dtype code, ndim, or payload
//! length disagrees with the header. Values round-trip bit-exactly, including
//! non-finite floats.

use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"GEVT";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
    I64,
}

impl Dtype {
    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::U8 => 2,
            Dtype::I64 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Dtype::F32),
            2 => Some(Dtype::U8),
            3 => Some(Dtype::I64),
            _ => None,
        }
    }

    pub fn elem_size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
            Dtype::I64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "float32",
            Dtype::U8 => "uint8",
            Dtype::I64 => "int64",
        }
    }
}

/// A dense tensor of one of the three storable dtypes.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F32(ArrayD<f32>),
    U8(ArrayD<u8>),
    I64(ArrayD<i64>),
}

impl Tensor {
    pub fn dtype(&self) -> Dtype {
        match self {
            Tensor::F32(_) => Dtype::F32,
            Tensor::U8(_) => Dtype::U8,
            Tensor::I64(_) => Dtype::I64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::F32(a) => a.shape(),
            Tensor::U8(a) => a.shape(),
            Tensor::I64(a) => a.shape(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gathers rows (axis 0 entries) in the given order. Indices may repeat.
    pub fn gather_rows(&self, indices: &[usize]) -> Tensor {
        match self {
            Tensor::F32(a) => Tensor::F32(a.select(ndarray::Axis(0), indices)),
            Tensor::U8(a) => Tensor::U8(a.select(ndarray::Axis(0), indices)),
            Tensor::I64(a) => Tensor::I64(a.select(ndarray::Axis(0), indices)),
        }
    }
}

fn payload_bytes(t: &Tensor) -> Vec<u8> {
    match t {
        Tensor::F32(a) => {
            let mut out = Vec::with_capacity(a.len() * 4);
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
        Tensor::U8(a) => a.iter().copied().collect(),
        Tensor::I64(a) => {
            let mut out = Vec::with_capacity(a.len() * 8);
            for v in a.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out
        }
    }
}

/// Serializes a tensor to its container bytes.
pub fn tensor_to_bytes(t: &Tensor, path_for_errors: &Path) -> Result<Vec<u8>> {
    let shape = t.shape();
    if shape.is_empty() || shape.len() > 4 {
        return Err(Error::BadNdim {
            path: path_for_errors.to_path_buf(),
            ndim: shape.len() as u8,
        });
    }
    let mut out = Vec::with_capacity(8 + 8 * shape.len() + t.len() * t.dtype().elem_size());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(t.dtype().code());
    out.push(shape.len() as u8);
    out.push(0);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&payload_bytes(t));
    Ok(out)
}

pub fn write_tensor_file(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = tensor_to_bytes(t, path)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses container bytes. `path` is used only for error messages.
pub fn tensor_from_bytes(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let err_len = |expected: u64| Error::PayloadLengthMismatch {
        path: path.to_path_buf(),
        expected,
        actual: bytes.len() as u64,
    };
    if bytes.len() < 8 {
        return Err(err_len(8));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version: bytes[4],
        });
    }
    let dtype = Dtype::from_code(bytes[5]).ok_or(Error::UnsupportedDtypeCode {
        path: path.to_path_buf(),
        code: bytes[5],
    })?;
    let ndim = bytes[6];
    if !(1..=4).contains(&ndim) {
        return Err(Error::BadNdim {
            path: path.to_path_buf(),
            ndim,
        });
    }
    let header_len = 8 + 8 * ndim as usize;
    if bytes.len() < header_len {
        return Err(err_len(header_len as u64));
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    let mut elem_count: u64 = 1;
    for i in 0..ndim as usize {
        let d = u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        elem_count = elem_count
            .checked_mul(d)
            .ok_or_else(|| err_len(u64::MAX))?;
        dims.push(d as usize);
    }
    let payload_len = elem_count
        .checked_mul(dtype.elem_size() as u64)
        .ok_or_else(|| err_len(u64::MAX))?;
    let expected_total = header_len as u64 + payload_len;
    if bytes.len() as u64 != expected_total {
        return Err(err_len(expected_total));
    }
    let payload = &bytes[header_len..];
    let shape = IxDyn(&dims);
    let tensor = match dtype {
        Dtype::F32 => {
            let vals: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::F32(ArrayD::from_shape_vec(shape, vals).expect("length checked"))
        }
        Dtype::U8 => Tensor::U8(ArrayD::from_shape_vec(shape, payload.to_vec()).expect("length checked")),
        Dtype::I64 => {
            let vals: Vec<i64> = payload
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Tensor::I64(ArrayD::from_shape_vec(shape, vals).expect("length checked"))
        }
    };
    Ok(tensor)
}

pub fn read_tensor_file(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    tensor_from_bytes(&bytes, path)
}
