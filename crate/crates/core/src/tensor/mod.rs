//! Dense column-major tensors.
//!
//! Element `(i_1, .., i_N)` (zero-based) lives at flat index
//! `i_1 + I_1*i_2 + I_1*I_2*i_3 + ...`, so the first mode is contiguous.
//! Explicit matricization is provided here for the SVD reference path and
//! as a test oracle; the production kernels in [`crate::kernels`] never use it.

mod io;
mod matrix;
pub(crate) mod random;

pub use io::{read_dten, read_dten_from, write_dten, write_dten_to, DTEN_MAGIC, DTEN_VERSION};
pub use matrix::DenseMatrix;
pub use random::{random_tensor, synth_lowrank, Distribution};

use crate::error::{Error, Result};

/// N-th order dense tensor of `f64` in column-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Product of `dims`, or an error on overflow.
pub(crate) fn checked_numel(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidShape(format!("element count of {dims:?} overflows")))
}

pub(crate) fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidShape(
            "tensor order must be at least 1".into(),
        ));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidShape(format!("dimension {pos} is zero")));
    }
    checked_numel(dims).map(|_| ())
}

/// Formats a shape as `2x3x4`.
pub fn format_dims(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let numel = checked_numel(&dims)?;
        if data.len() != numel {
            return Err(Error::InvalidShape(format!(
                "shape {} needs {numel} entries, got {}",
                format_dims(&dims),
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        validate_dims(dims)?;
        let n = checked_numel(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; n],
        })
    }

    /// Reinterprets a matrix as an order-2 tensor (no copy).
    pub fn from_matrix(m: DenseMatrix) -> Self {
        let dims = vec![m.rows(), m.cols()];
        Self {
            dims,
            data: m.into_data(),
        }
    }

    /// Reinterprets an order-2 tensor as a matrix (no copy).
    pub fn into_matrix(self) -> Result<DenseMatrix> {
        if self.dims.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected an order-2 tensor, got order {}",
                self.dims.len()
            )));
        }
        DenseMatrix::new(self.dims[0], self.dims[1], self.data)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn byte_size(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }

    /// Flat offset of a zero-based multi-index. Panics on out-of-range input.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.order(), "index order mismatch");
        let mut stride = 1;
        let mut offset = 0;
        for (&i, &d) in index.iter().zip(&self.dims) {
            assert!(i < d, "index {i} out of bounds for dimension {d}");
            offset += i * stride;
            stride *= d;
        }
        offset
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.linear_index(index)]
    }

    /// Product of the dimensions before `mode` (the contiguous inner extent).
    pub fn inner_count(&self, mode: usize) -> usize {
        self.dims[..mode].iter().product()
    }

    /// Product of the dimensions after `mode`.
    pub fn outer_count(&self, mode: usize) -> usize {
        self.dims[mode + 1..].iter().product()
    }

    /// `J_n`: product of all dimensions except `mode`.
    pub fn complement_count(&self, mode: usize) -> usize {
        self.inner_count(mode) * self.outer_count(mode)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.dims, other.dims, "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Explicit mode-`n` matricization `Y_(n)` of shape `I_n x J_n`.
    ///
    /// Columns enumerate the remaining indices with lower modes varying
    /// fastest. Allocates a full copy of the tensor.
    pub fn matricize(&self, mode: usize) -> Result<DenseMatrix> {
        self.check_mode(mode)?;
        let axis = self.dims[mode];
        let inner = self.inner_count(mode);
        let outer = self.outer_count(mode);
        let cols = inner * outer;
        let mut out = vec![0.0; self.data.len()];
        for o in 0..outer {
            for i in 0..axis {
                let src = &self.data[inner * (i + axis * o)..inner * (i + axis * o + 1)];
                for (p, &v) in src.iter().enumerate() {
                    out[i + axis * (p + inner * o)] = v;
                }
            }
        }
        DenseMatrix::new(axis, cols, out)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn tensorize(m: &DenseMatrix, dims: &[usize], mode: usize) -> Result<DenseTensor> {
        validate_dims(dims)?;
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let axis = dims[mode];
        let inner: usize = dims[..mode].iter().product();
        let outer: usize = dims[mode + 1..].iter().product();
        if m.rows() != axis || m.cols() != inner * outer {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix cannot be tensorized to {} along mode {mode}",
                m.rows(),
                m.cols(),
                format_dims(dims)
            )));
        }
        let src = m.data();
        let mut data = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..axis {
                let dst = &mut data[inner * (i + axis * o)..inner * (i + axis * o + 1)];
                for (p, d) in dst.iter_mut().enumerate() {
                    *d = src[i + axis * (p + inner * o)];
                }
            }
        }
        DenseTensor::new(dims.to_vec(), data)
    }
}

/// Frobenius norm of a tensor.
pub fn frobenius_norm(x: &DenseTensor) -> f64 {
    x.frobenius_norm()
}
