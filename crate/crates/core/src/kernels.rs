//! Matricization-free TTM, TTT and Gram kernels.
//!
//! Mode `n` splits the loops over a column-major tensor into an inner block
//! (modes before `n`, contiguous), the axis itself, and an outer block (modes
//! after `n`). Merging the inner and outer loops turns each operation into
//! GEMMs over the flat buffer:
//!
//! * first mode: one GEMM on the `I_1 x J_1` reinterpretation,
//! * last mode: one GEMM on the `P_N x I_N` reinterpretation,
//! * intermediate modes: one GEMM per outer index over contiguous
//!   `P_n x I_n` slabs, outermost index descending through the trailing modes.
//!
//! No matricized copy of the input is ever formed.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument;
use crate::linalg::{gemm_view, View};
use crate::tensor::{DenseMatrix, DenseTensor};

/// Loop partition around a splitting mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopSplit {
    /// `P_n`, product of the dimensions before the mode.
    pub inner: usize,
    /// `I_n`.
    pub axis: usize,
    /// `O_n`, product of the dimensions after the mode.
    pub outer: usize,
}

impl LoopSplit {
    pub fn new(dims: &[usize], mode: usize) -> Self {
        Self {
            inner: dims[..mode].iter().product(),
            axis: dims[mode],
            outer: dims[mode + 1..].iter().product(),
        }
    }

    /// Number of GEMM invocations a kernel issues for this split.
    pub fn gemm_count(&self, mode: usize, order: usize) -> usize {
        if mode == 0 || mode + 1 == order {
            1
        } else {
            self.outer
        }
    }
}

const BATCH_MIN_SLABS: usize = 4;
const BATCH_MAX_SLAB: usize = 1 << 16;

fn slab_pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let raw = std::env::var("ATUCKER_THREADS").ok()?;
        let threads: usize = match raw.trim().parse() {
            Ok(t) => t,
            Err(_) => {
                log::warn!("ignoring unparsable ATUCKER_THREADS={raw:?}");
                return None;
            }
        };
        if threads == 1 {
            return None;
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| log::warn!("could not build kernel thread pool: {e}"))
            .ok()
    })
    .as_ref()
}

fn out_dims(dims: &[usize], mode: usize, r: usize) -> Vec<usize> {
    let mut d = dims.to_vec();
    d[mode] = r;
    d
}

/// `X x_n U` with `U` of shape `R x I_n`.
pub fn ttm(x: &DenseTensor, u: &DenseMatrix, mode: usize) -> Result<DenseTensor> {
    ttm_view(x, View::of(u), mode)
}

/// `X x_n Uᵀ` with `U` of shape `I_n x R`, without forming the transpose.
pub fn ttm_transposed(x: &DenseTensor, u: &DenseMatrix, mode: usize) -> Result<DenseTensor> {
    ttm_view(x, View::of(u).t(), mode)
}

fn ttm_view(x: &DenseTensor, u: View<'_>, mode: usize) -> Result<DenseTensor> {
    x.check_mode(mode)?;
    let (r, i_n) = (u.rows, u.cols);
    let split = LoopSplit::new(x.dims(), mode);
    if i_n != split.axis {
        return Err(Error::ShapeMismatch(format!(
            "matrix with {i_n} columns applied to mode {mode} of size {}",
            split.axis
        )));
    }
    let dims = out_dims(x.dims(), mode, r);
    let len = split.inner * r * split.outer;
    instrument::record_alloc(len);
    let mut out = vec![0.0; len];
    let src = x.data();
    if mode == 0 {
        gemm_view(
            1.0,
            u,
            View::col_major(src, split.axis, split.outer),
            0.0,
            &mut out,
        );
    } else if mode + 1 == x.order() {
        gemm_view(
            1.0,
            View::col_major(src, split.inner, split.axis),
            u.t(),
            0.0,
            &mut out,
        );
    } else {
        let in_slab = split.inner * split.axis;
        let out_slab = split.inner * r;
        let batched = split.outer >= BATCH_MIN_SLABS && in_slab <= BATCH_MAX_SLAB;
        match slab_pool() {
            Some(pool) if batched => {
                // Counted here so totals do not depend on which thread runs a slab.
                for _ in 0..split.outer {
                    instrument::record_gemm(split.inner, r, split.axis);
                }
                pool.install(|| {
                    src.par_chunks(in_slab)
                        .zip(out.par_chunks_mut(out_slab))
                        .for_each(|(xs, ys)| {
                            gemm_view(
                                1.0,
                                View::col_major(xs, split.inner, split.axis),
                                u.t(),
                                0.0,
                                ys,
                            )
                        });
                });
            }
            _ => {
                for (xs, ys) in src.chunks(in_slab).zip(out.chunks_mut(out_slab)) {
                    gemm_view(
                        1.0,
                        View::col_major(xs, split.inner, split.axis),
                        u.t(),
                        0.0,
                        ys,
                    );
                }
            }
        }
    }
    DenseTensor::new(dims, out)
}

/// `Z = X_(n) Y_(n)ᵀ` of shape `I_n x R_n` for tensors agreeing off mode `n`.
pub fn ttt_mode(x: &DenseTensor, y: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    x.check_mode(mode)?;
    if x.order() != y.order()
        || x.dims()
            .iter()
            .zip(y.dims())
            .enumerate()
            .any(|(m, (a, b))| m != mode && a != b)
    {
        return Err(Error::ShapeMismatch(format!(
            "tensors {:?} and {:?} disagree outside mode {mode}",
            x.dims(),
            y.dims()
        )));
    }
    let sx = LoopSplit::new(x.dims(), mode);
    let r = y.dim(mode);
    instrument::record_alloc(sx.axis * r);
    let mut z = vec![0.0; sx.axis * r];
    if mode == 0 {
        let j = sx.outer;
        gemm_view(
            1.0,
            View::col_major(x.data(), sx.axis, j),
            View::col_major(y.data(), r, j).t(),
            0.0,
            &mut z,
        );
    } else if mode + 1 == x.order() {
        let p = sx.inner;
        gemm_view(
            1.0,
            View::col_major(x.data(), p, sx.axis).t(),
            View::col_major(y.data(), p, r),
            0.0,
            &mut z,
        );
    } else {
        let p = sx.inner;
        let x_slabs = x.data().chunks(p * sx.axis);
        let y_slabs = y.data().chunks(p * r);
        for (o, (xs, ys)) in x_slabs.zip(y_slabs).enumerate() {
            let beta = if o == 0 { 0.0 } else { 1.0 };
            gemm_view(
                1.0,
                View::col_major(xs, p, sx.axis).t(),
                View::col_major(ys, p, r),
                beta,
                &mut z,
            );
        }
    }
    DenseMatrix::new(sx.axis, r, z)
}

/// Mode-`n` Gram matrix `Y_(n) Y_(n)ᵀ`, symmetrized.
pub fn gram(x: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    let mut s = ttt_mode(x, x, mode)?;
    s.symmetrize();
    Ok(s)
}
