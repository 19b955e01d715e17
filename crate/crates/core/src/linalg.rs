//! Dense matrix products and factorizations.
//!
//! GEMM goes through `matrixmultiply` with explicit strides so the tensor
//! kernels can hand it slabs of a flat buffer without copying. The symmetric
//! eigensolver, QR, SVD and Cholesky are delegated to `nalgebra`; this module
//! fixes the ordering and sign conventions the rest of the crate relies on.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::instrument;
use crate::tensor::DenseMatrix;

/// Strided read-only view of a matrix stored in a flat slice.
#[derive(Clone, Copy, Debug)]
pub(crate) struct View<'a> {
    data: &'a [f64],
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    pub(crate) fn col_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self {
            data,
            rows,
            cols,
            rs: 1,
            cs: rows as isize,
        }
    }

    pub(crate) fn of(m: &'a DenseMatrix) -> Self {
        Self::col_major(m.data(), m.rows(), m.cols())
    }

    pub(crate) fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }

    fn max_offset(&self) -> usize {
        (self.rows - 1) * self.rs as usize + (self.cols - 1) * self.cs as usize
    }
}

/// `C <- alpha * A * B + beta * C` with `C` contiguous column-major `a.rows x b.cols`.
pub(crate) fn gemm_view(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "inner dimensions disagree");
    assert!(m > 0 && n > 0 && k > 0);
    assert!(a.max_offset() < a.data.len());
    assert!(b.max_offset() < b.data.len());
    assert!(c.len() >= m * n);
    instrument::record_gemm(m, n, k);
    // SAFETY: bounds of all three operands were checked above; the views are
    // immutable borrows and `c` is a distinct mutable borrow.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// `op(A) * op(B)` where `op` optionally transposes.
pub fn gemm(a: &DenseMatrix, b: &DenseMatrix, trans_a: bool, trans_b: bool) -> Result<DenseMatrix> {
    let va = if trans_a {
        View::of(a).t()
    } else {
        View::of(a)
    };
    let vb = if trans_b {
        View::of(b).t()
    } else {
        View::of(b)
    };
    if va.cols != vb.rows {
        return Err(Error::ShapeMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            va.rows, va.cols, vb.rows, vb.cols
        )));
    }
    let mut c = vec![0.0; va.rows * vb.cols];
    gemm_view(1.0, va, vb, 0.0, &mut c);
    DenseMatrix::new(va.rows, vb.cols, c)
}

/// Leading eigenpairs of a symmetric matrix, values descending.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Thin QR factors with a nonnegative diagonal in `r`.
#[derive(Debug, Clone)]
pub struct QrPair {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Thin SVD `A = U diag(sigma) Vt`, sigma descending.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub vt: DenseMatrix,
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::new(m.nrows(), m.ncols(), m.as_slice().to_vec()).expect("nalgebra shape")
}

/// Index of the entry with the largest magnitude; first one wins ties.
fn dominant_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Flips `col` so its largest-magnitude entry is positive. Returns whether it flipped.
fn fix_sign(col: &mut [f64]) -> bool {
    if col[dominant_index(col)] < 0.0 {
        col.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

fn iteration_cap(n: usize) -> usize {
    1000 + 100 * n
}

/// The `r` algebraically largest eigenpairs of symmetric `s`.
///
/// The input is symmetrized as `(S + Sᵀ)/2` first. Each returned eigenvector
/// has its largest-magnitude component positive.
pub fn sym_eig_top_r(s: &DenseMatrix, r: usize) -> Result<EigPair> {
    if s.rows() != s.cols() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    if r == 0 || r > n {
        return Err(Error::RankTooLarge {
            requested: r,
            dim: n,
        });
    }
    if s.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("symmetric eigensolver"));
    }
    let mut sym = s.clone();
    sym.symmetrize();
    let eig = nalgebra::SymmetricEigen::try_new(to_na(&sym), f64::EPSILON, iteration_cap(n))
        .ok_or(Error::NoConvergence("symmetric eigensolver"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vectors = DenseMatrix::zeros(n, r);
    let mut values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = vectors.col_mut(dst);
        col.copy_from_slice(eig.eigenvectors.column(src).as_slice());
        fix_sign(col);
    }
    Ok(EigPair { values, vectors })
}

/// Householder thin QR of a tall matrix, normalized so `diag(R) >= 0`.
pub fn thin_qr(a: &DenseMatrix) -> Result<QrPair> {
    let (rows, cols) = (a.rows(), a.cols());
    if rows < cols {
        return Err(Error::ShapeMismatch(format!(
            "thin QR needs rows >= cols, got {rows}x{cols}"
        )));
    }
    let qr = to_na(a).qr();
    let mut q = from_na(&qr.q());
    let mut r = from_na(&qr.r());
    for j in 0..cols {
        if r.get(j, j) < 0.0 {
            q.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            for c in j..cols {
                r.set(j, c, -r.get(j, c));
            }
        }
        for i in (j + 1)..cols {
            r.set(i, j, 0.0);
        }
    }
    let scale = a.frobenius_norm();
    for j in 0..cols {
        let d = r.get(j, j);
        if !(d > 1e-12 * scale) {
            return Err(Error::RankDeficient { index: j, value: d });
        }
    }
    Ok(QrPair { q, r })
}

/// Thin SVD with singular values descending and the same sign rule as
/// [`sym_eig_top_r`] applied to the left singular vectors.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdTriple> {
    if a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("SVD"));
    }
    let k = a.rows().min(a.cols());
    // nalgebra's own default tolerance; a bare epsilon can stop the
    // bidiagonal iteration on a wrong answer without reporting failure.
    let svd = nalgebra::SVD::try_new(to_na(a), true, true, 5.0 * f64::EPSILON, iteration_cap(k))
        .ok_or(Error::NoConvergence("SVD"))?;
    let energy: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let total = a.frobenius_norm().powi(2);
    if (energy - total).abs() > 1e-8 * total {
        return Err(Error::NoConvergence("SVD"));
    }
    let u_na = svd.u.as_ref().ok_or(Error::NoConvergence("SVD"))?;
    let vt_na = svd.v_t.as_ref().ok_or(Error::NoConvergence("SVD"))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let mut u = DenseMatrix::zeros(a.rows(), k);
    let mut vt = DenseMatrix::zeros(k, a.cols());
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(svd.singular_values[src]);
        let col = u.col_mut(dst);
        col.copy_from_slice(u_na.column(src).as_slice());
        let flip = if fix_sign(col) { -1.0 } else { 1.0 };
        for j in 0..a.cols() {
            vt.set(dst, j, flip * vt_na[(src, j)]);
        }
    }
    Ok(SvdTriple { u, sigma, vt })
}

/// Solves `A X = B` for symmetric positive definite `A` via Cholesky.
pub fn spd_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != a.cols() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != a.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} system with {}-row right-hand side",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let chol = nalgebra::Cholesky::new(to_na(a)).ok_or(Error::NotSpd)?;
    let x = chol.solve(&to_na(b));
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSpd);
    }
    Ok(from_na(&x))
}

/// `A⁻¹` for SPD `A`, computed as a Cholesky solve against the identity.
pub fn spd_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let mut inv = spd_solve(a, &DenseMatrix::identity(a.rows()))?;
    inv.symmetrize();
    Ok(inv)
}
