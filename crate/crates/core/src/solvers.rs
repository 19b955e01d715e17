//! Per-mode factor/core solvers.
//!
//! Each solver takes the current work tensor and a mode, and returns the
//! mode's factor (orthonormal columns) together with the work tensor shrunk
//! along that mode. EIG and ALS run entirely on the matricization-free
//! kernels; the SVD solver unfolds explicitly and exists as a reference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, ttm, ttm_transposed, ttt_mode};
use crate::linalg::{gemm, spd_inverse, sym_eig_top_r, thin_qr, thin_svd};
use crate::tensor::{random::fill, DenseMatrix, DenseTensor, Distribution};

/// Which solver produced a mode's factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SolverKind {
    Eig,
    Als,
    Svd,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Eig => "EIG",
            SolverKind::Als => "ALS",
            SolverKind::Svd => "SVD",
        }
    }

    /// Class label used by the selector: 0 = EIG, 1 = ALS.
    pub fn label(self) -> Option<u8> {
        match self {
            SolverKind::Eig => Some(0),
            SolverKind::Als => Some(1),
            SolverKind::Svd => None,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(SolverKind::Eig),
            1 => Some(SolverKind::Als),
            _ => None,
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Controls for the alternating least squares solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlsOptions {
    pub num_iters: usize,
    /// Stop early once `‖L_{k+1} − L_k‖_F / ‖L_k‖_F <= rel_tol`; 0 disables.
    pub rel_tol: f64,
    /// Seed for the standard-normal initial guess.
    pub seed: u64,
    /// Record `‖Y_(n) − L Rᵀ‖_F` after every iteration. Costs one full-size
    /// temporary per iteration, so it is off outside diagnostics.
    #[serde(default)]
    pub track_objective: bool,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            num_iters: 5,
            rel_tol: 0.0,
            seed: 0,
            track_objective: false,
        }
    }
}

impl AlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.num_iters == 0 {
            return Err(Error::InvalidArgument(
                "num_iters must be at least 1".into(),
            ));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Output of one per-mode solve.
#[derive(Debug, Clone)]
pub struct ModeResult {
    /// `I_n x R_n`, orthonormal columns.
    pub factor: DenseMatrix,
    /// Work tensor with dimension `R_n` at the solved mode.
    pub shrunk: DenseTensor,
    pub iterations_run: usize,
    pub solver_used: SolverKind,
    /// Retained eigenvalues (EIG) or squared singular values (SVD); empty for ALS.
    pub spectrum: Vec<f64>,
}

/// Output of [`als_iterate`].
#[derive(Debug, Clone)]
pub struct AlsOutput {
    /// `I_n x R_n` left factor.
    pub l: DenseMatrix,
    /// The right factor `R_k` tensorized: mode-`n` unfolding equals `R_kᵀ`.
    pub r: DenseTensor,
    pub iterations: usize,
    /// `‖Y_(n) − L_{k+1} R_kᵀ‖_F` per iteration when tracking is enabled.
    pub objective: Vec<f64>,
}

fn check_rank(y: &DenseTensor, mode: usize, rank: usize) -> Result<()> {
    y.check_mode(mode)?;
    let dim = y.dim(mode);
    if rank == 0 || rank > dim {
        return Err(Error::RankExceedsDim { mode, rank, dim });
    }
    Ok(())
}

/// Gram-matrix eigendecomposition solver.
pub fn eig_mode_solver(y: &DenseTensor, mode: usize, rank: usize) -> Result<ModeResult> {
    check_rank(y, mode, rank)?;
    let s = gram(y, mode)?;
    let eig = sym_eig_top_r(&s, rank)?;
    let shrunk = ttm_transposed(y, &eig.vectors, mode)?;
    Ok(ModeResult {
        factor: eig.vectors,
        shrunk,
        iterations_run: 0,
        solver_used: SolverKind::Eig,
        spectrum: eig.values,
    })
}

/// Seeded standard-normal `rows x cols` starting guess.
pub fn als_initial_guess(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::new(
        rows,
        cols,
        fill(&mut rng, rows * cols, Distribution::Normal),
    )
    .expect("positive shape")
}

fn residual_norm(y: &DenseTensor, r: &DenseTensor, l: &DenseMatrix, mode: usize) -> Result<f64> {
    let fit = ttm(r, l, mode)?;
    Ok(fit
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Alternating least squares fit `Y_(n) ≈ L R_kᵀ`.
///
/// One iteration is
/// `R_k = Y_(n)ᵀ L_k (L_kᵀ L_k)⁻¹` then `L_{k+1} = Y_(n) R_k (R_kᵀ R_k)⁻¹`,
/// with `Y_(n)ᵀ L_k` as a TTM and `Y_(n) R_k`, `R_kᵀ R_k` as TTTs. The normal
/// matrices are inverted through a Cholesky solve.
pub fn als_iterate(
    y: &DenseTensor,
    mode: usize,
    l0: &DenseMatrix,
    opts: &AlsOptions,
) -> Result<AlsOutput> {
    opts.validate()?;
    y.check_mode(mode)?;
    if l0.rows() != y.dim(mode) {
        return Err(Error::ShapeMismatch(format!(
            "initial guess has {} rows, mode {mode} has size {}",
            l0.rows(),
            y.dim(mode)
        )));
    }
    // R_k R_kᵀ has rank at most J_n, so it cannot be SPD when R_n > J_n.
    // Rounding sometimes lets Cholesky through anyway, so fail up front.
    if l0.cols() > y.complement_count(mode) {
        return Err(Error::NotSpd);
    }
    let mut l = l0.clone();
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut r_tensor = None;
    while iterations < opts.num_iters {
        // R_kᵀ as a tensor: (L_kᵀ L_k)⁻¹ Lᵀ Y_(n) along the mode.
        let p = ttm_transposed(y, &l, mode)?;
        let g_inv = spd_inverse(&gemm(&l, &l, true, false)?)?;
        let r_k = ttm(&p, &g_inv, mode)?;
        drop(p);

        let q = ttt_mode(y, &r_k, mode)?;
        let h_inv = spd_inverse(&gram(&r_k, mode)?)?;
        let l_next = gemm(&q, &h_inv, false, false)?;
        iterations += 1;

        if opts.track_objective {
            objective.push(residual_norm(y, &r_k, &l_next, mode)?);
        }
        let converged = opts.rel_tol > 0.0 && {
            let prev = l.frobenius_norm();
            let delta = l_next
                .data()
                .iter()
                .zip(l.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            delta <= opts.rel_tol * prev
        };
        l = l_next;
        r_tensor = Some(r_k);
        if converged {
            break;
        }
    }
    Ok(AlsOutput {
        l,
        r: r_tensor.expect("at least one iteration"),
        iterations,
        objective,
    })
}

/// ALS solver: fit, orthonormalize `L = Q̂ R̂`, then fold `R̂` into the core
/// so that `factor · shrunk_(n) = L R_kᵀ`.
pub fn als_mode_solver(
    y: &DenseTensor,
    mode: usize,
    rank: usize,
    opts: &AlsOptions,
) -> Result<ModeResult> {
    check_rank(y, mode, rank)?;
    let l0 = als_initial_guess(y.dim(mode), rank, opts.seed);
    let out = als_iterate(y, mode, &l0, opts)?;
    let qr = thin_qr(&out.l)?;
    let shrunk = ttm(&out.r, &qr.r, mode)?;
    Ok(ModeResult {
        factor: qr.q,
        shrunk,
        iterations_run: out.iterations,
        solver_used: SolverKind::Als,
        spectrum: Vec::new(),
    })
}

/// Truncated SVD of the explicit unfolding. Reference path only.
pub fn svd_mode_solver(y: &DenseTensor, mode: usize, rank: usize) -> Result<ModeResult> {
    check_rank(y, mode, rank)?;
    let m = y.matricize(mode)?;
    let (rows, cols) = (m.rows(), m.cols());
    // A wide-enough unfolding is needed for `rank` left singular vectors.
    let svd = if cols < rank {
        let mut padded = m.into_data();
        padded.resize(rows * rows, 0.0);
        thin_svd(&DenseMatrix::new(rows, rows, padded)?)?
    } else {
        thin_svd(&m)?
    };
    let mut factor = DenseMatrix::zeros(rows, rank);
    let mut core = DenseMatrix::zeros(rank, cols);
    for k in 0..rank {
        factor.col_mut(k).copy_from_slice(svd.u.col(k));
        for j in 0..cols {
            core.set(k, j, svd.sigma[k] * svd.vt.get(k, j));
        }
    }
    let mut dims = y.dims().to_vec();
    dims[mode] = rank;
    let shrunk = DenseTensor::tensorize(&core, &dims, mode)?;
    Ok(ModeResult {
        factor,
        shrunk,
        iterations_run: 0,
        solver_used: SolverKind::Svd,
        spectrum: svd.sigma[..rank].iter().map(|s| s * s).collect(),
    })
}

/// Dispatches to the solver named by `kind`.
pub fn solve_mode(
    kind: SolverKind,
    y: &DenseTensor,
    mode: usize,
    rank: usize,
    opts: &AlsOptions,
) -> Result<ModeResult> {
    match kind {
        SolverKind::Eig => eig_mode_solver(y, mode, rank),
        SolverKind::Als => als_mode_solver(y, mode, rank, opts),
        SolverKind::Svd => svd_mode_solver(y, mode, rank),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{random_tensor, synth_lowrank};

    fn rel_diff(a: &DenseTensor, b: &DenseTensor) -> f64 {
        let num: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        num / b.frobenius_norm()
    }

    #[test]
    fn eig_preserves_energy_of_exact_rank() {
        let y = synth_lowrank(&[12, 10, 8], &[3, 3, 3], 1).unwrap();
        let res = eig_mode_solver(&y, 0, 3).unwrap();
        assert!(
            (y.frobenius_norm() - res.shrunk.frobenius_norm()).abs() <= 1e-8 * y.frobenius_norm()
        );
        let retained: f64 = res.spectrum.iter().sum();
        assert!((res.shrunk.squared_norm() - retained).abs() <= 1e-8 * retained);
    }

    #[test]
    fn eig_full_rank_reconstructs() {
        let y = random_tensor(&[5, 4, 3], 2, Distribution::Uniform).unwrap();
        for n in 0..3 {
            let res = eig_mode_solver(&y, n, y.dim(n)).unwrap();
            assert!(res.factor.orthonormality_error() <= 1e-10);
            let back = ttm(&res.shrunk, &res.factor, n).unwrap();
            assert!(back.max_abs_diff(&y) <= 1e-10);
        }
    }

    #[test]
    fn rank_errors() {
        let y = random_tensor(&[3, 3], 2, Distribution::Uniform).unwrap();
        for kind in [SolverKind::Eig, SolverKind::Als, SolverKind::Svd] {
            let err = solve_mode(kind, &y, 0, 4, &AlsOptions::default()).unwrap_err();
            assert!(matches!(err, Error::RankExceedsDim { .. }), "{kind}: {err}");
        }
    }

    #[test]
    fn als_full_rank_identity_start() {
        let y = random_tensor(&[4, 3, 5], 3, Distribution::Normal).unwrap();
        let opts = AlsOptions {
            num_iters: 1,
            track_objective: true,
            ..Default::default()
        };
        let out = als_iterate(&y, 0, &DenseMatrix::identity(4), &opts).unwrap();
        let fit = ttm(&out.r, &out.l, 0).unwrap();
        assert!(fit.max_abs_diff(&y) <= 1e-12);
        assert!(out.objective[0] <= 1e-12 * y.frobenius_norm());
    }

    #[test]
    fn als_exact_rank_fits() {
        let y = synth_lowrank(&[10, 8, 9], &[3, 4, 2], 4).unwrap();
        let opts = AlsOptions {
            track_objective: true,
            ..Default::default()
        };
        for (n, &r) in [3, 4, 2].iter().enumerate() {
            let out = als_iterate(&y, n, &als_initial_guess(y.dim(n), r, 7), &opts).unwrap();
            assert_eq!(out.iterations, 5);
            assert!(*out.objective.last().unwrap() <= 1e-6 * y.frobenius_norm());
            let res = als_mode_solver(&y, n, r, &opts).unwrap();
            let back = ttm(&res.shrunk, &res.factor, n).unwrap();
            assert!(rel_diff(&back, &y) <= 1e-6);
        }
    }

    #[test]
    fn als_objective_monotone() {
        let y = random_tensor(&[8, 7, 6], 5, Distribution::Uniform).unwrap();
        let opts = AlsOptions {
            track_objective: true,
            ..Default::default()
        };
        for n in [1, 2] {
            let out = als_iterate(&y, n, &als_initial_guess(y.dim(n), 3, 1), &opts).unwrap();
            assert_eq!(out.objective.len(), 5);
            assert!(
                out.objective.windows(2).all(|w| w[1] <= w[0] + 1e-9),
                "{:?}",
                out.objective
            );
        }
    }

    #[test]
    fn als_rel_tol_stops_early() {
        let y = synth_lowrank(&[9, 8, 7], &[2, 2, 2], 6).unwrap();
        let opts = AlsOptions {
            num_iters: 50,
            rel_tol: 1e-10,
            ..Default::default()
        };
        let out = als_iterate(&y, 0, &als_initial_guess(9, 2, 3), &opts).unwrap();
        assert!(out.iterations < 50);
    }

    #[test]
    fn als_full_rank_mode_solver_exact() {
        let y = random_tensor(&[4, 5, 3], 8, Distribution::Uniform).unwrap();
        let res = als_mode_solver(&y, 2, 3, &AlsOptions::default()).unwrap();
        assert!(res.factor.orthonormality_error() <= 1e-10);
        let back = ttm(&res.shrunk, &res.factor, 2).unwrap();
        assert!(rel_diff(&back, &y) <= 1e-10);
    }

    #[test]
    fn als_seed_stability() {
        let y = random_tensor(&[10, 9, 8], 9, Distribution::Uniform).unwrap();
        let err = |seed| {
            let opts = AlsOptions {
                seed,
                num_iters: 100,
                ..Default::default()
            };
            let res = als_mode_solver(&y, 0, 4, &opts).unwrap();
            rel_diff(&ttm(&res.shrunk, &res.factor, 0).unwrap(), &y)
        };
        let (a, b) = (err(1), err(2));
        assert!((a - b).abs() <= 1e-3 * a.max(b), "{a} vs {b}");
    }

    #[test]
    fn als_rejects_rank_above_complement() {
        let y = random_tensor(&[4, 5], 213, Distribution::Normal).unwrap();
        let err = als_mode_solver(&y, 1, 5, &AlsOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotSpd), "{err}");
        assert!(als_mode_solver(&y, 1, 4, &AlsOptions::default()).is_ok());
    }

    #[test]
    fn als_rejects_degenerate_start() {
        let y = random_tensor(&[4, 3, 3], 1, Distribution::Uniform).unwrap();
        let l0 = DenseMatrix::zeros(4, 2);
        assert!(matches!(
            als_iterate(&y, 0, &l0, &AlsOptions::default()),
            Err(Error::NotSpd)
        ));
    }

    #[test]
    fn svd_diagonal_tensor() {
        let mut data = vec![0.0; 27];
        for (k, s) in [5.0, 3.0, 1.0].iter().enumerate() {
            data[k + 3 * k + 9 * k] = *s;
        }
        let y = DenseTensor::new(vec![3, 3, 3], data).unwrap();
        let res = svd_mode_solver(&y, 0, 2).unwrap();
        assert!(
            res.factor
                .max_abs_diff(&DenseMatrix::new(3, 2, vec![1., 0., 0., 0., 1., 0.]).unwrap())
                < 1e-14
        );
    }

    #[test]
    fn svd_full_rank_exact_and_matches_eig_norm() {
        let y = random_tensor(&[6, 5, 4], 10, Distribution::Uniform).unwrap();
        for n in 0..3 {
            let full = svd_mode_solver(&y, n, y.dim(n)).unwrap();
            let back = ttm(&full.shrunk, &full.factor, n).unwrap();
            assert!(rel_diff(&back, &y) <= 1e-12);
            let r = y.dim(n) - 1;
            let s = svd_mode_solver(&y, n, r).unwrap();
            let e = eig_mode_solver(&y, n, r).unwrap();
            assert!((s.shrunk.frobenius_norm() - e.shrunk.frobenius_norm()).abs() <= 1e-9);
        }
    }

    // Cosines of the principal angles between the two subspaces are the
    // singular values of U_eigᵀ U_svd; all of them are 1 for equal spans.
    #[test]
    fn eig_and_svd_span_the_same_subspace() {
        let y = random_tensor(&[6, 5, 4], 12, Distribution::Normal).unwrap();
        for n in 0..3 {
            let r = y.dim(n) - 1;
            let e = eig_mode_solver(&y, n, r).unwrap();
            let s = svd_mode_solver(&y, n, r).unwrap();
            let cross = crate::linalg::gemm(&e.factor, &s.factor, true, false).unwrap();
            let cosines = crate::linalg::thin_svd(&cross).unwrap().sigma;
            assert!(
                cosines.iter().all(|c| (c - 1.0).abs() <= 1e-8),
                "mode {n}: {cosines:?}"
            );
        }
    }

    #[test]
    fn svd_rank_above_complement() {
        let y = random_tensor(&[5, 2], 11, Distribution::Uniform).unwrap();
        let res = svd_mode_solver(&y, 0, 4).unwrap();
        assert!(res.factor.orthonormality_error() <= 1e-10);
        let back = ttm(&res.shrunk, &res.factor, 0).unwrap();
        assert!(rel_diff(&back, &y) <= 1e-12);
    }
}
