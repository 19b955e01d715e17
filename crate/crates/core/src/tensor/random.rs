use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{checked_numel, validate_dims, DenseMatrix, DenseTensor};
use crate::error::{Error, Result};
use crate::{kernels, linalg};

/// Entry distribution for [`random_tensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distribution {
    /// Uniform on `[0, 1)`.
    #[default]
    Uniform,
    /// Standard normal.
    Normal,
}

pub(crate) fn fill(rng: &mut ChaCha8Rng, n: usize, dist: Distribution) -> Vec<f64> {
    match dist {
        Distribution::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        Distribution::Normal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

/// Seeded tensor with i.i.d. entries.
pub fn random_tensor(dims: &[usize], seed: u64, dist: Distribution) -> Result<DenseTensor> {
    validate_dims(dims)?;
    let n = checked_numel(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::new(dims.to_vec(), fill(&mut rng, n, dist))
}

/// `G x_1 U1 ... x_N UN` with a seeded normal core of shape `ranks` and seeded
/// factors with orthonormal columns, so the multilinear rank is at most `ranks`.
pub fn synth_lowrank(dims: &[usize], ranks: &[usize], seed: u64) -> Result<DenseTensor> {
    validate_dims(dims)?;
    if ranks.len() != dims.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (mode, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > d {
            return Err(Error::RankExceedsDim {
                mode,
                rank: r,
                dim: d,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core_len = checked_numel(ranks)?;
    let mut y = DenseTensor::new(
        ranks.to_vec(),
        fill(&mut rng, core_len, Distribution::Normal),
    )?;
    for (mode, (&r, &d)) in ranks.iter().zip(dims).enumerate() {
        let raw = DenseMatrix::new(d, r, fill(&mut rng, d * r, Distribution::Normal))?;
        let q = linalg::thin_qr(&raw)?.q;
        y = kernels::ttm(&y, &q, mode)?;
    }
    Ok(y)
}
