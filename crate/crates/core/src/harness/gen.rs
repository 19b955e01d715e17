use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{median, timed};
use crate::driver::mode_seed;
use crate::error::{Error, Result};
use crate::selector::{extract_features, Provenance, TrainingSample};
use crate::solvers::{als_mode_solver, eig_mode_solver, AlsOptions};
use crate::tensor::{checked_numel, random_tensor, DenseTensor, Distribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Stop once at least this many samples exist.
    pub sample_count: usize,
    /// Inclusive range for every mode size.
    pub dim_range: (usize, usize),
    /// Inclusive range for the tensor order.
    pub order_range: (usize, usize),
    pub seed: u64,
    /// Tensors larger than this many bytes are skipped.
    pub memory_cap: usize,
    /// Timed runs per solver; the median is recorded.
    pub repeats: usize,
    /// Run each solver once untimed before the timed runs.
    pub warmup: bool,
    /// Only `num_iters` and `rel_tol` are used; seeds derive from the tensor.
    pub als: AlsOptions,
    /// Relative time gap under which a sample is flagged as a tie.
    pub tie_band: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            sample_count: 1000,
            dim_range: (10, 200),
            order_range: (3, 3),
            seed: 0,
            memory_cap: 1 << 30,
            repeats: 3,
            warmup: true,
            als: AlsOptions::default(),
            tie_band: 0.05,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.dim_range;
        if lo < 1 || hi < lo {
            return Err(Error::InvalidArgument(format!("bad dim range {lo}:{hi}")));
        }
        let (olo, ohi) = self.order_range;
        if olo < 1 || ohi < olo {
            return Err(Error::InvalidArgument(format!(
                "bad order range {olo}:{ohi}"
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        self.als.validate()
    }
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub samples: Vec<TrainingSample>,
    /// Tensors that were benchmarked.
    pub tensors: usize,
    /// Tensors dropped by the memory cap or a solver failure.
    pub skipped: usize,
}

/// Truncation range for a mode of size `i`: `[10, i/2]`, reordered when
/// `i/2 < 10` and clamped to at least 1.
pub fn rank_bounds(i: usize) -> (usize, usize) {
    let half = (i / 2).max(1);
    (10.min(half), half)
}

struct Plan {
    dims: Vec<usize>,
    ranks: Vec<usize>,
    seed: u64,
}

fn draw_plan(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Plan {
    let order = rng.random_range(cfg.order_range.0..=cfg.order_range.1);
    let dims: Vec<usize> = (0..order)
        .map(|_| rng.random_range(cfg.dim_range.0..=cfg.dim_range.1))
        .collect();
    let ranks = dims
        .iter()
        .map(|&d| {
            let (lo, hi) = rank_bounds(d);
            rng.random_range(lo..=hi)
        })
        .collect();
    Plan {
        dims,
        ranks,
        seed: rng.random(),
    }
}

fn sweep(
    x: DenseTensor,
    plan: &Plan,
    cfg: &GenConfig,
    out: &mut Vec<TrainingSample>,
) -> Result<()> {
    let mut y = x;
    for (mode, &r) in plan.ranks.iter().enumerate() {
        let (i, j) = (y.dim(mode), y.complement_count(mode));
        let opts = AlsOptions {
            seed: mode_seed(plan.seed, mode),
            ..cfg.als
        };
        // Alternate the two solvers so slow drift affects both alike.
        if cfg.warmup {
            eig_mode_solver(&y, mode, r)?;
            als_mode_solver(&y, mode, r, &opts)?;
        }
        let mut te = Vec::with_capacity(cfg.repeats);
        let mut ta = Vec::with_capacity(cfg.repeats);
        let mut eig = None;
        let mut als = None;
        for _ in 0..cfg.repeats {
            let (e, t) = timed(|| eig_mode_solver(&y, mode, r));
            eig = Some(e?);
            te.push(t);
            let (a, t) = timed(|| als_mode_solver(&y, mode, r, &opts));
            als = Some(a?);
            ta.push(t);
        }
        let (time_eig, time_als) = (median(&te).max(1e-9), median(&ta).max(1e-9));
        let label = TrainingSample::label_for(time_eig, time_als);
        out.push(TrainingSample {
            features: extract_features(i, r, j),
            time_eig,
            time_als,
            label,
            tie: (time_eig - time_als).abs() < cfg.tie_band * time_eig.max(time_als),
            provenance: Provenance {
                dims: plan.dims.clone(),
                ranks: plan.ranks.clone(),
                mode,
                seed: plan.seed,
            },
        });
        let next = if label == 0 { eig } else { als };
        y = next.expect("repeats >= 1").shrunk;
    }
    Ok(())
}

/// Benchmarks both solvers on every mode of seeded random tensors until
/// `sample_count` samples exist. Each sweep continues with the faster
/// solver's output, so later modes see shrunk shapes.
pub fn generate_samples(cfg: &GenConfig) -> Result<GenOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.sample_count);
    let (mut tensors, mut skipped) = (0, 0);
    let max_attempts = 100 * cfg.sample_count + 1000;
    let mut attempts = 0;
    while samples.len() < cfg.sample_count && attempts < max_attempts {
        attempts += 1;
        let plan = draw_plan(&mut rng, cfg);
        let bytes = checked_numel(&plan.dims)
            .ok()
            .and_then(|n| n.checked_mul(8));
        if bytes.is_none_or(|b| b > cfg.memory_cap) {
            log::debug!("skipping {:?}: over the memory cap", plan.dims);
            skipped += 1;
            continue;
        }
        let x = random_tensor(&plan.dims, plan.seed, Distribution::Uniform)?;
        let before = samples.len();
        match sweep(x, &plan, cfg, &mut samples) {
            Ok(()) => tensors += 1,
            Err(e) => {
                log::warn!("skipping {:?} ranks {:?}: {e}", plan.dims, plan.ranks);
                samples.truncate(before);
                skipped += 1;
            }
        }
        log::debug!("{} samples from {tensors} tensors", samples.len());
    }
    Ok(GenOutput {
        samples,
        tensors,
        skipped,
    })
}
