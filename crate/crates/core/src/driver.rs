//! Mode-wise flexible st-HOSVD.
//!
//! Modes are processed in ascending order. At each mode the strategy picks a
//! solver from the current work-tensor shape, the solver returns the factor
//! and the shrunk work tensor, and the final work tensor is the core.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::ttm;
use crate::selector::{
    cost_als, cost_eig, extract_features, heuristic_choice, CostModelParams, DecisionTreeModel,
};
use crate::solvers::{solve_mode, AlsOptions, SolverKind};
use crate::tensor::{DenseMatrix, DenseTensor};

/// `X ≈ core x_1 U1 ... x_N UN`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerDecomposition {
    pub core: DenseTensor,
    /// Factor `n` is `I_n x R_n` with orthonormal columns.
    pub factors: Vec<DenseMatrix>,
    pub original_dims: Vec<usize>,
}

impl TuckerDecomposition {
    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn order(&self) -> usize {
        self.original_dims.len()
    }

    /// Shape consistency between core, factors, and `original_dims`.
    pub fn validate(&self) -> Result<()> {
        let n = self.original_dims.len();
        if self.core.order() != n || self.factors.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "order-{n} decomposition with an order-{} core and {} factors",
                self.core.order(),
                self.factors.len()
            )));
        }
        for (mode, f) in self.factors.iter().enumerate() {
            if f.rows() != self.original_dims[mode] || f.cols() != self.core.dim(mode) {
                return Err(Error::ShapeMismatch(format!(
                    "factor {mode} is {}x{}, expected {}x{}",
                    f.rows(),
                    f.cols(),
                    self.original_dims[mode],
                    self.core.dim(mode)
                )));
            }
        }
        Ok(())
    }

    /// Total number of stored values.
    pub fn stored_len(&self) -> usize {
        self.core.len() + self.factors.iter().map(|f| f.data().len()).sum::<usize>()
    }
}

/// How each mode's solver is chosen.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Trained decision tree over the current shape features.
    Adaptive(DecisionTreeModel),
    /// Cheaper solver under the flop-cost model.
    CostModel,
    FixedEig,
    FixedAls,
    FixedSvd,
    /// One explicit choice per mode.
    Manual(Vec<SolverKind>),
}

impl Strategy {
    /// Parses every non-adaptive strategy name: `costmodel`, `eig`, `als`,
    /// `svd`, or `manual:e,a,...`.
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        match lower.as_str() {
            "costmodel" | "cost" => Ok(Strategy::CostModel),
            "eig" => Ok(Strategy::FixedEig),
            "als" => Ok(Strategy::FixedAls),
            "svd" => Ok(Strategy::FixedSvd),
            "adaptive" => Err(Error::InvalidArgument(
                "the adaptive strategy needs a model".into(),
            )),
            s => match s.strip_prefix("manual:") {
                Some(list) => list
                    .split(',')
                    .map(|c| match c.trim() {
                        "e" | "eig" => Ok(SolverKind::Eig),
                        "a" | "als" => Ok(SolverKind::Als),
                        other => Err(Error::InvalidArgument(format!(
                            "unknown manual choice {other:?}"
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Strategy::Manual),
                None => Err(Error::InvalidArgument(format!("unknown strategy {name:?}"))),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Strategy::Adaptive(_) => "adaptive".into(),
            Strategy::CostModel => "costmodel".into(),
            Strategy::FixedEig => "eig".into(),
            Strategy::FixedAls => "als".into(),
            Strategy::FixedSvd => "svd".into(),
            Strategy::Manual(c) => {
                let letters: Vec<&str> = c
                    .iter()
                    .map(|k| match k {
                        SolverKind::Eig => "e",
                        SolverKind::Als => "a",
                        SolverKind::Svd => "s",
                    })
                    .collect();
                format!("manual:{}", letters.join(","))
            }
        }
    }

    /// All `2^order` manual assignments of EIG/ALS.
    pub fn all_manual(order: usize) -> Vec<Strategy> {
        (0..1usize << order)
            .map(|bits| {
                Strategy::Manual(
                    (0..order)
                        .map(|m| {
                            if bits >> m & 1 == 1 {
                                SolverKind::Als
                            } else {
                                SolverKind::Eig
                            }
                        })
                        .collect(),
                )
            })
            .collect()
    }

    fn choose(
        &self,
        mode: usize,
        i: usize,
        r: usize,
        j: usize,
        params: &CostModelParams,
    ) -> Result<SolverKind> {
        let chosen = match self {
            Strategy::Adaptive(model) => model.predict(&extract_features(i, r, j))?,
            Strategy::CostModel => heuristic_choice(i, r, j, params),
            Strategy::FixedEig => return Ok(SolverKind::Eig),
            Strategy::FixedAls => return Ok(SolverKind::Als),
            Strategy::FixedSvd => return Ok(SolverKind::Svd),
            Strategy::Manual(c) => return Ok(c[mode]),
        };
        // ALS normal equations are singular when the rank exceeds the
        // complement size, so automatic strategies fall back to EIG there.
        if chosen == SolverKind::Als && r > j {
            return Ok(SolverKind::Eig);
        }
        Ok(chosen)
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

/// Per-mode trace of one st-HOSVD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: usize,
    pub solver_used: SolverKind,
    /// Seconds spent choosing the solver (feature extraction and prediction).
    pub selector_decision_time: f64,
    pub solver_time: f64,
    pub predicted_cost_eig: f64,
    pub predicted_cost_als: f64,
    pub dims_before: Vec<usize>,
    pub dims_after: Vec<usize>,
    pub iterations_run: usize,
    /// Seed of the ALS starting guess when ALS ran.
    pub als_seed: Option<u64>,
}

fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
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
    Ok(())
}

/// ALS seed used at `mode`.
pub fn mode_seed(base: u64, mode: usize) -> u64 {
    base.wrapping_add(mode as u64)
}

/// Sequentially truncated HOSVD with per-mode solver selection.
///
/// The input is borrowed for the first mode and never copied; each later
/// mode consumes the previous mode's shrunk tensor.
pub fn sthosvd(
    x: &DenseTensor,
    ranks: &[usize],
    strategy: &Strategy,
    opts: &AlsOptions,
) -> Result<(TuckerDecomposition, Vec<ModeReport>)> {
    check_ranks(x.dims(), ranks)?;
    opts.validate()?;
    if let Strategy::Manual(c) = strategy {
        if c.len() != x.order() {
            return Err(Error::InvalidArgument(format!(
                "manual strategy has {} choices for an order-{} tensor",
                c.len(),
                x.order()
            )));
        }
    }
    let params = CostModelParams {
        num_iters: opts.num_iters,
    };
    let mut work: Option<DenseTensor> = None;
    let mut factors = Vec::with_capacity(x.order());
    let mut reports = Vec::with_capacity(x.order());
    for (mode, &r) in ranks.iter().enumerate() {
        let y = work.as_ref().unwrap_or(x);
        let (i, j) = (y.dim(mode), y.complement_count(mode));

        let t = Instant::now();
        let kind = strategy
            .choose(mode, i, r, j, &params)
            .map_err(|e| e.at_mode(mode))?;
        let selector_decision_time = t.elapsed().as_secs_f64();

        let mode_opts = AlsOptions {
            seed: mode_seed(opts.seed, mode),
            ..*opts
        };
        let t = Instant::now();
        let res = solve_mode(kind, y, mode, r, &mode_opts).map_err(|e| e.at_mode(mode))?;
        let solver_time = t.elapsed().as_secs_f64();

        reports.push(ModeReport {
            mode,
            solver_used: kind,
            selector_decision_time,
            solver_time,
            predicted_cost_eig: cost_eig(i, r, j, &params),
            predicted_cost_als: cost_als(i, r, j, &params),
            dims_before: y.dims().to_vec(),
            dims_after: res.shrunk.dims().to_vec(),
            iterations_run: res.iterations_run,
            als_seed: (kind == SolverKind::Als).then_some(mode_opts.seed),
        });
        factors.push(res.factor);
        work = Some(res.shrunk);
    }
    let core = work.expect("tensors have at least one mode");
    Ok((
        TuckerDecomposition {
            core,
            factors,
            original_dims: x.dims().to_vec(),
        },
        reports,
    ))
}

/// `core x_1 U1 ... x_N UN`.
pub fn reconstruct(t: &TuckerDecomposition) -> Result<DenseTensor> {
    t.validate()?;
    let mut y = t.core.clone();
    for (mode, f) in t.factors.iter().enumerate() {
        y = ttm(&y, f, mode)?;
    }
    Ok(y)
}

/// `‖reconstruct(T) − X‖_F / ‖X‖_F`.
pub fn relative_error(x: &DenseTensor, t: &TuckerDecomposition) -> Result<f64> {
    if t.original_dims != x.dims() {
        return Err(Error::ShapeMismatch(format!(
            "decomposition of {:?} compared against a {:?} tensor",
            t.original_dims,
            x.dims()
        )));
    }
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNormInput);
    }
    let xh = reconstruct(t)?;
    let diff: f64 = xh
        .data()
        .iter()
        .zip(x.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}
