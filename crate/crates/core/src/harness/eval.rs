use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selector::{DecisionTreeModel, FeatureVector, TrainingSample};
use crate::solvers::SolverKind;

/// Seeded shuffle then split; the first `round(ratio * n)` items train.
pub fn split_samples<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (ratio * items.len() as f64).round() as usize;
    let pick = |ids: &[usize]| ids.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    /// Mean of `time(predicted) / time(best)`.
    pub mean_regret: f64,
    /// Nearest-rank 90th percentile of the regret.
    pub p90_regret: f64,
    pub predicted_eig: usize,
    pub predicted_als: usize,
}

pub fn evaluate_predictions(
    samples: &[TrainingSample],
    mut predict: impl FnMut(&FeatureVector) -> Result<SolverKind>,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut hits = 0;
    let mut regrets = Vec::with_capacity(samples.len());
    let mut predicted_eig = 0;
    for s in samples {
        let kind = predict(&s.features)?;
        if kind == SolverKind::Eig {
            predicted_eig += 1;
        }
        if kind == s.best_kind() {
            hits += 1;
        }
        regrets.push(s.regret(kind));
    }
    let n = samples.len();
    let mean_regret = regrets.iter().sum::<f64>() / n as f64;
    regrets.sort_by(f64::total_cmp);
    let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
    Ok(EvalReport {
        n,
        accuracy: hits as f64 / n as f64,
        mean_regret,
        p90_regret: regrets[rank - 1],
        predicted_eig,
        predicted_als: n - predicted_eig,
    })
}

pub fn evaluate_model(model: &DecisionTreeModel, samples: &[TrainingSample]) -> Result<EvalReport> {
    evaluate_predictions(samples, |f| model.predict(f))
}
