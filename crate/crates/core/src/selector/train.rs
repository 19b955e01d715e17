//! CART training with Gini impurity, grid search over depth and class
//! weighting, and stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, FEATURE_NAMES, FEATURE_ORDER_VERSION};
use super::tree::{descend, DecisionTreeModel, ModelHyper, ModelMetadata, TreeNode, MODEL_VERSION};
use super::TrainingSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    /// Weight each class by `n / (2 n_c)`.
    Balanced,
    /// Unweighted.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub max_depth_grid: Vec<usize>,
    pub class_weights: Vec<ClassWeight>,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            max_depth_grid: (1..=10).collect(),
            class_weights: vec![ClassWeight::Uniform, ClassWeight::Balanced],
            cv_folds: 5,
            seed: 0,
        }
    }
}

struct Data<'a> {
    x: &'a [FeatureVector],
    y: &'a [u8],
}

fn class_weights(y: &[u8], idx: &[usize], cw: ClassWeight) -> [f64; 2] {
    match cw {
        ClassWeight::Uniform => [1.0, 1.0],
        ClassWeight::Balanced => {
            let mut counts = [0usize; 2];
            for &i in idx {
                counts[y[i] as usize] += 1;
            }
            let n = idx.len() as f64;
            counts.map(|c| if c == 0 { 0.0 } else { n / (2.0 * c as f64) })
        }
    }
}

/// `W * gini` for weighted class masses `a`, `b`.
fn scaled_gini(a: f64, b: f64) -> f64 {
    let w = a + b;
    if w <= 0.0 {
        0.0
    } else {
        w - (a * a + b * b) / w
    }
}

struct Split {
    feature: usize,
    threshold: f64,
}

fn best_split(data: &Data<'_>, idx: &[usize], w: [f64; 2]) -> Option<Split> {
    let total: f64 = idx.iter().map(|&i| w[data.y[i] as usize]).sum();
    let tol = 1e-12 * total.max(1.0);
    let mut best: Option<(f64, Split)> = None;
    let mut order = idx.to_vec();
    for feature in 0..FEATURE_NAMES.len() {
        order.sort_by(|&a, &b| {
            data.x[a]
                .get(feature)
                .total_cmp(&data.x[b].get(feature))
                .then(a.cmp(&b))
        });
        let mut totals = [0.0; 2];
        for &i in &order {
            totals[data.y[i] as usize] += w[data.y[i] as usize];
        }
        let mut left = [0.0; 2];
        for pos in 0..order.len() - 1 {
            let c = data.y[order[pos]] as usize;
            left[c] += w[c];
            let (lo, hi) = (
                data.x[order[pos]].get(feature),
                data.x[order[pos + 1]].get(feature),
            );
            if lo >= hi {
                continue;
            }
            let score = scaled_gini(left[0], left[1])
                + scaled_gini(totals[0] - left[0], totals[1] - left[1]);
            if best.as_ref().is_none_or(|(b, _)| score < b - tol) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some((score, Split { feature, threshold }));
            }
        }
    }
    best.map(|(_, s)| s)
}

fn build(
    data: &Data<'_>,
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    w: [f64; 2],
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let mut counts = [0u64; 2];
    for &i in &idx {
        counts[data.y[i] as usize] += 1;
    }
    let mass = [counts[0] as f64 * w[0], counts[1] as f64 * w[1]];
    let label = u8::from(mass[1] > mass[0]);
    let id = nodes.len();
    nodes.push(TreeNode::Leaf {
        label,
        class_counts: counts,
    });
    if depth >= max_depth || idx.len() < 2 || counts.contains(&0) {
        return id;
    }
    let Some(split) = best_split(data, &idx, w) else {
        return id;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| data.x[i].get(split.feature) <= split.threshold);
    let left = build(data, l, depth + 1, max_depth, w, nodes);
    let right = build(data, r, depth + 1, max_depth, w, nodes);
    nodes[id] = TreeNode::Split {
        feature_index: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

fn fit(data: &Data<'_>, idx: &[usize], cw: ClassWeight, max_depth: usize) -> Vec<TreeNode> {
    let w = class_weights(data.y, idx, cw);
    let mut nodes = Vec::new();
    build(data, idx.to_vec(), 0, max_depth, w, &mut nodes);
    nodes
}

fn accuracy(nodes: &[TreeNode], data: &Data<'_>, idx: &[usize]) -> f64 {
    let hits = idx
        .iter()
        .filter(|&&i| descend(nodes, 0, &data.x[i]) == data.y[i])
        .count();
    hits as f64 / idx.len() as f64
}

/// Fold assignment stratified by class: each class is shuffled and dealt
/// round-robin, continuing the deal across classes.
fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

fn cv_score(data: &Data<'_>, folds: &[Vec<usize>], cw: ClassWeight, depth: usize) -> f64 {
    let n = data.y.len();
    let mut total = 0.0;
    for held in folds {
        let mut is_held = vec![false; n];
        for &i in held {
            is_held[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
        let nodes = fit(data, &train, cw, depth);
        total += accuracy(&nodes, data, held);
    }
    total / folds.len() as f64
}

/// Trains on benchmark samples; see [`train_labeled`].
pub fn train(samples: &[TrainingSample], hyper: &TrainHyper) -> Result<DecisionTreeModel> {
    let x: Vec<FeatureVector> = samples.iter().map(|s| s.features).collect();
    let y: Vec<u8> = samples.iter().map(|s| s.label).collect();
    train_labeled(&x, &y, hyper)
}

/// Grid search over `(max_depth, class_weight)` scored by mean stratified
/// k-fold accuracy, then a refit on all data with the winner. Ties prefer the
/// earlier grid point (shallower depth, then the order of `class_weights`).
///
/// Single-class data yields a constant tree with `metadata.single_class` set.
pub fn train_labeled(
    x: &[FeatureVector],
    y: &[u8],
    hyper: &TrainHyper,
) -> Result<DecisionTreeModel> {
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature vectors but {} labels",
            x.len(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
    }
    if let Some(bad) = x.iter().position(|f| f.0.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "sample {bad} has a non-finite feature"
        )));
    }
    if hyper.max_depth_grid.is_empty() || hyper.class_weights.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if hyper.cv_folds < 2 {
        return Err(Error::InvalidArgument("cv_folds must be at least 2".into()));
    }
    let data = Data { x, y };
    let all: Vec<usize> = (0..y.len()).collect();
    let ones = y.iter().filter(|&&l| l == 1).count();
    let single_class = ones == 0 || ones == y.len();

    let (depth, cw, cv_accuracy) = if single_class {
        log::warn!("training data holds a single class; returning a constant tree");
        (0, hyper.class_weights[0], None)
    } else {
        let k = hyper.cv_folds.min(y.len());
        let folds = stratified_folds(y, k, hyper.seed);
        let grid: Vec<(usize, ClassWeight)> = hyper
            .max_depth_grid
            .iter()
            .flat_map(|&d| hyper.class_weights.iter().map(move |&c| (d, c)))
            .collect();
        let scores: Vec<f64> = grid
            .par_iter()
            .map(|&(d, c)| cv_score(&data, &folds, c, d))
            .collect();
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        log::debug!(
            "cv grid scores: {:?}",
            grid.iter().zip(&scores).collect::<Vec<_>>()
        );
        (grid[best].0, grid[best].1, Some(scores[best]))
    };

    let nodes = fit(&data, &all, cw, depth);
    let train_accuracy = accuracy(&nodes, &data, &all);
    let model = DecisionTreeModel {
        version: MODEL_VERSION,
        feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        hyper: ModelHyper {
            max_depth: depth,
            class_weight: cw,
            cv_folds: hyper.cv_folds,
            seed: hyper.seed,
        },
        nodes,
        root: 0,
        metadata: ModelMetadata {
            max_depth: depth,
            train_accuracy: Some(train_accuracy),
            cv_accuracy,
            feature_order_version: FEATURE_ORDER_VERSION,
            n_samples: y.len(),
            single_class,
        },
    };
    model.validate()?;
    Ok(model)
}
