//! Per-mode solver selection: shape features, flop-cost model, and a CART
//! decision tree with its trainer and JSON persistence.

mod cost;
mod features;
mod train;
mod tree;

pub use cost::{
    cheaper, cost_als, cost_eig, f_eig, f_inv, f_qr, heuristic_choice, CostModelParams,
};
pub use features::{extract_features, FeatureVector, FEATURE_NAMES, FEATURE_ORDER_VERSION};
pub use train::{train, train_labeled, ClassWeight, TrainHyper};
pub use tree::{load_model, DecisionTreeModel, ModelMetadata, TreeNode, MODEL_VERSION};

use serde::{Deserialize, Serialize};

use crate::solvers::SolverKind;

/// Where a training sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub mode: usize,
    pub seed: u64,
}

/// One benchmarked mode: both solver times and the faster one as label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub time_eig: f64,
    pub time_als: f64,
    /// 0 = EIG, 1 = ALS.
    pub label: u8,
    /// Times within the tie band; the label is noise-dominated.
    pub tie: bool,
    pub provenance: Provenance,
}

impl TrainingSample {
    pub fn label_for(time_eig: f64, time_als: f64) -> u8 {
        u8::from(time_eig > time_als)
    }

    pub fn best_kind(&self) -> SolverKind {
        SolverKind::from_label(self.label).unwrap_or(SolverKind::Eig)
    }

    pub fn time_of(&self, kind: SolverKind) -> f64 {
        match kind {
            SolverKind::Als => self.time_als,
            _ => self.time_eig,
        }
    }

    /// Time of `kind` over the faster solver's time.
    pub fn regret(&self, kind: SolverKind) -> f64 {
        self.time_of(kind) / self.time_eig.min(self.time_als)
    }
}
