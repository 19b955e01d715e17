use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, FEATURE_NAMES, FEATURE_ORDER_VERSION};
use super::train::ClassWeight;
use crate::error::{Error, Result};
use crate::solvers::SolverKind;

/// Model file format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Go to `left` iff `f[feature_index] <= threshold`.
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// 0 = EIG, 1 = ALS.
        label: u8,
        /// Training samples reaching the leaf, per class.
        class_counts: [u64; 2],
    },
}

/// Hyperparameters the model was fit with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub max_depth: usize,
    pub class_weight: ClassWeight,
    pub cv_folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub max_depth: usize,
    pub train_accuracy: Option<f64>,
    pub cv_accuracy: Option<f64>,
    pub feature_order_version: u32,
    pub n_samples: usize,
    /// Training data held a single class; the tree is constant.
    pub single_class: bool,
}

/// Binary classification tree over [`FeatureVector`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub version: u32,
    pub feature_order: Vec<String>,
    pub hyper: ModelHyper,
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    pub metadata: ModelMetadata,
}

impl DecisionTreeModel {
    /// Builds and validates a model from raw nodes.
    pub fn from_nodes(nodes: Vec<TreeNode>, root: usize, max_depth: usize) -> Result<Self> {
        let model = Self {
            version: MODEL_VERSION,
            feature_order: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            hyper: ModelHyper {
                max_depth,
                class_weight: ClassWeight::Uniform,
                cv_folds: 0,
                seed: 0,
            },
            nodes,
            root,
            metadata: ModelMetadata {
                max_depth,
                train_accuracy: None,
                cv_accuracy: None,
                feature_order_version: FEATURE_ORDER_VERSION,
                n_samples: 0,
                single_class: false,
            },
        };
        model.validate()?;
        Ok(model)
    }

    /// A single leaf predicting `kind` everywhere.
    pub fn constant(kind: SolverKind) -> Result<Self> {
        let label = kind
            .label()
            .ok_or_else(|| Error::InvalidArgument(format!("{kind} is not a selector class")))?;
        Self::from_nodes(
            vec![TreeNode::Leaf {
                label,
                class_counts: [0, 0],
            }],
            0,
            0,
        )
    }

    /// Root-to-leaf descent.
    pub fn predict(&self, f: &FeatureVector) -> Result<SolverKind> {
        if self.metadata.feature_order_version != FEATURE_ORDER_VERSION {
            return Err(Error::FeatureVersionMismatch {
                expected: FEATURE_ORDER_VERSION,
                found: self.metadata.feature_order_version,
            });
        }
        Ok(SolverKind::from_label(self.predict_label(f)).unwrap_or(SolverKind::Eig))
    }

    pub(crate) fn predict_label(&self, f: &FeatureVector) -> u8 {
        descend(&self.nodes, self.root, f)
    }

    /// Deepest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(self.root, 0)];
        while let Some((id, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let TreeNode::Split { left, right, .. } = self.nodes[id] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        deepest
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Structural checks: versions, feature names, a single rooted tree with
    /// in-range children, binary labels, and depth within `metadata.max_depth`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SchemaMismatch(msg));
        if self.version != MODEL_VERSION {
            return bad(format!(
                "model version {} (expected {MODEL_VERSION})",
                self.version
            ));
        }
        if self.metadata.feature_order_version != FEATURE_ORDER_VERSION {
            return bad(format!(
                "feature_order_version {} (expected {FEATURE_ORDER_VERSION})",
                self.metadata.feature_order_version
            ));
        }
        if self
            .feature_order
            .iter()
            .map(String::as_str)
            .ne(FEATURE_NAMES.iter().copied())
        {
            return bad(format!("feature_order {:?}", self.feature_order));
        }
        if self.root >= self.nodes.len() {
            return bad(format!(
                "root {} out of {} nodes",
                self.root,
                self.nodes.len()
            ));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            if id >= self.nodes.len() {
                return bad(format!("child {id} out of {} nodes", self.nodes.len()));
            }
            if std::mem::replace(&mut seen[id], true) {
                return bad(format!("node {id} reachable twice"));
            }
            if depth > self.metadata.max_depth {
                return bad(format!(
                    "path deeper than max_depth {}",
                    self.metadata.max_depth
                ));
            }
            match &self.nodes[id] {
                TreeNode::Leaf { label, .. } if *label > 1 => {
                    return bad(format!("leaf {id} has label {label}"));
                }
                TreeNode::Leaf { .. } => {}
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature_index >= FEATURE_NAMES.len() || !threshold.is_finite() {
                        return bad(format!(
                            "split {id} on feature {feature_index} at {threshold}"
                        ));
                    }
                    stack.push((*left, depth + 1));
                    stack.push((*right, depth + 1));
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return bad(format!("node {orphan} unreachable from root"));
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, shortest round-trip floats, trailing newline.
    pub fn to_json_string(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => {
                return Err(Error::SchemaMismatch(format!(
                    "model version {other:?} (expected {MODEL_VERSION})"
                )))
            }
        }
        let model: Self = serde_json::from_value(value)
            .map_err(|e| Error::SchemaMismatch(format!("malformed model: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

pub(crate) fn descend(nodes: &[TreeNode], root: usize, f: &FeatureVector) -> u8 {
    let mut id = root;
    loop {
        match &nodes[id] {
            TreeNode::Leaf { label, .. } => return *label,
            TreeNode::Split {
                feature_index,
                threshold,
                left,
                right,
            } => {
                id = if f.get(*feature_index) <= *threshold {
                    *left
                } else {
                    *right
                }
            }
        }
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DecisionTreeModel> {
    DecisionTreeModel::from_json_str(&fs::read_to_string(path)?)
}
