use serde::{Deserialize, Serialize};

/// Bumped whenever the order or definition of the features changes.
pub const FEATURE_ORDER_VERSION: u32 = 1;

pub const FEATURE_NAMES: [&str; 10] = [
    "I", "R", "J", "I^2", "R^2", "I*R", "R^2/I", "R^2/J", "I/J", "R/J",
];

/// Shape features of one mode: `[I, R, J, I², R², IR, R²/I, R²/J, I/J, R/J]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; 10]);

impl FeatureVector {
    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn as_array(&self) -> &[f64; 10] {
        &self.0
    }

    /// Whether entries 4..10 agree with the ones recomputed from `I, R, J`.
    pub fn is_consistent(&self, rel_tol: f64) -> bool {
        let fresh = from_floats(self.0[0], self.0[1], self.0[2]);
        self.0.iter().zip(fresh.0.iter()).all(|(a, b)| {
            a.is_finite() && *a >= 0.0 && (a - b).abs() <= rel_tol * b.abs().max(f64::MIN_POSITIVE)
        })
    }
}

fn from_floats(i: f64, r: f64, j: f64) -> FeatureVector {
    FeatureVector([
        i,
        r,
        j,
        i * i,
        r * r,
        i * r,
        r * r / i,
        r * r / j,
        i / j,
        r / j,
    ])
}

/// Feature vector for a mode of size `i` truncated to `r` with `j` columns.
pub fn extract_features(i: usize, r: usize, j: usize) -> FeatureVector {
    from_floats(i as f64, r as f64, j as f64)
}
