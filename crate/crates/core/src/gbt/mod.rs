//! From-scratch gradient-boosted regression trees with a second-order
//! regularized objective, quantile split candidates, learned missing-value
//! routing and grid-search tuning.

mod boost;
mod grid;
mod tree;

pub use boost::{
    fit_classifier, fit_ensemble, load_ensemble, save_ensemble, Classifier, Ensemble,
};
pub use grid::{grid_search, GridRanges, GridScore};
pub use tree::{
    find_best_split, fit_tree, quantile_candidates, FeatureMatrix, SplitEval, Tree, TreeNode,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("invalid boost config: {}", .0.join("; "))]
    BadConfig(Vec<String>),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
}

/// Boosting hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Shrinkage applied to every tree's contribution.
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum split gain.
    pub gamma: f64,
    /// Quantile candidate thresholds per feature; all value boundaries are
    /// used when a node has fewer distinct values than this.
    pub n_quantile_candidates: usize,
    /// Fraction of samples drawn (without replacement) per boosting round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_estimators: 300,
            max_depth: 5,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            n_quantile_candidates: 32,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    /// Checks every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), GbtError> {
        let mut errs = Vec::new();
        if self.n_estimators == 0 {
            errs.push("n_estimators must be >= 1".into());
        }
        if self.max_depth == 0 {
            errs.push("max_depth must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            errs.push(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if !(self.lambda >= 0.0) {
            errs.push(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma >= 0.0) {
            errs.push(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.n_quantile_candidates == 0 {
            errs.push("n_quantile_candidates must be >= 1".into());
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            errs.push(format!("subsample must be in (0, 1], got {}", self.subsample));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(GbtError::BadConfig(errs))
        }
    }
}
