//! Hyperparameter grid search for the boosted position regressor.
//!
//! Because boosting is sequential and the per-round subsample seed does not
//! depend on the total round count, a model with `n` trees is exactly the
//! `n`-tree prefix of a longer fit with the same depth, learning rate, and
//! seed. The search therefore fits one maximal model per (depth, learning
//! rate) pair and scores every requested tree-count prefix of it, which is
//! identical to fitting each grid cell separately.

use serde::{Deserialize, Serialize};

use super::boost::{fit_ensemble, Ensemble};
use super::{BoostConfig, GbtError};
use crate::geom::Point;

/// Candidate values for the three searched hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRanges {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

impl Default for GridRanges {
    fn default() -> Self {
        Self {
            n_estimators: vec![100, 300, 600],
            max_depth: vec![3, 5, 8],
            learning_rate: vec![0.05, 0.1, 0.3],
        }
    }
}

impl GridRanges {
    fn validate(&self) -> Result<(), GbtError> {
        let mut errs = Vec::new();
        if self.n_estimators.is_empty() {
            errs.push("n_estimators range is empty".into());
        }
        if self.max_depth.is_empty() {
            errs.push("max_depth range is empty".into());
        }
        if self.learning_rate.is_empty() {
            errs.push("learning_rate range is empty".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(GbtError::BadConfig(errs))
        }
    }
}

/// One evaluated grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridScore {
    pub config: BoostConfig,
    pub val_mse: f64,
}

fn mse_prefix_scores(
    ensemble: &Ensemble,
    rows: &[Vec<f64>],
    targets: &[Point],
    tree_counts: &[usize],
) -> Vec<f64> {
    let m = rows.len();
    let mut px = vec![ensemble.base_score[0]; m];
    let mut py = vec![ensemble.base_score[1]; m];
    let total = ensemble.trees[0].len();
    let mut scores = Vec::with_capacity(tree_counts.len());
    for t in 0..total {
        for (i, row) in rows.iter().enumerate() {
            px[i] += ensemble.config.learning_rate * ensemble.trees[0][t].predict_row(row);
            py[i] += ensemble.config.learning_rate * ensemble.trees[1][t].predict_row(row);
        }
        if tree_counts.contains(&(t + 1)) {
            let sse: f64 = targets
                .iter()
                .enumerate()
                .map(|(i, p)| (px[i] - p.x).powi(2) + (py[i] - p.y).powi(2))
                .sum();
            scores.push(sse / (2.0 * m as f64));
        }
    }
    scores
}

/// Exhaustive search over `ranges`, scored by squared position error on the
/// validation set (on the training set when validation is empty).
///
/// Returns the winning configuration and the full score table, one row per
/// cell in ascending (n_estimators, max_depth, learning_rate) order. Ties are
/// broken toward fewer trees, then shallower trees, then a smaller learning
/// rate.
pub fn grid_search(
    train_rows: &[Vec<f64>],
    train_targets: &[Point],
    val_rows: &[Vec<f64>],
    val_targets: &[Point],
    ranges: &GridRanges,
    base: &BoostConfig,
) -> Result<(BoostConfig, Vec<GridScore>), GbtError> {
    ranges.validate()?;
    let (score_rows, score_targets) = if val_rows.is_empty() {
        (train_rows, train_targets)
    } else {
        (val_rows, val_targets)
    };
    if score_rows.len() != score_targets.len() {
        return Err(GbtError::ShapeMismatch(format!(
            "{} scoring rows vs {} targets",
            score_rows.len(),
            score_targets.len()
        )));
    }

    let mut tree_counts = ranges.n_estimators.clone();
    tree_counts.sort_unstable();
    tree_counts.dedup();
    let mut depths = ranges.max_depth.clone();
    depths.sort_unstable();
    depths.dedup();
    let mut rates = ranges.learning_rate.clone();
    rates.sort_by(|a, b| a.total_cmp(b));
    rates.dedup();
    let max_trees = *tree_counts.last().expect("validated non-empty");

    let pairs: Vec<(usize, f64)> = depths
        .iter()
        .flat_map(|&d| rates.iter().map(move |&lr| (d, lr)))
        .collect();
    let fit_pair = |&(depth, lr): &(usize, f64)| -> Result<Vec<f64>, GbtError> {
        let cfg = BoostConfig {
            n_estimators: max_trees,
            max_depth: depth,
            learning_rate: lr,
            ..*base
        };
        let ensemble = fit_ensemble(train_rows, train_targets, &cfg)?;
        Ok(mse_prefix_scores(
            &ensemble,
            score_rows,
            score_targets,
            &tree_counts,
        ))
    };
    #[cfg(feature = "parallel")]
    let per_pair: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(fit_pair)
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let per_pair: Vec<Vec<f64>> = pairs
        .iter()
        .map(fit_pair)
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Vec::with_capacity(tree_counts.len() * pairs.len());
    for (ti, &trees) in tree_counts.iter().enumerate() {
        for (pi, &(depth, lr)) in pairs.iter().enumerate() {
            table.push(GridScore {
                config: BoostConfig {
                    n_estimators: trees,
                    max_depth: depth,
                    learning_rate: lr,
                    ..*base
                },
                val_mse: per_pair[pi][ti],
            });
        }
    }

    let mut best = 0;
    for (i, row) in table.iter().enumerate().skip(1) {
        if row.val_mse < table[best].val_mse {
            best = i;
        }
    }
    Ok((table[best].config, table))
}
