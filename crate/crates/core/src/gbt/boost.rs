//! Boosting: sequential tree fitting against gradient/hessian statistics,
//! one independent ensemble per output dimension, plus binary checkpoints.

use std::path::Path;

use super::tree::{fit_tree_on, FeatureMatrix, Tree, TreeNode};
use super::{BoostConfig, GbtError};
use crate::geom::Point;
use crate::io::{self, PayloadReader, PayloadWriter};
use crate::seed::{derive_seed, rng};

/// Position regressor: two boosted tree lists, one per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub config: BoostConfig,
    pub base_score: [f64; 2],
    pub trees: [Vec<Tree>; 2],
}

impl Ensemble {
    pub fn predict_row(&self, row: &[f64]) -> Point {
        let mut out = [0.0; 2];
        for (dim, o) in out.iter_mut().enumerate() {
            let mut acc = self.base_score[dim];
            for tree in &self.trees[dim] {
                acc += self.config.learning_rate * tree.predict_row(row);
            }
            *o = acc;
        }
        Point { x: out[0], y: out[1] }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<Point> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }

    /// `sum_t lr * max|leaf_t|` per output: the largest possible excursion
    /// from the base score.
    pub fn excursion_bound(&self, dim: usize) -> f64 {
        self.trees[dim]
            .iter()
            .map(|t| self.config.learning_rate * t.max_abs_leaf())
            .sum()
    }
}

fn subsample_indices(n: usize, fraction: f64, seed: u64) -> Vec<u32> {
    if fraction >= 1.0 {
        return (0..n as u32).collect();
    }
    use rand::seq::SliceRandom;
    let keep = ((fraction * n as f64).floor() as usize).max(1);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let mut r = rng(seed);
    idx.shuffle(&mut r);
    idx.truncate(keep);
    idx.sort_unstable();
    idx
}

/// Fits one squared-error boosted output: `g_i = pred_i - y_i`, `h_i = 1`.
fn fit_one_output(
    features: &FeatureMatrix,
    targets: &[f64],
    cfg: &BoostConfig,
    output_tag: u64,
) -> (f64, Vec<Tree>) {
    let n = targets.len();
    let base: f64 = targets.iter().sum::<f64>() / n as f64;
    let mut preds = vec![base; n];
    let hessians = vec![1.0; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for round in 0..cfg.n_estimators {
        let gradients: Vec<f64> = preds.iter().zip(targets).map(|(p, y)| p - y).collect();
        let sample = subsample_indices(
            n,
            cfg.subsample,
            derive_seed(cfg.seed, &[output_tag, round as u64]),
        );
        let tree = fit_tree_on(&gradients, &hessians, features, cfg, Some(&sample));
        for (i, p) in preds.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.predict_row(features.row(i));
        }
        trees.push(tree);
    }
    (base, trees)
}

/// Fits the two-coordinate position ensemble.
pub fn fit_ensemble(
    rows: &[Vec<f64>],
    targets: &[Point],
    cfg: &BoostConfig,
) -> Result<Ensemble, GbtError> {
    cfg.validate()?;
    if rows.len() != targets.len() {
        return Err(GbtError::ShapeMismatch(format!(
            "{} rows vs {} targets",
            rows.len(),
            targets.len()
        )));
    }
    if rows.is_empty() {
        return Err(GbtError::ShapeMismatch("empty training set".into()));
    }
    let features = FeatureMatrix::from_rows(rows)?;
    let xs: Vec<f64> = targets.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = targets.iter().map(|p| p.y).collect();
    let (bx, tx) = fit_one_output(&features, &xs, cfg, 0);
    let (by, ty) = fit_one_output(&features, &ys, cfg, 1);
    Ok(Ensemble {
        config: *cfg,
        base_score: [bx, by],
        trees: [tx, ty],
    })
}

/// Binary detector trained with logistic loss on 0/1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub config: BoostConfig,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl Classifier {
    /// Probability of the target hypothesis.
    pub fn predict_proba_row(&self, row: &[f64]) -> f64 {
        let mut raw = self.base_score;
        for tree in &self.trees {
            raw += self.config.learning_rate * tree.predict_row(row);
        }
        1.0 / (1.0 + (-raw).exp())
    }

    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_proba_row(r)).collect()
    }
}

/// Fits a logistic-loss detector: `g = p - y`, `h = p (1 - p)`.
pub fn fit_classifier(
    rows: &[Vec<f64>],
    labels: &[f64],
    cfg: &BoostConfig,
) -> Result<Classifier, GbtError> {
    cfg.validate()?;
    if rows.len() != labels.len() {
        return Err(GbtError::ShapeMismatch(format!(
            "{} rows vs {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.is_empty() {
        return Err(GbtError::ShapeMismatch("empty training set".into()));
    }
    let features = FeatureMatrix::from_rows(rows)?;
    let n = labels.len();
    let mean = labels.iter().sum::<f64>() / n as f64;
    let base = (mean.clamp(1e-6, 1.0 - 1e-6) / (1.0 - mean.clamp(1e-6, 1.0 - 1e-6))).ln();
    let mut raw = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for round in 0..cfg.n_estimators {
        let mut gradients = Vec::with_capacity(n);
        let mut hessians = Vec::with_capacity(n);
        for (r, y) in raw.iter().zip(labels) {
            let p = 1.0 / (1.0 + (-r).exp());
            gradients.push(p - y);
            hessians.push((p * (1.0 - p)).max(1e-12));
        }
        let sample = subsample_indices(n, cfg.subsample, derive_seed(cfg.seed, &[2, round as u64]));
        let tree = fit_tree_on(&gradients, &hessians, &features, cfg, Some(&sample));
        for (i, r) in raw.iter_mut().enumerate() {
            *r += cfg.learning_rate * tree.predict_row(features.row(i));
        }
        trees.push(tree);
    }
    Ok(Classifier {
        config: *cfg,
        base_score: base,
        trees,
    })
}

fn put_config(w: &mut PayloadWriter, cfg: &BoostConfig) {
    w.put_u64(cfg.n_estimators as u64);
    w.put_u64(cfg.max_depth as u64);
    w.put_f64(cfg.learning_rate);
    w.put_f64(cfg.lambda);
    w.put_f64(cfg.gamma);
    w.put_u64(cfg.n_quantile_candidates as u64);
    w.put_f64(cfg.subsample);
    w.put_u64(cfg.seed);
}

fn get_config(r: &mut PayloadReader) -> Result<BoostConfig, GbtError> {
    Ok(BoostConfig {
        n_estimators: r.get_u64()? as usize,
        max_depth: r.get_u64()? as usize,
        learning_rate: r.get_f64()?,
        lambda: r.get_f64()?,
        gamma: r.get_f64()?,
        n_quantile_candidates: r.get_u64()? as usize,
        subsample: r.get_f64()?,
        seed: r.get_u64()?,
    })
}

fn put_trees(w: &mut PayloadWriter, trees: &[Tree]) {
    w.put_u32(trees.len() as u32);
    for tree in trees {
        w.put_u32(tree.nodes.len() as u32);
        for n in &tree.nodes {
            w.put_u32(n.feature);
            w.put_f64(n.threshold);
            w.put_u8(n.default_left as u8);
            w.put_u32(n.left);
            w.put_u32(n.right);
            w.put_f64(n.leaf_weight);
        }
    }
}

fn get_trees(r: &mut PayloadReader) -> Result<Vec<Tree>, GbtError> {
    let n_trees = r.get_u32()? as usize;
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for _ in 0..n_trees {
        let n_nodes = r.get_u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 16));
        for _ in 0..n_nodes {
            nodes.push(TreeNode {
                feature: r.get_u32()?,
                threshold: r.get_f64()?,
                default_left: r.get_u8()? != 0,
                left: r.get_u32()?,
                right: r.get_u32()?,
                leaf_weight: r.get_f64()?,
            });
        }
        for (i, n) in nodes.iter().enumerate() {
            if !n.is_leaf() && (n.left as usize >= nodes.len() || n.right as usize >= nodes.len()) {
                return Err(r.malformed(format!("node {i} child out of range")).into());
            }
        }
        trees.push(Tree { nodes });
    }
    Ok(trees)
}

/// Writes a position ensemble as a framed `CIRG` file.
pub fn save_ensemble(path: &Path, ensemble: &Ensemble) -> Result<(), GbtError> {
    let mut w = PayloadWriter::new();
    w.put_u8(0); // squared-loss two-output kind
    put_config(&mut w, &ensemble.config);
    w.put_f64(ensemble.base_score[0]);
    w.put_f64(ensemble.base_score[1]);
    put_trees(&mut w, &ensemble.trees[0]);
    put_trees(&mut w, &ensemble.trees[1]);
    io::write_framed(path, io::GBT_MAGIC, &w.into_bytes())?;
    Ok(())
}

/// Reads back a `CIRG` file written by [`save_ensemble`].
pub fn load_ensemble(path: &Path) -> Result<Ensemble, GbtError> {
    let payload = io::read_framed(path, io::GBT_MAGIC)?;
    let mut r = PayloadReader::new(&payload);
    match r.get_u8()? {
        0 => {}
        k => return Err(r.malformed(format!("unknown ensemble kind {k}")).into()),
    }
    let config = get_config(&mut r)?;
    let base_score = [r.get_f64()?, r.get_f64()?];
    let trees = [get_trees(&mut r)?, get_trees(&mut r)?];
    r.finish().map_err(GbtError::Io)?;
    Ok(Ensemble {
        config,
        base_score,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy_rows(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Point>) {
        let mut rng = rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let targets: Vec<Point> = rows
            .iter()
            .map(|r| Point {
                x: r[0] * 2.0 + r[1],
                y: r[2] - 0.5 * r[3],
            })
            .collect();
        (rows, targets)
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let targets = vec![Point { x: 3.5, y: -1.25 }; 6];
        let cfg = BoostConfig { n_estimators: 10, ..BoostConfig::default() };
        let e = fit_ensemble(&rows, &targets, &cfg).unwrap();
        assert_eq!(e.base_score, [3.5, -1.25]);
        for p in e.predict(&rows) {
            assert!((p.x - 3.5).abs() < 1e-12 && (p.y + 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn memorizes_tiny_dataset() {
        let (rows, targets) = toy_rows(8, 40);
        let cfg = BoostConfig {
            n_estimators: 50,
            max_depth: 6,
            learning_rate: 1.0,
            lambda: 0.0,
            gamma: 0.0,
            ..BoostConfig::default()
        };
        let e = fit_ensemble(&rows, &targets, &cfg).unwrap();
        let mse: f64 = e
            .predict(&rows)
            .iter()
            .zip(&targets)
            .map(|(p, t)| ((p.x - t.x).powi(2) + (p.y - t.y).powi(2)) / 2.0)
            .sum::<f64>()
            / rows.len() as f64;
        assert!(mse <= 1e-6, "memorization MSE {mse}");
    }

    #[test]
    fn training_loss_is_monotone_without_subsampling() {
        let (rows, targets) = toy_rows(64, 41);
        let cfg = BoostConfig {
            n_estimators: 40,
            max_depth: 3,
            learning_rate: 0.3,
            ..BoostConfig::default()
        };
        let e = fit_ensemble(&rows, &targets, &cfg).unwrap();
        // replay boosting round by round per output
        for dim in 0..2 {
            let y: Vec<f64> = targets.iter().map(|p| if dim == 0 { p.x } else { p.y }).collect();
            let mut preds = vec![e.base_score[dim]; rows.len()];
            let mut last = f64::INFINITY;
            for tree in &e.trees[dim] {
                for (p, r) in preds.iter_mut().zip(&rows) {
                    *p += cfg.learning_rate * tree.predict_row(r);
                }
                let mse: f64 = preds
                    .iter()
                    .zip(&y)
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
                    / rows.len() as f64;
                assert!(mse <= last + 1e-12, "round increased loss: {mse} > {last}");
                last = mse;
            }
        }
    }

    #[test]
    fn predictions_stay_within_excursion_bound() {
        let (rows, targets) = toy_rows(64, 42);
        let cfg = BoostConfig { n_estimators: 30, ..BoostConfig::default() };
        let e = fit_ensemble(&rows, &targets, &cfg).unwrap();
        let coords: [(usize, fn(&Point) -> f64); 2] = [(0, |p| p.x), (1, |p| p.y)];
        for (dim, get) in coords {
            let bound = e.excursion_bound(dim);
            for r in &rows {
                let v = get(&e.predict_row(r));
                assert!((v - e.base_score[dim]).abs() <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let (rows, targets) = toy_rows(32, 43);
        let cfg = BoostConfig {
            n_estimators: 15,
            subsample: 0.7,
            seed: 99,
            ..BoostConfig::default()
        };
        let a = fit_ensemble(&rows, &targets, &cfg).unwrap();
        let b = fit_ensemble(&rows, &targets, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit_ensemble(&rows, &targets, &BoostConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn classifier_separates_labels() {
        let mut rng = rng(44);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let base = if i % 2 == 0 { -1.0 } else { 1.0 };
                vec![base + 0.1 * rng.random::<f64>(), rng.random::<f64>()]
            })
            .collect();
        let labels: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let cfg = BoostConfig { n_estimators: 20, max_depth: 2, ..BoostConfig::default() };
        let c = fit_classifier(&rows, &labels, &cfg).unwrap();
        let correct = c
            .predict_proba(&rows)
            .iter()
            .zip(&labels)
            .filter(|(p, &y)| (**p >= 0.5) == (y >= 0.5))
            .count();
        assert_eq!(correct, 40);
    }

    #[test]
    fn ensemble_round_trip() {
        let (rows, targets) = toy_rows(32, 45);
        let cfg = BoostConfig { n_estimators: 8, ..BoostConfig::default() };
        let e = fit_ensemble(&rows, &targets, &cfg).unwrap();
        let dir = std::env::temp_dir().join("cirsense-gbt-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("ensemble.cirg");
        save_ensemble(&p, &e).unwrap();
        let back = load_ensemble(&p).unwrap();
        assert_eq!(back, e);
        for r in &rows {
            assert_eq!(back.predict_row(r), e.predict_row(r));
        }
    }

    #[test]
    fn invalid_config_collects_all_errors() {
        let cfg = BoostConfig {
            n_estimators: 0,
            max_depth: 0,
            learning_rate: 0.0,
            lambda: -1.0,
            gamma: -1.0,
            n_quantile_candidates: 0,
            subsample: 0.0,
            seed: 0,
        };
        match cfg.validate() {
            Err(GbtError::BadConfig(errs)) => assert_eq!(errs.len(), 7),
            other => panic!("expected BadConfig, got {other:?}"),
        }
    }
}
