//! Single regression trees: split search over quantile candidates and greedy
//! depth-first growth.
//!
//! The split gain is the second-order objective improvement
//! `gain = 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)] - gamma`
//! and leaves carry `w* = -G/(H+lambda)`. Samples whose split feature is NaN
//! follow a per-node default direction learned by trying both sides.

use super::{BoostConfig, GbtError};

/// Row-major `(n_samples, n_features)` matrix. NaN encodes a missing value.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_samples: usize,
    n_features: usize,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GbtError> {
        let n_features = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * n_features);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_features {
                return Err(GbtError::ShapeMismatch(format!(
                    "row {i} has {} features, expected {n_features}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            data,
            n_samples: rows.len(),
            n_features,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, sample: usize, feature: usize) -> f64 {
        self.data[sample * self.n_features + feature]
    }
}

/// One node of a fitted tree; `left == u32::MAX` marks a leaf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeNode {
    pub feature: u32,
    pub threshold: f64,
    pub default_left: bool,
    pub left: u32,
    pub right: u32,
    pub leaf_weight: f64,
}

pub(crate) const NO_CHILD: u32 = u32::MAX;

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.left == NO_CHILD
    }

    fn leaf(weight: f64) -> TreeNode {
        TreeNode {
            feature: 0,
            threshold: 0.0,
            default_left: true,
            left: NO_CHILD,
            right: NO_CHILD,
            leaf_weight: weight,
        }
    }
}

/// A fitted regression tree (arena layout, node 0 is the root).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Raw (unshrunk) prediction for one feature row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.is_leaf() {
                return node.leaf_weight;
            }
            let v = row[node.feature as usize];
            let go_left = if v.is_nan() { node.default_left } else { v < node.threshold };
            idx = if go_left { node.left as usize } else { node.right as usize };
        }
    }

    /// Length of the longest root-to-leaf path in splits.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            let n = &nodes[idx];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    /// Largest absolute leaf weight (0 for an empty tree).
    pub fn max_abs_leaf(&self) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.leaf_weight.abs())
            .fold(0.0, f64::max)
    }
}

/// A chosen split: threshold, its gain and where NaN samples go.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitEval {
    pub threshold: f64,
    pub gain: f64,
    pub default_left: bool,
}

/// Hessian-weighted percentile candidate thresholds for one feature column.
///
/// Candidates are midpoints between consecutive distinct finite values. When
/// the column has at most `k` such boundaries all of them are returned
/// (making the split search exhaustive); otherwise `k` boundaries closest to
/// the evenly spaced cumulative-hessian targets are kept.
pub fn quantile_candidates(values: &[f64], hessians: &[f64], k: usize) -> Vec<f64> {
    assert_eq!(values.len(), hessians.len(), "column/hessian length mismatch");
    let mut pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(hessians)
        .filter(|(v, _)| !v.is_nan())
        .map(|(&v, &h)| (v, h))
        .collect();
    if pairs.len() < 2 {
        return Vec::new();
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // boundaries between distinct values, with the cumulative hessian mass
    // strictly below each boundary
    let total: f64 = pairs.iter().map(|(_, h)| h).sum();
    let mut boundaries: Vec<(f64, f64)> = Vec::new();
    let mut cum = 0.0;
    for w in pairs.windows(2) {
        cum += w[0].1;
        if w[1].0 > w[0].0 {
            boundaries.push(((w[0].0 + w[1].0) / 2.0, cum));
        }
    }
    if boundaries.len() <= k {
        return boundaries.into_iter().map(|(t, _)| t).collect();
    }

    // pick the boundary nearest each evenly spaced hessian-mass target
    let mut picked = Vec::with_capacity(k);
    let mut bi = 0usize;
    for j in 1..=k {
        let target = total * j as f64 / (k + 1) as f64;
        while bi + 1 < boundaries.len()
            && (boundaries[bi + 1].1 - target).abs() <= (boundaries[bi].1 - target).abs()
        {
            bi += 1;
        }
        if picked.last() != Some(&boundaries[bi].0) {
            picked.push(boundaries[bi].0);
        }
    }
    picked
}

/// Evaluates every candidate threshold over one feature column and returns
/// the best positive-gain split, or `None`.
///
/// NaN-valued samples are routed to whichever side yields the higher gain;
/// the winning direction is recorded as the split's default.
pub fn find_best_split(
    gradients: &[f64],
    hessians: &[f64],
    column: &[f64],
    candidates: &[f64],
    lambda: f64,
    gamma: f64,
) -> Option<SplitEval> {
    assert_eq!(gradients.len(), hessians.len());
    assert_eq!(gradients.len(), column.len());
    if gradients.len() < 2 || candidates.is_empty() {
        return None;
    }

    let mut sorted: Vec<(f64, f64, f64)> = Vec::with_capacity(column.len());
    let (mut g_miss, mut h_miss) = (0.0, 0.0);
    let (mut g_total, mut h_total) = (0.0, 0.0);
    for ((&v, &g), &h) in column.iter().zip(gradients).zip(hessians) {
        g_total += g;
        h_total += h;
        if v.is_nan() {
            g_miss += g;
            h_miss += h;
        } else {
            sorted.push((v, g, h));
        }
    }
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let parent = g_total * g_total / (h_total + lambda);
    let side = |g: f64, h: f64| g * g / (h + lambda);

    let mut best: Option<SplitEval> = None;
    let (mut g_left, mut h_left) = (0.0, 0.0);
    let mut si = 0usize;
    for &threshold in candidates {
        while si < sorted.len() && sorted[si].0 < threshold {
            g_left += sorted[si].1;
            h_left += sorted[si].2;
            si += 1;
        }
        if si == 0 && h_miss == 0.0 {
            continue; // empty left side either way
        }
        // finite values below the threshold go left, the rest right; miss
        // mass tried on both sides
        for default_left in [true, false] {
            let (gl, hl) = if default_left {
                (g_left + g_miss, h_left + h_miss)
            } else {
                (g_left, h_left)
            };
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl <= 0.0 || hr <= 0.0 {
                continue;
            }
            let gain = 0.5 * (side(gl, hl) + side(gr, hr) - parent) - gamma;
            if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                best = Some(SplitEval {
                    threshold,
                    gain,
                    default_left,
                });
            }
            if h_miss == 0.0 {
                break; // both directions identical without missing mass
            }
        }
    }
    best
}

struct TreeBuilder<'a> {
    gradients: &'a [f64],
    hessians: &'a [f64],
    features: &'a FeatureMatrix,
    cfg: &'a BoostConfig,
    nodes: Vec<TreeNode>,
    // scratch, reused across nodes
    col: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
}

impl TreeBuilder<'_> {
    fn leaf_weight(&self, samples: &[u32]) -> f64 {
        let g: f64 = samples.iter().map(|&i| self.gradients[i as usize]).sum();
        let h: f64 = samples.iter().map(|&i| self.hessians[i as usize]).sum();
        -g / (h + self.cfg.lambda)
    }

    fn grow(&mut self, samples: Vec<u32>, depth: usize) -> u32 {
        let idx = self.nodes.len() as u32;
        if depth >= self.cfg.max_depth || samples.len() < 2 {
            self.nodes.push(TreeNode::leaf(self.leaf_weight(&samples)));
            return idx;
        }

        self.g.clear();
        self.h.clear();
        for &i in &samples {
            self.g.push(self.gradients[i as usize]);
            self.h.push(self.hessians[i as usize]);
        }

        let mut best: Option<(usize, SplitEval)> = None;
        for f in 0..self.features.n_features() {
            self.col.clear();
            for &i in &samples {
                self.col.push(self.features.value(i as usize, f));
            }
            let candidates =
                quantile_candidates(&self.col, &self.h, self.cfg.n_quantile_candidates);
            if let Some(split) = find_best_split(
                &self.g,
                &self.h,
                &self.col,
                &candidates,
                self.cfg.lambda,
                self.cfg.gamma,
            ) {
                if best.as_ref().map_or(true, |(_, b)| split.gain > b.gain) {
                    best = Some((f, split));
                }
            }
        }

        let Some((feature, split)) = best else {
            self.nodes.push(TreeNode::leaf(self.leaf_weight(&samples)));
            return idx;
        };

        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in &samples {
            let v = self.features.value(i as usize, feature);
            let go_left = if v.is_nan() { split.default_left } else { v < split.threshold };
            if go_left {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        debug_assert!(!left.is_empty() && !right.is_empty(), "degenerate split");

        self.nodes.push(TreeNode {
            feature: feature as u32,
            threshold: split.threshold,
            default_left: split.default_left,
            left: NO_CHILD,
            right: NO_CHILD,
            leaf_weight: 0.0,
        });
        let left_idx = self.grow(left, depth + 1);
        let right_idx = self.grow(right, depth + 1);
        self.nodes[idx as usize].left = left_idx;
        self.nodes[idx as usize].right = right_idx;
        idx
    }
}

/// Grows one tree depth-first over `samples` (all samples if `None`).
pub fn fit_tree_on(
    gradients: &[f64],
    hessians: &[f64],
    features: &FeatureMatrix,
    cfg: &BoostConfig,
    samples: Option<&[u32]>,
) -> Tree {
    assert_eq!(gradients.len(), features.n_samples(), "gradient count mismatch");
    assert_eq!(hessians.len(), features.n_samples(), "hessian count mismatch");
    let all: Vec<u32>;
    let samples = match samples {
        Some(s) => s.to_vec(),
        None => {
            all = (0..features.n_samples() as u32).collect();
            all
        }
    };
    if samples.is_empty() {
        return Tree {
            nodes: vec![TreeNode::leaf(0.0)],
        };
    }
    let mut builder = TreeBuilder {
        gradients,
        hessians,
        features,
        cfg,
        nodes: Vec::new(),
        col: Vec::new(),
        g: Vec::new(),
        h: Vec::new(),
    };
    builder.grow(samples, 0);
    Tree {
        nodes: builder.nodes,
    }
}

/// Grows one tree over the full sample set.
pub fn fit_tree(gradients: &[f64], hessians: &[f64], features: &FeatureMatrix, cfg: &BoostConfig) -> Tree {
    fit_tree_on(gradients, hessians, features, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Exhaustive split search over every boundary midpoint, same tie-break
    /// discipline (first strictly better threshold wins).
    pub(crate) fn brute_force_split(
        gradients: &[f64],
        hessians: &[f64],
        column: &[f64],
        lambda: f64,
        gamma: f64,
    ) -> Option<SplitEval> {
        let mut vals: Vec<f64> = column.iter().copied().filter(|v| !v.is_nan()).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let candidates: Vec<f64> = vals.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        let mut best: Option<SplitEval> = None;
        for &t in &candidates {
            for default_left in [true, false] {
                let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
                for ((&v, &g), &h) in column.iter().zip(gradients).zip(hessians) {
                    let left = if v.is_nan() { default_left } else { v < t };
                    if left {
                        gl += g;
                        hl += h;
                    } else {
                        gr += g;
                        hr += h;
                    }
                }
                if hl <= 0.0 || hr <= 0.0 {
                    continue;
                }
                let gt = gl + gr;
                let ht = hl + hr;
                let gain = 0.5
                    * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                        - gt * gt / (ht + lambda))
                    - gamma;
                if gain > 0.0 && best.map_or(true, |b| gain > b.gain) {
                    best = Some(SplitEval { threshold: t, gain, default_left });
                }
            }
        }
        best
    }

    fn partition(column: &[f64], split: &SplitEval) -> Vec<bool> {
        column
            .iter()
            .map(|v| if v.is_nan() { split.default_left } else { *v < split.threshold })
            .collect()
    }

    #[test]
    fn hand_example_splits_the_step() {
        // y = [0,0,10,10], preds = 0 -> g = pred - y = [0,0,-10,-10], h = 1
        let g = [0.0, 0.0, -10.0, -10.0];
        let h = [1.0; 4];
        let x = [1.0, 2.0, 3.0, 4.0];
        let cands = quantile_candidates(&x, &h, 32);
        let split = find_best_split(&g, &h, &x, &cands, 0.0, 0.0).unwrap();
        assert!(split.threshold > 2.0 && split.threshold < 3.0);
        // gain = 1/2 [0 + 400/2 - 400/4] = 50
        assert!((split.gain - 50.0).abs() < 1e-12);
    }

    #[test]
    fn constant_gradient_gives_no_split() {
        let g = [1.0; 6];
        let h = [1.0; 6];
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let cands = quantile_candidates(&x, &h, 32);
        assert_eq!(find_best_split(&g, &h, &x, &cands, 0.0, 0.0), None);
    }

    #[test]
    fn huge_lambda_prunes_everything() {
        let g = [0.0, 0.0, -10.0, -10.0];
        let h = [1.0; 4];
        let x = [1.0, 2.0, 3.0, 4.0];
        let cands = quantile_candidates(&x, &h, 32);
        assert_eq!(find_best_split(&g, &h, &x, &cands, 1e18, 0.0), None);
    }

    #[test]
    fn gamma_subtracts_from_gain() {
        let g = [0.0, 0.0, -10.0, -10.0];
        let h = [1.0; 4];
        let x = [1.0, 2.0, 3.0, 4.0];
        let cands = quantile_candidates(&x, &h, 32);
        let split = find_best_split(&g, &h, &x, &cands, 0.0, 10.0).unwrap();
        assert!((split.gain - 40.0).abs() < 1e-12);
        assert_eq!(find_best_split(&g, &h, &x, &cands, 0.0, 50.0), None);
    }

    #[test]
    fn quantile_split_matches_brute_force() {
        let mut rng = crate::seed::rng(17);
        for case in 0..200 {
            let n = rng.random_range(2..=64);
            let distinct = rng.random_range(2..=n);
            let pool: Vec<f64> = (0..distinct).map(|_| rng.random::<f64>() * 10.0).collect();
            let x: Vec<f64> = (0..n).map(|_| pool[rng.random_range(0..distinct)]).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let h: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
            let lambda = rng.random::<f64>();
            // exhaustive candidates: k >= distinct boundaries
            let cands = quantile_candidates(&x, &h, 64);
            let fast = find_best_split(&g, &h, &x, &cands, lambda, 0.0);
            let brute = brute_force_split(&g, &h, &x, lambda, 0.0);
            match (fast, brute) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert!(
                        (a.gain - b.gain).abs() <= 1e-9 * b.gain.abs().max(1.0),
                        "case {case}: gain {} vs {}",
                        a.gain,
                        b.gain
                    );
                    assert_eq!(partition(&x, &a), partition(&x, &b), "case {case}");
                }
                (a, b) => panic!("case {case}: fast {a:?} vs brute {b:?}"),
            }
        }
    }

    #[test]
    fn missing_values_learn_a_default_direction() {
        // informative samples: low x -> g negative, high x -> g positive;
        // NaN samples share the high group's gradients so the learned
        // default must be right
        let x = [1.0, 1.5, 8.0, 9.0, f64::NAN, f64::NAN];
        let g = [-3.0, -3.0, 3.0, 3.0, 3.0, 3.0];
        let h = [1.0; 6];
        let cands = quantile_candidates(&x, &h, 32);
        let split = find_best_split(&g, &h, &x, &cands, 0.0, 0.0).unwrap();
        assert!(!split.default_left, "missing mass belongs with the right side");
        let brute = brute_force_split(&g, &h, &x, 0.0, 0.0).unwrap();
        assert_eq!(partition(&x, &split), partition(&x, &brute));
    }

    #[test]
    fn monotone_transform_preserves_partition() {
        let mut rng = crate::seed::rng(23);
        for _ in 0..50 {
            let n = rng.random_range(4..=40);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let h = vec![1.0; n];
            let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let ca = quantile_candidates(&x, &h, 8);
            let cb = quantile_candidates(&tx, &h, 8);
            let a = find_best_split(&g, &h, &x, &ca, 0.5, 0.0);
            let b = find_best_split(&g, &h, &tx, &cb, 0.5, 0.0);
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(partition(&x, &a), partition(&tx, &b));
                }
                (a, b) => panic!("transform changed splittability: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn single_leaf_weights() {
        let features = FeatureMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let cfg = BoostConfig { max_depth: 3, lambda: 0.0, ..BoostConfig::default() };
        let tree = fit_tree(&[-1.0, -1.0], &[1.0, 1.0], &features, &cfg);
        assert_eq!(tree.nodes.len(), 1);
        assert!((tree.nodes[0].leaf_weight - 1.0).abs() < 1e-12);

        let cfg = BoostConfig { lambda: 2.0, ..cfg };
        let tree = fit_tree(&[-1.0, -1.0], &[1.0, 1.0], &features, &cfg);
        assert!((tree.nodes[0].leaf_weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn depth_respects_max_depth() {
        let mut rng = crate::seed::rng(31);
        for max_depth in [1usize, 2, 4, 6] {
            let n = 64;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            let features = FeatureMatrix::from_rows(&rows).unwrap();
            let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let h = vec![1.0; n];
            let cfg = BoostConfig { max_depth, lambda: 0.1, ..BoostConfig::default() };
            let tree = fit_tree(&g, &h, &features, &cfg);
            assert!(tree.depth() <= max_depth);
            // every internal node has both children, leaves have none
            for node in &tree.nodes {
                assert_eq!(node.left == NO_CHILD, node.right == NO_CHILD);
            }
        }
    }

    #[test]
    fn candidate_count_is_bounded() {
        let mut rng = crate::seed::rng(5);
        let x: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let h = vec![1.0; 500];
        let cands = quantile_candidates(&x, &h, 32);
        assert!(cands.len() <= 32);
        assert!(cands.windows(2).all(|w| w[0] < w[1]));

        // few distinct values: every boundary kept
        let x = [1.0, 1.0, 2.0, 2.0, 3.0];
        let h = [1.0; 5];
        assert_eq!(quantile_candidates(&x, &h, 32), vec![1.5, 2.5]);
    }
}
