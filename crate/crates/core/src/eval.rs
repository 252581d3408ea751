//! Experiment harness: link combinations, the fingerprint baseline, metrics,
//! and the model-by-combo evaluation suite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{split_campaign, Dataset, DatasetError, Hypothesis, SensingSample, SplitSpec};
use crate::gbt::{
    fit_classifier, fit_ensemble, grid_search, BoostConfig, GbtError, GridRanges,
};
use crate::geom::Point;
use crate::nn::{train, Hyper, NetworkSpec, NnError, Task, TaskLabels, TrainData, Variant};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("bad link combination: {0}")]
    BadCombo(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("empty sample set: {0}")]
    EmptySet(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
}

/// Default receiver identifiers of the three-receiver deployment; the
/// transmitter is node 1.
pub const RECEIVER_IDS: [u8; 3] = [2, 3, 4];

/// A non-empty subset of the receivers whose links feed a model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkCombo {
    /// Sorted ascending, no duplicates, each in {2, 3, 4}.
    pub receiver_ids: Vec<u8>,
    /// "N" followed by the concatenated ids, e.g. "N24".
    pub name: String,
}

impl LinkCombo {
    pub fn new(ids: &[u8]) -> Result<Self, EvalError> {
        if ids.is_empty() {
            return Err(EvalError::BadCombo("no receivers given".into()));
        }
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != ids.len() {
            return Err(EvalError::BadCombo(format!("duplicate receiver in {ids:?}")));
        }
        for &id in &sorted {
            if !RECEIVER_IDS.contains(&id) {
                return Err(EvalError::BadCombo(format!(
                    "receiver {id} not in {RECEIVER_IDS:?}"
                )));
            }
        }
        let mut name = String::from("N");
        for &id in &sorted {
            name.push((b'0' + id) as char);
        }
        Ok(LinkCombo {
            receiver_ids: sorted,
            name,
        })
    }

    /// Parses a canonical name like "N24".
    pub fn parse(name: &str) -> Result<Self, EvalError> {
        let rest = name
            .strip_prefix('N')
            .ok_or_else(|| EvalError::BadCombo(format!("{name:?} does not start with 'N'")))?;
        if rest.is_empty() {
            return Err(EvalError::BadCombo("no receivers given".into()));
        }
        let mut ids = Vec::with_capacity(rest.len());
        for c in rest.chars() {
            let d = c
                .to_digit(10)
                .ok_or_else(|| EvalError::BadCombo(format!("bad receiver digit {c:?}")))?;
            ids.push(d as u8);
        }
        let combo = Self::new(&ids)?;
        if combo.name != name {
            return Err(EvalError::BadCombo(format!(
                "{name:?} is not canonical (expected {:?})",
                combo.name
            )));
        }
        Ok(combo)
    }

    /// All 7 non-empty subsets: singles, then pairs, then the full set.
    pub fn all() -> Vec<LinkCombo> {
        ["N2", "N3", "N4", "N23", "N24", "N34", "N234"]
            .iter()
            .map(|n| Self::parse(n).expect("canonical"))
            .collect()
    }

    /// Zero-based link indices into a sample's feature layout.
    pub fn link_indices(&self) -> Vec<usize> {
        self.receiver_ids.iter().map(|&id| id as usize - 2).collect()
    }

    /// Stable small integer for seed derivation: a bitmask of receiver ids.
    pub fn code(&self) -> u64 {
        self.receiver_ids.iter().fold(0, |m, &id| m | (1 << id))
    }
}

/// One point of an empirical error CDF.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error_m: f64,
    pub fraction: f64,
}

/// Fraction of decisions at threshold 0.5 matching the 0/1 labels.
pub fn detection_accuracy(probabilities: &[f64], labels: &[f64]) -> f64 {
    if probabilities.is_empty() {
        return f64::NAN;
    }
    let correct = probabilities
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5))
        .count();
    correct as f64 / probabilities.len() as f64
}

/// Mean Euclidean error and the empirical CDF over sorted errors.
pub fn position_error_stats(predictions: &[Point], truth: &[Point]) -> (f64, Vec<CdfPoint>) {
    let mut errors: Vec<f64> = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| ((p.x - t.x).powi(2) + (p.y - t.y).powi(2)).sqrt())
        .collect();
    errors.sort_by(|a, b| a.total_cmp(b));
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let cdf = errors
        .iter()
        .enumerate()
        .map(|(i, &e)| CdfPoint {
            error_m: e,
            fraction: (i + 1) as f64 / n as f64,
        })
        .collect();
    (mean, cdf)
}

/// Fingerprint database: flattened feature rows with their positions.
#[derive(Clone, Debug)]
pub struct FingerprintDb {
    rows: Vec<Vec<f64>>,
    positions: Vec<Point>,
    grid_indices: Vec<usize>,
    row_len: usize,
}

impl FingerprintDb {
    /// Builds the database from the target-present samples in `samples`,
    /// restricted to the combo's links.
    pub fn new(samples: &[SensingSample], combo: &LinkCombo) -> Result<Self, EvalError> {
        let links = combo.link_indices();
        let mut rows = Vec::new();
        let mut positions = Vec::new();
        let mut grid_indices = Vec::new();
        for s in samples {
            if s.hypothesis != Hypothesis::Target {
                continue;
            }
            let position = s.position_m.ok_or_else(|| {
                EvalError::LayoutMismatch("target sample without position".into())
            })?;
            let grid_index = s
                .grid_index
                .ok_or_else(|| EvalError::LayoutMismatch("target sample without grid index".into()))?;
            rows.push(restrict_sample(s, &links)?);
            positions.push(position);
            grid_indices.push(grid_index);
        }
        if rows.is_empty() {
            return Err(EvalError::EmptySet("no target samples for database".into()));
        }
        let row_len = rows[0].len();
        Ok(FingerprintDb {
            rows,
            positions,
            grid_indices,
            row_len,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Exact 1-nearest-neighbor under L2; distance ties go to the lowest grid
    /// index.
    pub fn predict(&self, query: &[f64]) -> Result<Point, EvalError> {
        if query.len() != self.row_len {
            return Err(EvalError::LayoutMismatch(format!(
                "query has {} values, database rows have {}",
                query.len(),
                self.row_len
            )));
        }
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            let d2: f64 = row
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 < best_d2 || (d2 == best_d2 && self.grid_indices[i] < self.grid_indices[best]) {
                best = i;
                best_d2 = d2;
            }
        }
        Ok(self.positions[best])
    }
}

/// 1-nearest-neighbor position lookup, the fingerprinting baseline.
pub fn baseline_predict(db: &FingerprintDb, query: &[f64]) -> Result<Point, EvalError> {
    db.predict(query)
}

fn restrict_sample(s: &SensingSample, links: &[usize]) -> Result<Vec<f64>, EvalError> {
    for &l in links {
        if l >= s.features.layout.num_links {
            return Err(EvalError::LayoutMismatch(format!(
                "link index {l} outside sample layout with {} links",
                s.features.layout.num_links
            )));
        }
    }
    Ok(s.features.restrict_links(links).values)
}

/// Models the suite can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TypeA,
    TypeB,
    TypeC,
    Baseline,
}

impl ModelKind {
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::TypeA => "typea",
            ModelKind::TypeB => "typeb",
            ModelKind::TypeC => "typec",
            ModelKind::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "typea" | "type-a" | "a" => Some(ModelKind::TypeA),
            "typeb" | "type-b" | "b" => Some(ModelKind::TypeB),
            "typec" | "type-c" | "c" => Some(ModelKind::TypeC),
            "baseline" | "1nn" | "knn" => Some(ModelKind::Baseline),
            _ => None,
        }
    }

    pub fn all() -> Vec<ModelKind> {
        vec![
            ModelKind::TypeA,
            ModelKind::TypeB,
            ModelKind::TypeC,
            ModelKind::Baseline,
        ]
    }

    fn code(self) -> u64 {
        match self {
            ModelKind::TypeA => 1,
            ModelKind::TypeB => 2,
            ModelKind::TypeC => 3,
            ModelKind::Baseline => 4,
        }
    }
}

/// Per-suite settings; the `seed` fields inside the hyperparameter templates
/// are replaced by a per-cell derived seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub detect_hyper: Hyper,
    pub position_hyper: Hyper,
    /// Boosted detector settings (no grid search on the detection task).
    pub gbt_detect: BoostConfig,
    /// Base settings shared by every grid cell of the boosted regressor.
    pub gbt_base: BoostConfig,
    pub gbt_grid: GridRanges,
    /// Skip the grid search and use `gbt_base` as-is (acceptance shortcut
    /// for detection-only suites; positioning normally searches).
    pub gbt_skip_grid: bool,
}

impl SuiteOptions {
    pub fn with_seed(seed: u64) -> Self {
        SuiteOptions {
            seed,
            detect_hyper: Hyper::detect_default(seed),
            position_hyper: Hyper::position_default(seed),
            gbt_detect: BoostConfig::default(),
            gbt_base: BoostConfig::default(),
            gbt_grid: GridRanges::default(),
            gbt_skip_grid: false,
        }
    }
}

/// Everything needed to re-run one suite invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub campaign: crate::dataset::CampaignConfig,
    pub grid: crate::dataset::GridSpec,
    pub dataset_seed: u64,
    pub split: SplitSpec,
    pub options: SuiteOptions,
}

/// Outcome of one (model, combo) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub combo: LinkCombo,
    pub task: Task,
    /// Detection only.
    pub accuracy: Option<f64>,
    /// Positioning only; this is the mean Euclidean error in meters.
    pub mean_error_m: Option<f64>,
    pub error_cdf: Vec<CdfPoint>,
    /// Seed this cell trained with.
    pub seed: u64,
    /// Winning boosted configuration when a grid search ran.
    pub chosen_gbt: Option<BoostConfig>,
    /// Set when the cell failed; the suite continues past failures.
    pub error: Option<String>,
    pub config: ConfigSnapshot,
}

impl EvalReport {
    fn failed(
        model: ModelKind,
        combo: &LinkCombo,
        task: Task,
        seed: u64,
        message: String,
        config: &ConfigSnapshot,
    ) -> Self {
        EvalReport {
            model_id: model.id().into(),
            combo: combo.clone(),
            task,
            accuracy: None,
            mean_error_m: None,
            error_cdf: Vec::new(),
            seed,
            chosen_gbt: None,
            error: Some(message),
            config: config.clone(),
        }
    }
}

fn detect_data(samples: &[SensingSample], links: &[usize]) -> Result<TrainData, EvalError> {
    let mut inputs = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        inputs.push(restrict_sample(s, links)?);
        labels.push(match s.hypothesis {
            Hypothesis::Null => 0.0,
            Hypothesis::Target => 1.0,
        });
    }
    Ok(TrainData {
        inputs,
        labels: TaskLabels::Detect(labels),
    })
}

fn position_data(samples: &[SensingSample], links: &[usize]) -> Result<TrainData, EvalError> {
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for s in samples {
        if s.hypothesis != Hypothesis::Target {
            continue;
        }
        let p = s
            .position_m
            .ok_or_else(|| EvalError::LayoutMismatch("target sample without position".into()))?;
        inputs.push(restrict_sample(s, links)?);
        labels.push(p);
    }
    Ok(TrainData {
        inputs,
        labels: TaskLabels::Position(labels),
    })
}

fn position_truth(data: &TrainData) -> Vec<Point> {
    match &data.labels {
        TaskLabels::Position(v) => v.clone(),
        TaskLabels::Detect(_) => unreachable!("position data carries position labels"),
    }
}

fn detect_truth(data: &TrainData) -> Vec<f64> {
    match &data.labels {
        TaskLabels::Detect(v) => v.clone(),
        TaskLabels::Position(_) => unreachable!("detect data carries detect labels"),
    }
}

struct Cell<'a> {
    model: ModelKind,
    combo: &'a LinkCombo,
    task: Task,
    seed: u64,
}

fn network_spec(model: ModelKind, links: usize, task: Task) -> NetworkSpec {
    let variant = match model {
        ModelKind::TypeA => Variant::TypeA,
        ModelKind::TypeB => Variant::TypeB,
        _ => unreachable!("only network models have specs"),
    };
    NetworkSpec::default_for(variant, links, task)
}

fn run_cell(
    cell: &Cell,
    split: &crate::dataset::SplitDataset,
    layout_channels_per_link: usize,
    k_taps: usize,
    opts: &SuiteOptions,
    config: &ConfigSnapshot,
) -> Result<EvalReport, EvalError> {
    let links = cell.combo.link_indices();
    let channels = links.len() * layout_channels_per_link;
    let mut report = EvalReport {
        model_id: cell.model.id().into(),
        combo: cell.combo.clone(),
        task: cell.task,
        accuracy: None,
        mean_error_m: None,
        error_cdf: Vec::new(),
        seed: cell.seed,
        chosen_gbt: None,
        error: None,
        config: config.clone(),
    };
    match (cell.task, cell.model) {
        (Task::Detect, ModelKind::TypeA | ModelKind::TypeB) => {
            let train_data = detect_data(&split.train, &links)?;
            let val_data = detect_data(&split.val, &links)?;
            let test_data = detect_data(&split.test, &links)?;
            let spec = network_spec(cell.model, links.len(), Task::Detect);
            let hyper = Hyper {
                seed: cell.seed,
                ..opts.detect_hyper
            };
            let model = train(spec, channels, k_taps, &train_data, &val_data, hyper)?;
            let probs = model.detect_probabilities(&test_data.inputs)?;
            report.accuracy = Some(detection_accuracy(&probs, &detect_truth(&test_data)));
        }
        (Task::Detect, ModelKind::TypeC) => {
            let train_data = detect_data(&split.train, &links)?;
            let val_data = detect_data(&split.val, &links)?;
            let test_data = detect_data(&split.test, &links)?;
            // boosted trees need no early-stopping split: train on train+val
            let mut labels = detect_truth(&train_data);
            labels.extend(detect_truth(&val_data));
            let mut rows = train_data.inputs;
            rows.extend(val_data.inputs);
            let cfg = BoostConfig {
                seed: cell.seed,
                ..opts.gbt_detect
            };
            let clf = fit_classifier(&rows, &labels, &cfg)?;
            let probs = clf.predict_proba(&test_data.inputs);
            report.accuracy = Some(detection_accuracy(&probs, &detect_truth(&test_data)));
        }
        (Task::Detect, ModelKind::Baseline) => {
            return Err(EvalError::EmptySet(
                "the fingerprint baseline has no detection rule".into(),
            ));
        }
        (Task::Position, ModelKind::TypeA | ModelKind::TypeB) => {
            let train_data = position_data(&split.train, &links)?;
            let val_data = position_data(&split.val, &links)?;
            let test_data = position_data(&split.test, &links)?;
            let spec = network_spec(cell.model, links.len(), Task::Position);
            let hyper = Hyper {
                seed: cell.seed,
                ..opts.position_hyper
            };
            let model = train(spec, channels, k_taps, &train_data, &val_data, hyper)?;
            let preds = model.predict_positions(&test_data.inputs)?;
            let (mean, cdf) = position_error_stats(&preds, &position_truth(&test_data));
            report.mean_error_m = Some(mean);
            report.error_cdf = cdf;
        }
        (Task::Position, ModelKind::TypeC) => {
            let train_data = position_data(&split.train, &links)?;
            let val_data = position_data(&split.val, &links)?;
            let test_data = position_data(&split.test, &links)?;
            let train_truth = position_truth(&train_data);
            let val_truth = position_truth(&val_data);
            let base = BoostConfig {
                seed: cell.seed,
                ..opts.gbt_base
            };
            let chosen = if opts.gbt_skip_grid {
                base
            } else {
                let (best, _) = grid_search(
                    &train_data.inputs,
                    &train_truth,
                    &val_data.inputs,
                    &val_truth,
                    &opts.gbt_grid,
                    &base,
                )?;
                best
            };
            // refit on train+val with the winning settings
            let mut rows = train_data.inputs;
            rows.extend(val_data.inputs);
            let mut truth = train_truth;
            truth.extend(val_truth);
            let ensemble = fit_ensemble(&rows, &truth, &chosen)?;
            let preds = ensemble.predict(&test_data.inputs);
            let (mean, cdf) = position_error_stats(&preds, &position_truth(&test_data));
            report.chosen_gbt = Some(chosen);
            report.mean_error_m = Some(mean);
            report.error_cdf = cdf;
        }
        (Task::Position, ModelKind::Baseline) => {
            // database = every target sample the models get to see
            let mut db_samples = split.train.clone();
            db_samples.extend(split.val.iter().cloned());
            let db = FingerprintDb::new(&db_samples, cell.combo)?;
            let test_data = position_data(&split.test, &links)?;
            let preds: Result<Vec<Point>, EvalError> =
                test_data.inputs.iter().map(|q| db.predict(q)).collect();
            let (mean, cdf) = position_error_stats(&preds?, &position_truth(&test_data));
            report.mean_error_m = Some(mean);
            report.error_cdf = cdf;
        }
    }
    Ok(report)
}

/// Runs every (model, combo) cell of one task over a split dataset.
///
/// Cells are seeded with `derive_seed(options.seed, [model, combo, task])`,
/// failures are recorded in the report's `error` field, and the report order
/// is models-outer, combos-inner regardless of execution order.
pub fn run_experiment_suite(
    dataset: &Dataset,
    split: &SplitSpec,
    task: Task,
    models: &[ModelKind],
    combos: &[LinkCombo],
    options: &SuiteOptions,
) -> Result<Vec<EvalReport>, EvalError> {
    let split_data = split_campaign(&dataset.samples, split)?;
    if split_data.train.is_empty() || split_data.test.is_empty() {
        return Err(EvalError::EmptySet("split has no train or test samples".into()));
    }
    let layout = split_data.train[0].features.layout;
    let config = ConfigSnapshot {
        campaign: dataset.campaign.clone(),
        grid: dataset.grid,
        dataset_seed: dataset.seed,
        split: split.clone(),
        options: options.clone(),
    };
    let cells: Vec<Cell> = models
        .iter()
        .flat_map(|&model| {
            combos.iter().map(move |combo| Cell {
                model,
                combo,
                task,
                seed: derive_seed(
                    options.seed,
                    &[model.code(), combo.code(), task as u64],
                ),
            })
        })
        .collect();
    let run = |cell: &Cell| -> EvalReport {
        run_cell(
            cell,
            &split_data,
            layout.channels_per_link,
            layout.k_taps,
            options,
            &config,
        )
        .unwrap_or_else(|e| {
            EvalReport::failed(cell.model, cell.combo, cell.task, cell.seed, e.to_string(), &config)
        })
    };
    #[cfg(feature = "parallel")]
    let reports: Vec<EvalReport> = {
        use rayon::prelude::*;
        cells.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let reports: Vec<EvalReport> = cells.iter().map(run).collect();
    Ok(reports)
}
