//! Run configuration: a TOML file describing one full experiment, overridable
//! by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cirsense_core::dataset::{CampaignConfig, FeatureParams, GridSpec, SplitSpec};
use cirsense_core::eval::{LinkCombo, ModelKind, SuiteOptions};
use cirsense_core::gbt::{BoostConfig, GridRanges};
use cirsense_core::nn::{Hyper, Task};
use cirsense_core::sim::{Scene, SweepConfig};

/// How the grid is partitioned into train and test bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Bins drawn into the training set when no explicit lists are given.
    pub n_train_bins: usize,
    pub val_fraction: f64,
    /// Explicit bin lists; both or neither must be present.
    pub train_bins: Option<Vec<usize>>,
    pub test_bins: Option<Vec<usize>>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_train_bins: 337,
            val_fraction: 0.3,
            train_bins: None,
            test_bins: None,
        }
    }
}

impl SplitConfig {
    pub fn resolve(&self, grid_len: usize, seed: u64) -> SplitSpec {
        match (&self.train_bins, &self.test_bins) {
            (Some(train), Some(test)) => SplitSpec {
                train_bins: train.clone(),
                test_bins: test.clone(),
                val_fraction: self.val_fraction,
                seed,
            },
            _ => SplitSpec::random(grid_len, self.n_train_bins, self.val_fraction, seed),
        }
    }
}

/// One experiment, end to end. Every field has a default, so an empty file
/// (or no file) describes the reference run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub grid: GridSpec,
    /// Guard against accidental grid edits: when set, `grid` must have
    /// exactly this many bins.
    pub expected_bins: Option<usize>,
    pub scene: Scene,
    pub sweep: SweepConfig,
    pub features: FeatureParams,
    /// Noise draws per (bin, hypothesis).
    pub augmentation: usize,
    pub split: SplitConfig,
    pub models: Vec<String>,
    pub combos: Vec<String>,
    pub tasks: Vec<String>,
    pub detect_hyper: Hyper,
    pub position_hyper: Hyper,
    pub gbt: BoostConfig,
    pub gbt_grid: GridRanges,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out_dir: PathBuf::from("cirsense-out"),
            grid: GridSpec::default(),
            expected_bins: Some(462),
            scene: Scene::default_deployment(),
            sweep: CampaignConfig::default().sweep,
            features: FeatureParams::default(),
            augmentation: 1,
            split: SplitConfig::default(),
            models: vec![
                "typea".into(),
                "typeb".into(),
                "typec".into(),
                "baseline".into(),
            ],
            combos: vec![
                "N2".into(),
                "N3".into(),
                "N4".into(),
                "N23".into(),
                "N24".into(),
                "N34".into(),
                "N234".into(),
            ],
            tasks: vec!["detect".into(), "position".into()],
            detect_hyper: Hyper::detect_default(0),
            position_hyper: Hyper::position_default(0),
            gbt: BoostConfig::default(),
            gbt_grid: GridRanges::default(),
        }
    }
}

/// A validated configuration with the string fields parsed.
#[derive(Clone, Debug)]
pub struct Validated {
    pub config: RunConfig,
    pub campaign: CampaignConfig,
    pub split: SplitSpec,
    pub models: Vec<ModelKind>,
    pub combos: Vec<LinkCombo>,
    pub tasks: Vec<Task>,
}

impl Validated {
    pub fn suite_options(&self) -> SuiteOptions {
        SuiteOptions {
            seed: self.config.seed,
            detect_hyper: self.config.detect_hyper,
            position_hyper: self.config.position_hyper,
            gbt_detect: self.config.gbt,
            gbt_base: self.config.gbt,
            gbt_grid: self.config.gbt_grid.clone(),
            gbt_skip_grid: false,
        }
    }
}

fn parse_task(s: &str) -> Option<Task> {
    match s.to_ascii_lowercase().as_str() {
        "detect" | "detection" => Some(Task::Detect),
        "position" | "positioning" | "localize" => Some(Task::Position),
        _ => None,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("parse {}: {e}", path.display()).replace('\n', " "))
    }

    /// Checks every invariant, returning the full violation list.
    pub fn validate(&self) -> Result<Validated, Vec<String>> {
        let mut errs = Vec::new();

        if let Err(mut e) = self.sweep.validate() {
            errs.append(&mut e);
        }
        if let Err(mut e) = self.scene.validate() {
            errs.append(&mut e);
        }
        if self.grid.n_cols == 0 || self.grid.n_rows == 0 {
            errs.push("grid must have at least one column and row".into());
        }
        if !(self.grid.cell_m > 0.0) {
            errs.push(format!("grid.cell_m must be > 0, got {}", self.grid.cell_m));
        }
        if let Some(expected) = self.expected_bins {
            let got = self.grid.n_cols * self.grid.n_rows;
            if got != expected {
                errs.push(format!(
                    "grid has {}x{} = {got} bins but expected_bins pins {expected}",
                    self.grid.n_cols, self.grid.n_rows
                ));
            }
        }
        if self.features.k_taps == 0 || self.features.k_taps > self.sweep.num_points {
            errs.push(format!(
                "features.k_taps must be in 1..={}, got {}",
                self.sweep.num_points, self.features.k_taps
            ));
        }
        if self.augmentation == 0 {
            errs.push("augmentation must be >= 1".into());
        }
        if self.scene.target.is_none() {
            errs.push("scene.target must be set (it is the body prototype)".into());
        }

        let grid_len = self.grid.n_cols * self.grid.n_rows;
        match (&self.split.train_bins, &self.split.test_bins) {
            (Some(_), None) | (None, Some(_)) => {
                errs.push("split.train_bins and split.test_bins must be given together".into());
            }
            _ => {}
        }
        if self.split.train_bins.is_none() {
            if self.split.n_train_bins == 0 || self.split.n_train_bins >= grid_len.max(1) {
                errs.push(format!(
                    "split.n_train_bins must be in 1..{grid_len}, got {}",
                    self.split.n_train_bins
                ));
            }
        }
        let split = self.split.resolve(grid_len, self.seed);
        if let Err(e) = split.validate() {
            errs.push(e.to_string());
        }

        let mut models = Vec::new();
        if self.models.is_empty() {
            errs.push("models list is empty".into());
        }
        for m in &self.models {
            match ModelKind::parse(m) {
                Some(k) => models.push(k),
                None => errs.push(format!("unknown model {m:?}")),
            }
        }
        let mut combos = Vec::new();
        if self.combos.is_empty() {
            errs.push("combos list is empty".into());
        }
        for c in &self.combos {
            match LinkCombo::parse(c) {
                Ok(k) => {
                    for &id in &k.receiver_ids {
                        if (id as usize - 2) >= self.scene.num_links() {
                            errs.push(format!(
                                "combo {} needs receiver {id} but the scene has {} receivers",
                                k.name,
                                self.scene.num_links()
                            ));
                        }
                    }
                    combos.push(k);
                }
                Err(e) => errs.push(e.to_string()),
            }
        }
        let mut tasks = Vec::new();
        if self.tasks.is_empty() {
            errs.push("tasks list is empty".into());
        }
        for t in &self.tasks {
            match parse_task(t) {
                Some(k) => tasks.push(k),
                None => errs.push(format!("unknown task {t:?} (detect | position)")),
            }
        }

        if let Err(e) = self.gbt.validate() {
            errs.push(e.to_string());
        }

        if !errs.is_empty() {
            return Err(errs);
        }
        Ok(Validated {
            config: self.clone(),
            campaign: CampaignConfig {
                sweep: self.sweep,
                features: self.features,
                augmentation: self.augmentation,
            },
            split,
            models,
            combos,
            tasks,
        })
    }
}
