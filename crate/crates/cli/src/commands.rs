//! Subcommand implementations: simulate, train, eval, reproduce.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cirsense_core::dataset::{split_campaign, Dataset, SplitDataset};
use cirsense_core::eval::{
    detection_accuracy, position_error_stats, run_experiment_suite, ConfigSnapshot, EvalReport,
    LinkCombo, ModelKind, SuiteOptions,
};
use cirsense_core::gbt::{fit_ensemble, grid_search, load_ensemble, save_ensemble, BoostConfig};
use cirsense_core::nn::{
    load_model, save_model, train, Hyper, ModelMeta, NetworkSpec, Task, TaskLabels, TrainData,
    Variant,
};
use cirsense_core::report::{emit_report, save_reports_json, ReportFormat};
use cirsense_core::seed::derive_seed;

use crate::config::{RunConfig, Validated};

/// Errors mapped to exit codes: usage 1, config 2, runtime 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(Vec<String>),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    /// Single-line, machine-parseable: `error-class: detail[; detail...]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {}", m.replace('\n', " ")),
            CliError::Config(errs) => write!(f, "config: {}", errs.join("; ")),
            CliError::Runtime(m) => write!(f, "runtime: {}", m.replace('\n', " ")),
        }
    }
}

pub fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Stamps the configuration snapshot next to the artifacts.
fn write_snapshot(cfg: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(runtime)?;
    let text = toml::to_string_pretty(cfg).map_err(runtime)?;
    std::fs::write(out_dir.join("config.toml"), text).map_err(runtime)?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(|e| CliError::Runtime(format!("load {}: {e}", path.display())))
}

/// Generates the campaign and writes `dataset.cird`.
pub fn cmd_simulate(v: &Validated) -> Result<PathBuf, CliError> {
    let out_dir = &v.config.out_dir;
    write_snapshot(&v.config, out_dir)?;
    let dataset = Dataset::generate(
        v.config.grid,
        &v.config.scene,
        v.campaign.clone(),
        v.config.seed,
    )
    .map_err(runtime)?;
    let path = out_dir.join("dataset.cird");
    dataset.save(&path).map_err(runtime)?;
    println!(
        "wrote {} ({} samples, {} bins)",
        path.display(),
        dataset.samples.len(),
        v.config.grid.n_cols * v.config.grid.n_rows
    );
    Ok(path)
}

/// Checkpoint sidecar describing what was trained, so `eval` can route the
/// file without guessing.
#[derive(Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelKind,
    pub task: Task,
    pub combo: LinkCombo,
    pub seed: u64,
}

fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut os = checkpoint.as_os_str().to_owned();
    os.push(".meta.json");
    PathBuf::from(os)
}

fn cell_seed(opts: &SuiteOptions, model: ModelKind, combo: &LinkCombo, task: Task) -> u64 {
    let code = match model {
        ModelKind::TypeA => 1,
        ModelKind::TypeB => 2,
        ModelKind::TypeC => 3,
        ModelKind::Baseline => 4,
    };
    derive_seed(opts.seed, &[code, combo.code(), task as u64])
}

struct SplitSets {
    split: SplitDataset,
    channels_per_link: usize,
    k_taps: usize,
}

fn split_sets(dataset: &Dataset, v: &Validated) -> Result<SplitSets, CliError> {
    let split = split_campaign(&dataset.samples, &v.split).map_err(runtime)?;
    if split.train.is_empty() || split.test.is_empty() {
        return Err(CliError::Runtime("split has no train or test samples".into()));
    }
    let layout = split.train[0].features.layout;
    Ok(SplitSets {
        split,
        channels_per_link: layout.channels_per_link,
        k_taps: layout.k_taps,
    })
}

fn task_data(
    samples: &[cirsense_core::dataset::SensingSample],
    combo: &LinkCombo,
    task: Task,
) -> Result<TrainData, CliError> {
    let links = combo.link_indices();
    let mut inputs = Vec::new();
    let mut detect = Vec::new();
    let mut position = Vec::new();
    for s in samples {
        if task == Task::Position && s.position_m.is_none() {
            continue;
        }
        for &l in &links {
            if l >= s.features.layout.num_links {
                return Err(CliError::Runtime(format!(
                    "combo {} outside dataset with {} links",
                    combo.name, s.features.layout.num_links
                )));
            }
        }
        inputs.push(s.features.restrict_links(&links).values);
        match task {
            Task::Detect => detect.push(match s.hypothesis {
                cirsense_core::dataset::Hypothesis::Null => 0.0,
                cirsense_core::dataset::Hypothesis::Target => 1.0,
            }),
            Task::Position => position.push(s.position_m.expect("filtered")),
        }
    }
    Ok(TrainData {
        inputs,
        labels: match task {
            Task::Detect => TaskLabels::Detect(detect),
            Task::Position => TaskLabels::Position(position),
        },
    })
}

/// Trains one (model, task, combo) cell and writes its checkpoint.
pub fn cmd_train(
    v: &Validated,
    data_path: &Path,
    model: ModelKind,
    task: Task,
    combo: &LinkCombo,
) -> Result<PathBuf, CliError> {
    if model == ModelKind::Baseline {
        return Err(CliError::Usage(
            "the fingerprint baseline has no trainable parameters; use `eval`".into(),
        ));
    }
    let out_dir = &v.config.out_dir;
    write_snapshot(&v.config, out_dir)?;
    let dataset = load_dataset(data_path)?;
    let sets = split_sets(&dataset, v)?;
    let links = combo.link_indices();
    let channels = links.len() * sets.channels_per_link;
    let opts = v.suite_options();
    let seed = cell_seed(&opts, model, combo, task);
    let task_tag = match task {
        Task::Detect => "detect",
        Task::Position => "position",
    };

    let train_data = task_data(&sets.split.train, combo, task)?;
    let val_data = task_data(&sets.split.val, combo, task)?;

    let path = match model {
        ModelKind::TypeA | ModelKind::TypeB => {
            let variant = if model == ModelKind::TypeA {
                Variant::TypeA
            } else {
                Variant::TypeB
            };
            let spec = NetworkSpec::default_for(variant, links.len(), task);
            let hyper_base = match task {
                Task::Detect => opts.detect_hyper,
                Task::Position => opts.position_hyper,
            };
            let hyper = Hyper { seed, ..hyper_base };
            let trained = train(spec, channels, sets.k_taps, &train_data, &val_data, hyper)
                .map_err(runtime)?;
            let meta = ModelMeta {
                layout: sets.split.train[0].features.restrict_links(&links).layout,
                link_ids: links.clone(),
            };
            let path = out_dir.join(format!("{}_{}_{}.cirm", model.id(), task_tag, combo.name));
            save_model(&path, &trained, &meta).map_err(runtime)?;
            path
        }
        ModelKind::TypeC => {
            let path = out_dir.join(format!("{}_{}_{}.cirg", model.id(), task_tag, combo.name));
            match task {
                Task::Position => {
                    let train_truth = match &train_data.labels {
                        TaskLabels::Position(p) => p.clone(),
                        _ => unreachable!(),
                    };
                    let val_truth = match &val_data.labels {
                        TaskLabels::Position(p) => p.clone(),
                        _ => unreachable!(),
                    };
                    let base = BoostConfig { seed, ..opts.gbt_base };
                    let (best, _) = grid_search(
                        &train_data.inputs,
                        &train_truth,
                        &val_data.inputs,
                        &val_truth,
                        &opts.gbt_grid,
                        &base,
                    )
                    .map_err(runtime)?;
                    let mut rows = train_data.inputs.clone();
                    rows.extend(val_data.inputs.iter().cloned());
                    let mut truth = train_truth;
                    truth.extend(val_truth);
                    let ensemble = fit_ensemble(&rows, &truth, &best).map_err(runtime)?;
                    save_ensemble(&path, &ensemble).map_err(runtime)?;
                }
                Task::Detect => {
                    return Err(CliError::Usage(
                        "boosted detector checkpoints are not supported; run `eval` instead".into(),
                    ));
                }
            }
            path
        }
        ModelKind::Baseline => unreachable!(),
    };
    let meta = CheckpointMeta {
        model,
        task,
        combo: combo.clone(),
        seed,
    };
    let meta_json = serde_json::to_string_pretty(&meta).map_err(runtime)?;
    std::fs::write(meta_path(&path), meta_json + "\n").map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn snapshot_for(dataset: &Dataset, v: &Validated, opts: &SuiteOptions) -> ConfigSnapshot {
    ConfigSnapshot {
        campaign: dataset.campaign.clone(),
        grid: dataset.grid,
        dataset_seed: dataset.seed,
        split: v.split.clone(),
        options: opts.clone(),
    }
}

/// Evaluates a saved checkpoint on the test split.
fn eval_checkpoint(
    path: &Path,
    dataset: &Dataset,
    v: &Validated,
    opts: &SuiteOptions,
) -> Result<EvalReport, CliError> {
    let meta_file = meta_path(path);
    let meta_text = std::fs::read_to_string(&meta_file)
        .map_err(|e| CliError::Runtime(format!("read {}: {e}", meta_file.display())))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Runtime(format!("parse {}: {e}", meta_file.display())))?;
    let sets = split_sets(dataset, v)?;
    let test_data = task_data(&sets.split.test, &meta.combo, meta.task)?;
    let mut report = EvalReport {
        model_id: meta.model.id().into(),
        combo: meta.combo.clone(),
        task: meta.task,
        accuracy: None,
        mean_error_m: None,
        error_cdf: Vec::new(),
        seed: meta.seed,
        chosen_gbt: None,
        error: None,
        config: snapshot_for(dataset, v, opts),
    };
    match meta.model {
        ModelKind::TypeA | ModelKind::TypeB => {
            let (trained, _meta) = load_model(path).map_err(runtime)?;
            match meta.task {
                Task::Detect => {
                    let probs = trained
                        .detect_probabilities(&test_data.inputs)
                        .map_err(runtime)?;
                    let truth = match &test_data.labels {
                        TaskLabels::Detect(v) => v.clone(),
                        _ => unreachable!(),
                    };
                    report.accuracy = Some(detection_accuracy(&probs, &truth));
                }
                Task::Position => {
                    let preds = trained
                        .predict_positions(&test_data.inputs)
                        .map_err(runtime)?;
                    let truth = match &test_data.labels {
                        TaskLabels::Position(v) => v.clone(),
                        _ => unreachable!(),
                    };
                    let (mean, cdf) = position_error_stats(&preds, &truth);
                    report.mean_error_m = Some(mean);
                    report.error_cdf = cdf;
                }
            }
        }
        ModelKind::TypeC => {
            let ensemble = load_ensemble(path).map_err(runtime)?;
            let preds = ensemble.predict(&test_data.inputs);
            let truth = match &test_data.labels {
                TaskLabels::Position(v) => v.clone(),
                _ => unreachable!(),
            };
            let (mean, cdf) = position_error_stats(&preds, &truth);
            report.chosen_gbt = Some(ensemble.config);
            report.mean_error_m = Some(mean);
            report.error_cdf = cdf;
        }
        ModelKind::Baseline => {
            return Err(CliError::Runtime("baseline checkpoints do not exist".into()));
        }
    }
    Ok(report)
}

/// The models that can run a task; the baseline only does positioning.
fn models_for_task(models: &[ModelKind], task: Task) -> Vec<ModelKind> {
    models
        .iter()
        .copied()
        .filter(|m| !(task == Task::Detect && *m == ModelKind::Baseline))
        .collect()
}

fn write_reports(reports: &[EvalReport], out_dir: &Path) -> Result<(), CliError> {
    save_reports_json(&out_dir.join("reports.json"), reports).map_err(runtime)?;
    emit_report(reports, ReportFormat::Csv, &out_dir.join("reports.csv")).map_err(runtime)?;
    emit_report(reports, ReportFormat::Text, &out_dir.join("reports.txt")).map_err(runtime)?;
    emit_report(reports, ReportFormat::Svg, &out_dir.join("cdf.svg")).map_err(runtime)?;
    Ok(())
}

/// Runs suite cells (or scores checkpoints) and writes the report artifacts.
pub fn cmd_eval(
    v: &Validated,
    data_path: &Path,
    checkpoints: &[PathBuf],
) -> Result<Vec<EvalReport>, CliError> {
    let out_dir = &v.config.out_dir;
    write_snapshot(&v.config, out_dir)?;
    let dataset = load_dataset(data_path)?;
    let opts = v.suite_options();
    let mut reports = Vec::new();
    if checkpoints.is_empty() {
        for &task in &v.tasks {
            let models = models_for_task(&v.models, task);
            if models.is_empty() {
                continue;
            }
            let task_reports =
                run_experiment_suite(&dataset, &v.split, task, &models, &v.combos, &opts)
                    .map_err(runtime)?;
            reports.extend(task_reports);
        }
    } else {
        for path in checkpoints {
            reports.push(eval_checkpoint(path, &dataset, v, &opts)?);
        }
    }
    write_reports(&reports, out_dir)?;
    for r in &reports {
        let metric = match (r.accuracy, r.mean_error_m) {
            (Some(a), _) => format!("accuracy {a:.4}"),
            (_, Some(m)) => format!("mean error {m:.4} m"),
            _ => "failed".into(),
        };
        println!("{} {} {:?}: {metric}", r.model_id, r.combo.name, r.task);
    }
    println!("wrote reports to {}", out_dir.display());
    Ok(reports)
}

/// Full protocol: simulate the campaign, run every suite cell, emit reports.
pub fn cmd_reproduce(v: &Validated) -> Result<(), CliError> {
    let data_path = cmd_simulate(v)?;
    cmd_eval(v, &data_path, &[])?;
    Ok(())
}

