//! Quick pipeline probe: generates the reference campaign and prints per-cell
//! metrics so deployment and noise defaults can be sanity-checked.

use std::time::Instant;

use cirsense_core::dataset::{generate_campaign, Dataset, GridSpec, SplitSpec};
use cirsense_core::eval::{run_experiment_suite, LinkCombo, ModelKind, SuiteOptions};
use cirsense_core::nn::Task;
use cirsense_core::sim::Scene;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let grid = GridSpec::default();
    let scene = Scene::default_deployment();
    let mut campaign = cirsense_core::dataset::CampaignConfig::default();
    let mut subsample = 1.0f64;
    let mut lambda = 1.0f64;
    let mut quantiles = cirsense_core::gbt::BoostConfig::default().n_quantile_candidates;
    for a in &args {
        if let Some(n) = a.strip_prefix("aug") {
            campaign.augmentation = n.parse().unwrap();
        }
        if let Some(s) = a.strip_prefix("sub") {
            subsample = s.parse().unwrap();
        }
        if let Some(s) = a.strip_prefix("lam") {
            lambda = s.parse().unwrap();
        }
        if let Some(s) = a.strip_prefix("qc") {
            quantiles = s.parse().unwrap();
        }
        if let Some(s) = a.strip_prefix("ktaps") {
            campaign.features.k_taps = s.parse().unwrap();
        }
        if let Some(s) = a.strip_prefix("noise") {
            campaign.sweep.noise_std = s.parse().unwrap();
        }
    }
    let seed = 1u64;

    let t0 = Instant::now();
    let samples = generate_campaign(&grid, &scene, &campaign, seed).unwrap();
    eprintln!(
        "campaign: {} samples in {:.1?}",
        samples.len(),
        t0.elapsed()
    );
    let dataset = Dataset {
        grid,
        campaign,
        seed,
        samples,
    };
    let split = SplitSpec::random(grid.len(), 337, 0.3, seed);

    let mut tasks = Vec::new();
    let mut models = Vec::new();
    let mut combos = Vec::new();
    for a in &args {
        if let Some(m) = ModelKind::parse(a) {
            models.push(m);
        } else if let Ok(c) = LinkCombo::parse(a) {
            combos.push(c);
        } else if a == "detect" {
            tasks.push(Task::Detect);
        } else if a == "position" {
            tasks.push(Task::Position);
        } else if !["aug", "sub", "lam", "qc", "ktaps", "noise"]
            .iter()
            .any(|p| a.starts_with(p))
        {
            panic!("unknown arg {a}");
        }
    }
    if tasks.is_empty() {
        tasks.push(Task::Detect);
    }
    if models.is_empty() {
        models.push(ModelKind::TypeA);
    }
    if combos.is_empty() {
        combos.push(LinkCombo::parse("N2").unwrap());
    }

    let mut opts = SuiteOptions::with_seed(seed);
    opts.gbt_base.subsample = subsample;
    opts.gbt_base.lambda = lambda;
    opts.gbt_base.n_quantile_candidates = quantiles;
    for task in tasks {
        let t = Instant::now();
        let reports =
            run_experiment_suite(&dataset, &split, task, &models, &combos, &opts).unwrap();
        for r in &reports {
            println!(
                "{:?} {} {}: acc={:?} mean_err={:?} err={:?} gbt={:?} ({:.1?})",
                task,
                r.model_id,
                r.combo.name,
                r.accuracy,
                r.mean_error_m,
                r.error,
                r.chosen_gbt.map(|c| (c.n_estimators, c.max_depth, c.learning_rate)),
                t.elapsed()
            );
        }
    }
}
