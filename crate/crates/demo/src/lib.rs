//! Browser bindings for the channel simulator.
//!
//! Three operations back the demo page: scene geometry for drawing the room,
//! a channel snapshot (per-link CIR magnitudes plus the ground-truth paths)
//! for a chosen target spot, and 1-NN fingerprint localization against a
//! database generated over the position grid. All functions exchange JSON
//! strings so the page needs no generated JS glue beyond wasm-bindgen's.
//!
//! The demo sweep uses 501 tones instead of the campaign's 1001: delay
//! resolution only depends on bandwidth, and the half-size sweep keeps
//! database generation snappy inside a browser.

use std::sync::Mutex;

use cirsense_core::dataset::{generate_campaign, CampaignConfig, GridSpec};
use cirsense_core::dsp::cir_from_sweep;
use cirsense_core::dsp::features_from_cirs;
use cirsense_core::eval::{FingerprintDb, LinkCombo};
use cirsense_core::geom::Point;
use cirsense_core::seed::derive_seed;
use cirsense_core::sim::{build_paths, synthesize_scene_sweeps, Scene};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

const DEMO_SWEEP_POINTS: usize = 501;
const DB_SEED: u64 = 11;
/// Tag separating interactive query noise from database noise seeds.
const QUERY_TAG: u64 = 0x51;

struct DemoDb {
    db: FingerprintDb,
    campaign: CampaignConfig,
    noise_std: f64,
}

static DB: Mutex<Option<DemoDb>> = Mutex::new(None);

fn demo_campaign(noise_std: f64) -> CampaignConfig {
    let mut campaign = CampaignConfig::default();
    campaign.sweep.num_points = DEMO_SWEEP_POINTS;
    campaign.sweep.noise_std = noise_std;
    campaign
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo payloads serialize")
}

fn error_json(detail: impl std::fmt::Display) -> String {
    json(&serde_json::json!({ "error": detail.to_string() }))
}

#[derive(Serialize)]
struct Geometry {
    tx: Point,
    rx: Vec<Point>,
    clutter: Vec<ClutterOut>,
    grid: GridOut,
    body_radius_m: f64,
}

#[derive(Serialize)]
struct ClutterOut {
    position: Point,
    reflectivity: f64,
}

#[derive(Serialize)]
struct GridOut {
    origin: Point,
    n_cols: usize,
    n_rows: usize,
    cell_m: f64,
}

/// Deployment geometry of the reference scene, for drawing the room.
#[wasm_bindgen]
pub fn scene_geometry() -> String {
    let scene = Scene::default_deployment();
    let grid = GridSpec::default();
    json(&Geometry {
        tx: scene.tx_position,
        rx: scene.rx_positions.clone(),
        clutter: scene
            .clutter_points
            .iter()
            .map(|c| ClutterOut {
                position: c.position,
                reflectivity: c.reflectivity,
            })
            .collect(),
        grid: GridOut {
            origin: grid.origin,
            n_cols: grid.n_cols,
            n_rows: grid.n_rows,
            cell_m: grid.cell_m,
        },
        body_radius_m: scene.target.map(|t| t.body_radius_m).unwrap_or(0.0),
    })
}

#[derive(Serialize)]
struct PathOut {
    delay_ns: f64,
    magnitude: f64,
    kind: &'static str,
}

#[derive(Serialize)]
struct LinkOut {
    link_id: usize,
    cir_mag: Vec<f64>,
    paths: Vec<PathOut>,
}

#[derive(Serialize)]
struct Snapshot {
    tap_spacing_ns: f64,
    k_taps: usize,
    links: Vec<LinkOut>,
}

/// Synthesizes the three link sweeps for a target at `(x, y)` (or the empty
/// room) and returns per-link CIR magnitudes plus the ground-truth path list.
#[wasm_bindgen]
pub fn channel_snapshot(x: f64, y: f64, with_target: bool, noise_std: f64, seed: u32) -> String {
    let template = Scene::default_deployment();
    let body = template.target.expect("reference scene has a body prototype");
    let scene = if with_target {
        template.with_target_at(Point { x, y }, &body)
    } else {
        template.without_target()
    }
    .with_seed(derive_seed(seed as u64, &[QUERY_TAG, 0]));
    if let Err(errs) = scene.validate() {
        return error_json(errs.join("; "));
    }

    let campaign = demo_campaign(noise_std);
    if let Err(errs) = campaign.sweep.validate() {
        return error_json(errs.join("; "));
    }
    let sweeps = match synthesize_scene_sweeps(&scene, &campaign.sweep) {
        Ok(s) => s,
        Err(e) => return error_json(e),
    };
    let k = campaign.features.k_taps;
    let spacing_ns = campaign.sweep.delay_bin_spacing() * 1e9;

    let mut links = Vec::new();
    for (link, sweep) in sweeps.iter().enumerate() {
        let cir = cir_from_sweep(sweep);
        let n_clutter = scene.clutter_points.len();
        let paths = match build_paths(&scene, link) {
            Ok(p) => p,
            Err(e) => return error_json(e),
        };
        links.push(LinkOut {
            link_id: link + 2,
            cir_mag: cir.taps[..k].iter().map(|t| t.norm()).collect(),
            paths: paths
                .iter()
                .enumerate()
                .map(|(i, p)| PathOut {
                    delay_ns: p.delay_s * 1e9,
                    magnitude: p.gain.norm(),
                    kind: if i == 0 {
                        "los"
                    } else if i <= n_clutter {
                        "clutter"
                    } else {
                        "target"
                    },
                })
                .collect(),
        });
    }
    json(&Snapshot {
        tap_spacing_ns: spacing_ns,
        k_taps: k,
        links,
    })
}

#[derive(Serialize)]
struct DbInfo {
    bins: usize,
    noise_std: f64,
    sweep_points: usize,
}

/// Generates the fingerprint database over the full position grid. Heavy
/// (hundreds of sweeps); call once and reuse. Rebuilds when `noise_std`
/// changes.
#[wasm_bindgen]
pub fn build_db(noise_std: f64) -> String {
    let mut guard = DB.lock().expect("demo db lock");
    if let Some(existing) = guard.as_ref() {
        if existing.noise_std == noise_std {
            return json(&DbInfo {
                bins: existing.db.len(),
                noise_std,
                sweep_points: DEMO_SWEEP_POINTS,
            });
        }
    }
    let grid = GridSpec::default();
    let scene = Scene::default_deployment();
    let campaign = demo_campaign(noise_std);
    if let Err(errs) = campaign.sweep.validate() {
        return error_json(errs.join("; "));
    }
    let samples = match generate_campaign(&grid, &scene, &campaign, DB_SEED) {
        Ok(s) => s,
        Err(e) => return error_json(e),
    };
    let combo = LinkCombo::new(&[2, 3, 4]).expect("full combo is valid");
    let db = match FingerprintDb::new(&samples, &combo) {
        Ok(db) => db,
        Err(e) => return error_json(e),
    };
    let info = DbInfo {
        bins: db.len(),
        noise_std,
        sweep_points: DEMO_SWEEP_POINTS,
    };
    *guard = Some(DemoDb {
        db,
        campaign,
        noise_std,
    });
    json(&info)
}

#[derive(Serialize)]
struct LocalizeOut {
    truth: Point,
    predicted: Point,
    error_m: f64,
}

/// Synthesizes a fresh measurement for a target at `(x, y)` and looks it up in
/// the fingerprint database. `build_db` must have been called first.
#[wasm_bindgen]
pub fn localize(x: f64, y: f64, seed: u32) -> String {
    let guard = DB.lock().expect("demo db lock");
    let Some(demo) = guard.as_ref() else {
        return error_json("no database yet; call build_db first");
    };
    let template = Scene::default_deployment();
    let body = template.target.expect("reference scene has a body prototype");
    let scene = template
        .with_target_at(Point { x, y }, &body)
        .with_seed(derive_seed(seed as u64, &[QUERY_TAG, 1]));
    if let Err(errs) = scene.validate() {
        return error_json(errs.join("; "));
    }
    let sweeps = match synthesize_scene_sweeps(&scene, &demo.campaign.sweep) {
        Ok(s) => s,
        Err(e) => return error_json(e),
    };
    let cirs: Vec<_> = sweeps.iter().map(cir_from_sweep).collect();
    let features = match features_from_cirs(
        &cirs,
        demo.campaign.features.k_taps,
        demo.campaign.features.mode,
        demo.campaign.features.normalize,
    ) {
        Ok(f) => f,
        Err(e) => return error_json(e),
    };
    let predicted = match demo.db.predict(&features.values) {
        Ok(p) => p,
        Err(e) => return error_json(e),
    };
    let truth = Point { x, y };
    json(&LocalizeOut {
        truth,
        predicted,
        error_m: truth.distance(predicted),
    })
}
