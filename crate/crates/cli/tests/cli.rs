//! End-to-end tests of the `cirsense` binary on a small configuration.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cirsense"));
    c.env_remove("CIRSENSE_OUT");
    c
}

const TINY_CONFIG: &str = r#"
seed = 7
expected_bins = 16
models = ["typea", "typec", "baseline"]
combos = ["N2", "N234"]
tasks = ["detect", "position"]

[grid]
n_cols = 4
n_rows = 4
cell_m = 0.2
origin = { x = 1.0, y = 1.0 }

[sweep]
center_frequency_hz = 28e9
bandwidth_hz = 1e9
num_points = 101
noise_std = 0.01
calibration_delay_s = 0.0

[features]
k_taps = 32
mode = "magnitude"
normalize = "per-link-max"

[split]
n_train_bins = 10
val_fraction = 0.3

[detect_hyper]
epochs = 3
batch_size = 8
learning_rate = 0.001
seed = 0
patience = 2

[position_hyper]
epochs = 4
batch_size = 8
learning_rate = 0.001
seed = 0
patience = 2

[gbt]
n_estimators = 20
max_depth = 3
learning_rate = 0.3
lambda = 1.0
gamma = 0.0
n_quantile_candidates = 16
subsample = 1.0
seed = 0

[gbt_grid]
n_estimators = [20]
max_depth = [3]
learning_rate = [0.3]
"#;

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, TINY_CONFIG).unwrap();
    path
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_default_config_has_924_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("924 samples"), "{stdout}");
    assert!(dir.path().join("dataset.cird").is_file());
    assert!(dir.path().join("config.toml").is_file());
}

#[test]
fn invalid_grid_exits_2_with_named_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[grid]\nn_cols = 20\nn_rows = 22\ncell_m = 0.2\norigin = { x = 0.0, y = 0.0 }\n").unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("expected_bins"), "{stderr}");
}

#[test]
fn unknown_flag_exits_1() {
    let out = bin().args(["simulate", "--warp-factor", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: usage:"), "{stderr}");
}

#[test]
fn reproduce_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = bin()
            .args(["reproduce", "--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(out_dir)
            .output()
            .unwrap();
        assert_ok(&out);
    }
    for name in ["dataset.cird", "reports.json", "reports.csv", "reports.txt", "cdf.svg"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between identical runs");
    }
    let json = std::fs::read_to_string(a.join("reports.json")).unwrap();
    // 2 detect models x 2 combos + 3 position models x 2 combos
    assert_eq!(json.matches("\"model_id\"").count(), 10);
}

#[test]
fn train_then_eval_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_ok(&out);
    let data = out_dir.join("dataset.cird");

    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .args(["--data"])
        .arg(&data)
        .args(["--model", "typea", "--task", "detect", "--combo", "N2"])
        .output()
        .unwrap();
    assert_ok(&out);
    let ckpt = out_dir.join("typea_detect_N2.cirm");
    assert!(ckpt.is_file());
    assert!(out_dir.join("typea_detect_N2.cirm.meta.json").is_file());

    let out = bin()
        .args(["eval", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .args(["--data"])
        .arg(&data)
        .args(["--checkpoint"])
        .arg(&ckpt)
        .output()
        .unwrap();
    assert_ok(&out);
    let json = std::fs::read_to_string(out_dir.join("reports.json")).unwrap();
    assert!(json.contains("\"accuracy\""));
    assert_eq!(json.matches("\"model_id\"").count(), 1);
}

#[test]
fn train_rejects_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path())
        .args(["--data", "nowhere.cird"])
        .args(["--model", "baseline", "--task", "position", "--combo", "N2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_precedence_flag_beats_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let env_dir = dir.path().join("from-env");
    let flag_dir = dir.path().join("from-flag");

    let out = bin()
        .env("CIRSENSE_OUT", &env_dir)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(env_dir.join("dataset.cird").is_file());

    let out = bin()
        .env("CIRSENSE_OUT", &env_dir)
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&flag_dir)
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(flag_dir.join("dataset.cird").is_file());
}

#[test]
fn eval_with_no_runnable_cells_writes_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_ok(&out);
    let out = bin()
        .args(["eval", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .args(["--data"])
        .arg(out_dir.join("dataset.cird"))
        .args(["--models", "baseline", "--tasks", "detect"])
        .output()
        .unwrap();
    assert_ok(&out);
    let csv = std::fs::read_to_string(out_dir.join("reports.csv")).unwrap();
    assert_eq!(csv, "model,combo,task,accuracy,mean_error_m\n");
}

#[test]
fn links_flag_restricts_receivers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out_dir = dir.path().join("run");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .args(["--links", "2,3"])
        .output()
        .unwrap();
    assert_ok(&out);
    let snapshot = std::fs::read_to_string(out_dir.join("config.toml")).unwrap();
    assert_eq!(snapshot.matches("[[scene.rx_positions]]").count(), 2, "{snapshot}");
    assert!(!snapshot.contains("N234"));
}
