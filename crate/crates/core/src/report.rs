//! Report rendering: CSV and text tables plus an SVG error-CDF plot.
//!
//! Every renderer is a pure function of the report list, so emitting the same
//! reports twice produces byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::eval::EvalReport;
use crate::io::IoError;
use crate::nn::Task;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
    Svg,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(ReportFormat::Csv),
            "text" | "txt" => Some(ReportFormat::Text),
            "svg" => Some(ReportFormat::Svg),
            _ => None,
        }
    }
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Detect => "detect",
        Task::Position => "position",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `model,combo,task,accuracy,mean_error_m` rows; header only when empty.
pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model,combo,task,accuracy,mean_error_m\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.model_id,
            r.combo.name,
            task_name(r.task),
            opt(r.accuracy),
            opt(r.mean_error_m),
        );
    }
    out
}

/// Fixed-width table with failures annotated.
pub fn render_text(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<6} {:<9} {:>9} {:>13}",
        "model", "combo", "task", "accuracy", "mean_error_m"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:<6} {:<9} {:>9} {:>13}",
            r.model_id,
            r.combo.name,
            task_name(r.task),
            r.accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into()),
            r.mean_error_m
                .map(|m| format!("{m:.4}"))
                .unwrap_or_else(|| "-".into()),
        );
        if let Some(e) = &r.error {
            let _ = writeln!(out, "  failed: {e}");
        }
    }
    out
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 440.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Error-CDF plot: one polyline per report that carries a CDF, with axes,
/// ticks and a legend.
pub fn render_cdf_svg(reports: &[EvalReport]) -> String {
    let plotted: Vec<&EvalReport> = reports.iter().filter(|r| !r.error_cdf.is_empty()).collect();
    let max_err = plotted
        .iter()
        .flat_map(|r| r.error_cdf.iter().map(|p| p.error_m))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let x = |e: f64| MARGIN_L + e / max_err * plot_w;
    let y = |f: f64| MARGIN_T + (1.0 - f) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_L,
        y(0.0),
        x(max_err),
        y(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        MARGIN_L,
        y(0.0),
        MARGIN_L,
        y(1.0)
    );
    // ticks
    for i in 0..=4 {
        let e = max_err * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="black"/>"#,
            x(e),
            y(0.0),
            y(0.0) + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{:.2}</text>"#,
            x(e),
            y(0.0) + 20.0,
            e
        );
        let f = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{2:.2}" x2="{1:.2}" y2="{2:.2}" stroke="black"/>"#,
            MARGIN_L - 5.0,
            MARGIN_L,
            y(f)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{:.2}</text>"#,
            MARGIN_L - 8.0,
            y(f) + 4.0,
            f
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">position error [m]</text>"#,
        MARGIN_L + plot_w / 2.0,
        SVG_H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {:.2})">CDF</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );
    // curves
    for (i, r) in plotted.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for p in &r.error_cdf {
            let _ = write!(points, "{:.2},{:.2} ", x(p.error_m), y(p.fraction));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.trim_end()
        );
        let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
        let lx = SVG_W - MARGIN_R + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            lx,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12">{} {}</text>"#,
            lx + 24.0,
            ly,
            r.model_id,
            r.combo.name
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Renders `reports` in `format` and writes the bytes to `path`.
pub fn emit_report(reports: &[EvalReport], format: ReportFormat, path: &Path) -> Result<(), IoError> {
    let bytes = match format {
        ReportFormat::Csv => render_csv(reports),
        ReportFormat::Text => render_text(reports),
        ReportFormat::Svg => render_cdf_svg(reports),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Reports as pretty JSON (the machine-readable artifact).
pub fn save_reports_json(path: &Path, reports: &[EvalReport]) -> Result<(), IoError> {
    let s = serde_json::to_string_pretty(reports)
        .map_err(|e| IoError::Malformed {
            offset: 0,
            what: format!("serialize reports: {e}"),
        })?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

pub fn load_reports_json(path: &Path) -> Result<Vec<EvalReport>, IoError> {
    let s = std::fs::read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| IoError::Malformed {
        offset: 0,
        what: format!("parse reports: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CampaignConfig, GridSpec, SplitSpec};
    use crate::eval::{CdfPoint, ConfigSnapshot, EvalReport, LinkCombo, SuiteOptions};

    fn snapshot() -> ConfigSnapshot {
        ConfigSnapshot {
            campaign: CampaignConfig::default(),
            grid: GridSpec::default(),
            dataset_seed: 0,
            split: SplitSpec {
                train_bins: vec![0],
                test_bins: vec![1],
                val_fraction: 0.0,
                seed: 0,
            },
            options: SuiteOptions::with_seed(0),
        }
    }

    fn position_report(model: &str, errors: &[f64]) -> EvalReport {
        let n = errors.len();
        let mut sorted = errors.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        EvalReport {
            model_id: model.into(),
            combo: LinkCombo::parse("N234").unwrap(),
            task: Task::Position,
            accuracy: None,
            mean_error_m: Some(sorted.iter().sum::<f64>() / n as f64),
            error_cdf: sorted
                .iter()
                .enumerate()
                .map(|(i, &e)| CdfPoint {
                    error_m: e,
                    fraction: (i + 1) as f64 / n as f64,
                })
                .collect(),
            seed: 1,
            chosen_gbt: None,
            error: None,
            config: snapshot(),
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(render_csv(&[]), "model,combo,task,accuracy,mean_error_m\n");
    }

    #[test]
    fn csv_rows_carry_metrics() {
        let r = position_report("typec", &[0.5, 1.5]);
        let csv = render_csv(&[r]);
        assert_eq!(
            csv,
            "model,combo,task,accuracy,mean_error_m\ntypec,N234,position,,1\n"
        );
    }

    #[test]
    fn text_annotates_failures() {
        let mut r = position_report("typea", &[1.0]);
        r.error = Some("boom".into());
        let txt = render_text(&[r]);
        assert!(txt.contains("typea"));
        assert!(txt.contains("failed: boom"));
    }

    #[test]
    fn svg_has_one_polyline_per_report_with_all_points() {
        let a = position_report("typea", &[0.1, 0.2, 0.3]);
        let b = position_report("typeb", &[0.2, 0.4]);
        let svg = render_cdf_svg(&[a, b]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        let first = svg.split("points=\"").nth(1).unwrap();
        let coords = first.split('"').next().unwrap();
        assert_eq!(coords.split_whitespace().count(), 3);
        assert!(svg.contains("<svg"));
        assert!(svg.contains("position error [m]"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let reports = vec![
            position_report("typea", &[0.4, 0.9, 1.3]),
            position_report("baseline", &[0.7, 1.1]),
        ];
        assert_eq!(render_csv(&reports), render_csv(&reports));
        assert_eq!(render_text(&reports), render_text(&reports));
        assert_eq!(render_cdf_svg(&reports), render_cdf_svg(&reports));
    }

    #[test]
    fn emission_is_byte_identical() {
        let reports = vec![position_report("typec", &[0.3, 0.6])];
        let dir = std::env::temp_dir().join("cirsense-report-tests");
        std::fs::create_dir_all(&dir).unwrap();
        for fmt in [ReportFormat::Csv, ReportFormat::Text, ReportFormat::Svg] {
            let p1 = dir.join("a.out");
            let p2 = dir.join("b.out");
            emit_report(&reports, fmt, &p1).unwrap();
            emit_report(&reports, fmt, &p2).unwrap();
            assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        }
    }

    #[test]
    fn reports_round_trip_through_json() {
        let reports = vec![
            position_report("typea", &[0.4, 0.9]),
            position_report("typec", &[0.2]),
        ];
        let dir = std::env::temp_dir().join("cirsense-report-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("reports.json");
        save_reports_json(&p, &reports).unwrap();
        let back = load_reports_json(&p).unwrap();
        assert_eq!(back, reports);
    }
}
