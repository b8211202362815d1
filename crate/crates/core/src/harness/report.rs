use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::train::{read_metrics, MetricsRow};
use crate::error::Result;

/// One metrics file and the name it is reported under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportInput {
    pub label: String,
    pub path: PathBuf,
}

impl ReportInput {
    /// `label=path`, or a bare path labelled by its parent directory (for `metrics.csv`) or stem.
    pub fn parse(arg: &str) -> Self {
        if let Some((label, path)) = arg.split_once('=') {
            return ReportInput {
                label: label.to_string(),
                path: PathBuf::from(path),
            };
        }
        let path = PathBuf::from(arg);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        let label = if stem == "metrics" {
            path.parent()
                .and_then(|p| p.file_name())
                .and_then(|s| s.to_str())
                .unwrap_or(stem)
        } else {
            stem
        };
        ReportInput {
            label: label.to_string(),
            path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOutput {
    pub summary: String,
    pub summary_path: PathBuf,
    pub plots: Vec<PathBuf>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

/// Minimal SVG line chart with axes, tick labels and a legend.
fn line_chart(title: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 400.0);
    let (ml, mr, mt, mb) = (60.0, 170.0, 40.0, 40.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{title}</text>"#, (w - mr + ml) / 2.0);
    let _ = writeln!(
        svg,
        r##"<path d="M{ml} {mt} V{} H{}" fill="none" stroke="#333"/>"##,
        h - mb,
        w - mr
    );
    for k in 0..=4 {
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{ml}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.3}</text>"##,
            w - mr,
            py(fy),
            py(fy),
            ml - 4.0,
            py(fy) + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.0}</text>"#,
            px(fx),
            h - mb + 16.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            d.join(" ")
        );
        let ly = mt + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            w - mr + 10.0,
            w - mr + 30.0,
            w - mr + 34.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn series(runs: &[(String, Vec<MetricsRow>)], suffix: &str, dashed: bool, f: fn(&MetricsRow) -> f64) -> Vec<Series> {
    runs.iter()
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(label, rows)| Series {
            label: format!("{label}{suffix}"),
            points: rows.iter().map(|r| (r.step as f64, f(r))).collect(),
            dashed,
        })
        .collect()
}

fn describe(row: &MetricsRow) -> String {
    format!(
        "  final step {}: reward {:.4}, accuracy {:.4} (easy {:.4}, hard {:.4}), robust {:.4}, format {:.4}, mean w {:.4}, resample {:.4}",
        row.step,
        row.mean_reward,
        row.accuracy,
        row.accuracy_easy,
        row.accuracy_hard,
        row.robust_accuracy,
        row.format_rate,
        row.mean_w,
        row.resample_fraction
    )
}

/// Read metrics files, write learning-curve SVGs and `summary.txt` into `out_dir`.
pub fn report(inputs: &[ReportInput], out_dir: &Path) -> Result<ReportOutput> {
    let mut runs = Vec::with_capacity(inputs.len());
    for inp in inputs {
        runs.push((inp.label.clone(), read_metrics(&inp.path)?));
    }
    fs::create_dir_all(out_dir)?;
    let mut summary = String::from("Training report\n");
    let _ = writeln!(summary, "runs: {}", runs.len());
    let mut plots = Vec::new();

    if runs.iter().all(|(_, rows)| rows.is_empty()) {
        summary.push_str("no steps recorded\n");
    } else {
        for (label, rows) in &runs {
            let _ = writeln!(summary, "\n{label}: {} logged steps", rows.len());
            match rows.last() {
                Some(last) => summary.push_str(&(describe(last) + "\n")),
                None => summary.push_str("  no steps recorded\n"),
            }
        }
        let finals: Vec<(&String, &MetricsRow)> = runs
            .iter()
            .filter_map(|(l, rows)| rows.last().map(|r| (l, r)))
            .collect();
        if finals.len() >= 2 {
            let (base_label, base) = finals[0];
            let _ = writeln!(summary, "\nfinal accuracy deltas against {base_label}:");
            for (label, r) in &finals[1..] {
                let _ = writeln!(
                    summary,
                    "  {label}: easy {:+.4}, hard {:+.4}, overall {:+.4}, robust {:+.4}",
                    r.accuracy_easy - base.accuracy_easy,
                    r.accuracy_hard - base.accuracy_hard,
                    r.accuracy - base.accuracy,
                    r.robust_accuracy - base.robust_accuracy
                );
            }
        }

        let mut tiers = series(&runs, " easy", false, |r| r.accuracy_easy);
        tiers.extend(series(&runs, " hard", true, |r| r.accuracy_hard));
        let charts = [
            ("reward.svg", "Mean total reward", series(&runs, "", false, |r| r.mean_reward)),
            ("tier_accuracy.svg", "Accuracy by tier", tiers),
            ("mean_w.svg", "Mean difficulty weight", series(&runs, "", false, |r| r.mean_w)),
            (
                "resample_fraction.svg",
                "Resampled question fraction",
                series(&runs, "", false, |r| r.resample_fraction),
            ),
        ];
        for (file, title, s) in charts {
            let path = out_dir.join(file);
            fs::write(&path, line_chart(title, &s))?;
            plots.push(path);
        }
    }
    let summary_path = out_dir.join("summary.txt");
    fs::write(&summary_path, &summary)?;
    Ok(ReportOutput {
        summary,
        summary_path,
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::train::write_metrics;

    fn row(step: usize, easy: f64, hard: f64) -> MetricsRow {
        MetricsRow {
            step,
            mean_reward: 1.0,
            accuracy: (easy + hard) / 2.0,
            accuracy_easy: easy,
            accuracy_hard: hard,
            robust_accuracy: 0.5,
            mean_w: 1.0,
            resample_fraction: 0.0,
            format_rate: 1.0,
            objective: 0.0,
            grad_norm: 0.0,
        }
    }

    #[test]
    fn header_only_reports_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("m.csv");
        write_metrics(&[], &csv).unwrap();
        let out = report(&[ReportInput::parse(csv.to_str().unwrap())], &dir.path().join("r")).unwrap();
        assert!(out.summary.contains("no steps recorded"));
        assert!(out.plots.is_empty());
    }

    #[test]
    fn two_runs_give_deltas_and_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_metrics(&[row(1, 0.5, 0.1), row(2, 0.9, 0.2)], &a).unwrap();
        write_metrics(&[row(1, 0.5, 0.1), row(2, 0.95, 0.4)], &b).unwrap();
        let inputs = [ReportInput::parse(a.to_str().unwrap()), ReportInput::parse(b.to_str().unwrap())];
        let o1 = report(&inputs, &dir.path().join("r1")).unwrap();
        let o2 = report(&inputs, &dir.path().join("r2")).unwrap();
        assert!(o1.summary.contains("b: easy +0.0500, hard +0.2000"));
        assert_eq!(o1.summary, o2.summary);
        assert_eq!(o1.plots.len(), 4);
        for (p, q) in o1.plots.iter().zip(&o2.plots) {
            assert_eq!(fs::read(p).unwrap(), fs::read(q).unwrap());
        }
    }

    #[test]
    fn labels() {
        assert_eq!(ReportInput::parse("runs/sft/metrics.csv").label, "sft");
        assert_eq!(ReportInput::parse("x=a/b.csv").label, "x");
        assert_eq!(ReportInput::parse("a/plain.csv").label, "plain");
    }
}
