use std::fmt::Write;
use std::path::Path;

use serde::Serialize;
use tofplane::metrics::{CurvatureReport, Histogram, LossBreakdown, HISTOGRAM_BINS};

const BAR_WIDTH: usize = 40;

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CurvatureLine<'a> {
    Plane {
        frame_id: &'a str,
        curv_grad: f64,
        point_count: usize,
    },
    Skipped {
        frame_id: &'a str,
        reason: &'a str,
    },
}

/// One JSON object per evaluated plane, then one per skipped frame.
pub fn curvature_jsonl(report: &CurvatureReport) -> String {
    let planes = report.per_plane.iter().map(|r| CurvatureLine::Plane {
        frame_id: &r.frame_id,
        curv_grad: r.curv_grad,
        point_count: r.point_count,
    });
    let skipped = report.skipped.iter().map(|s| CurvatureLine::Skipped {
        frame_id: &s.frame_id,
        reason: &s.reason,
    });
    let mut out = String::new();
    for line in planes.chain(skipped) {
        out.push_str(&serde_json::to_string(&line).expect("report line serializes"));
        out.push('\n');
    }
    out
}

fn bin_label(i: usize) -> String {
    let lo = i as f64 / HISTOGRAM_BINS as f64;
    let hi = (i + 1) as f64 / HISTOGRAM_BINS as f64;
    let close = if i + 1 == HISTOGRAM_BINS { ']' } else { ')' };
    format!("[{lo:.1}, {hi:.1}{close}")
}

fn render_histogram(out: &mut String, h: &Histogram) {
    let peak = h.0.iter().copied().max().unwrap_or(0).max(1);
    for (i, &count) in h.0.iter().enumerate() {
        let bar = "#".repeat(count * BAR_WIDTH / peak);
        let line = format!("  {:<11}{count:>7}  {bar}", bin_label(i));
        writeln!(out, "{}", line.trim_end()).unwrap();
    }
}

/// Text summary of one or two curvature reports, with the per-bin delta
/// (second minus first) when two are given.
pub fn curvature_summary(sets: &[(&str, &Path, &CurvatureReport)]) -> String {
    let mut out = String::new();
    for (name, dir, report) in sets {
        writeln!(out, "set {name}: {}", dir.display()).unwrap();
        writeln!(
            out,
            "  planes {}  skipped {}",
            report.per_plane.len(),
            report.skipped.len()
        )
        .unwrap();
        let mean = report.mean().map_or("n/a".to_string(), |m| format!("{m:.4}"));
        writeln!(out, "  mean {mean}  std {:.4}", report.std_dev).unwrap();
        render_histogram(&mut out, &report.histogram);
        out.push('\n');
    }
    if let [(a, _, first), (b, _, second)] = sets {
        writeln!(out, "delta ({b} - {a})").unwrap();
        for (i, d) in first.histogram.delta(&second.histogram).iter().enumerate() {
            writeln!(out, "  {:<11}{d:>+7}", bin_label(i)).unwrap();
        }
        writeln!(out, "  std {:+.4}", second.std_dev - first.std_dev).unwrap();
    }
    out
}

pub fn loss_table(rows: &[(String, LossBreakdown)]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<24} {:>8} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "frame", "n", "loss_x", "loss_y", "loss_z", "loss_rmse", "total"
    )
    .unwrap();
    let row = |out: &mut String, name: &str, n: String, l: [f64; 5]| {
        writeln!(
            out,
            "{name:<24} {n:>8} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.9} {:>14.6e}",
            l[0], l[1], l[2], l[3], l[4]
        )
        .unwrap();
    };
    for (name, l) in rows {
        row(
            &mut out,
            name,
            l.n.to_string(),
            [l.loss_x, l.loss_y, l.loss_z, l.loss_rmse, l.total],
        );
    }
    if !rows.is_empty() {
        let k = rows.len() as f64;
        let mean = |f: fn(&LossBreakdown) -> f64| rows.iter().map(|(_, l)| f(l)).sum::<f64>() / k;
        row(
            &mut out,
            "mean",
            String::new(),
            [
                mean(|l| l.loss_x),
                mean(|l| l.loss_y),
                mean(|l| l.loss_z),
                mean(|l| l.loss_rmse),
                mean(|l| l.total),
            ],
        );
    }
    out
}
