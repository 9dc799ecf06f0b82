//! Comparison report, per-series traces and an optional SVG overlay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kpiprobe_core::analysis::{field_points, method_metrics, MethodMetrics};
use kpiprobe_core::{Field, KpiSeries, Method, ScenarioModel};

use crate::export::ExportError;

pub const REPORT_COLUMNS: [&str; 11] = [
    "method",
    "device",
    "field",
    "effective_refresh_period_s",
    "estimated_grain",
    "grain_warning",
    "rmse_vs_truth_db",
    "lag_vs_truth_s",
    "sample_count",
    "error_count",
    "notes",
];

fn method_rank(m: Method) -> usize {
    Method::ALL.iter().position(|x| *x == m).unwrap_or(usize::MAX)
}

/// Metrics of `field` for every series, ordered by method then device.
pub fn analyze(series: &[KpiSeries], truth: Option<&ScenarioModel>, field: Field) -> Vec<MethodMetrics> {
    let mut rows: Vec<MethodMetrics> = series.iter().map(|s| method_metrics(s, truth, field)).collect();
    rows.sort_by(|a, b| (method_rank(a.method), &a.device).cmp(&(method_rank(b.method), &b.device)));
    rows
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| format!("{v:.decimals$}")).unwrap_or_default()
}

fn cells(m: &MethodMetrics) -> [String; 11] {
    [
        m.method.label().to_owned(),
        m.device.clone(),
        m.field.key().to_owned(),
        opt(m.effective_refresh_period, 3),
        m.estimated_grain.map(|g| g.grain.to_string()).unwrap_or_default(),
        m.estimated_grain.map(|g| g.warning.to_string()).unwrap_or_default(),
        opt(m.rmse_vs_truth, 4),
        opt(m.lag_vs_truth, 2),
        m.sample_count.to_string(),
        m.error_count.to_string(),
        m.notes.join("; "),
    ]
}

pub fn report_csv(metrics: &[MethodMetrics]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).expect("in-memory write");
    for m in metrics {
        w.write_record(cells(m)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 cells")
}

/// Fixed-width table for terminals.
pub fn report_text(metrics: &[MethodMetrics]) -> String {
    let header = ["method", "device", "field", "refresh_s", "grain", "rmse_db", "lag_s", "samples", "errors"];
    let rows: Vec<[String; 9]> = metrics
        .iter()
        .map(|m| {
            let c = cells(m);
            let grain = if c[5] == "true" { format!("{}*", c[4]) } else { c[4].clone() };
            let dash = |s: &String| if s.is_empty() { "-".to_owned() } else { s.clone() };
            [c[0].clone(), c[1].clone(), c[2].clone(), dash(&c[3]), dash(&grain), dash(&c[6]), dash(&c[7]), c[8].clone(), c[9].clone()]
        })
        .collect();
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: &[&str]| {
        let mut l = String::new();
        for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
            if i > 0 {
                l.push_str("  ");
            }
            if i < 3 {
                let _ = write!(l, "{c:<w$}");
            } else {
                let _ = write!(l, "{c:>w$}");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&mut out, &header);
    for r in &rows {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let notes: Vec<String> = metrics
        .iter()
        .filter(|m| !m.notes.is_empty())
        .map(|m| format!("{} {}: {}", m.device, m.method, m.notes.join("; ")))
        .collect();
    if metrics.iter().any(|m| m.estimated_grain.is_some_and(|g| g.warning)) {
        out.push_str("* no ladder grain fits; smallest candidate shown\n");
    }
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    out
}

/// `mono_s,value,truth` rows for one series; `truth` blank without a model.
pub fn trace_csv(series: &KpiSeries, truth: Option<&ScenarioModel>, field: Field) -> String {
    let mut out = String::from("mono_s,value,truth\n");
    for (t, v) in field_points(series, field) {
        let tr = truth.and_then(|m| m.truth(field, t)).map(|x| format!("{x:.4}")).unwrap_or_default();
        let _ = writeln!(out, "{t:.3},{v},{tr}");
    }
    out
}

const SVG_W: f64 = 900.0;
const SVG_H: f64 = 420.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Step plot of every series with the truth trace underneath.
pub fn trace_svg(series: &[KpiSeries], truth: Option<&ScenarioModel>, field: Field) -> String {
    let traces: Vec<(String, Vec<(f64, f64)>)> =
        series.iter().map(|s| (s.descriptor.name(), field_points(s, field))).collect();
    let t_max = traces.iter().flat_map(|(_, p)| p.iter().map(|x| x.0)).fold(1.0f64, f64::max);
    let truth_pts: Vec<(f64, f64)> = truth
        .map(|m| (0..=600).filter_map(|i| { let t = t_max * i as f64 / 600.0; m.truth(field, t).map(|v| (t, v)) }).collect())
        .unwrap_or_default();
    let all = traces.iter().flat_map(|(_, p)| p.iter()).chain(&truth_pts).map(|p| p.1);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo.floor() - 1.0, hi.ceil() + 1.0) } else { (-120.0, -40.0) };
    let x = |t: f64| MARGIN + t / t_max * (SVG_W - 2.0 * MARGIN);
    let y = |v: f64| SVG_H - MARGIN - (v - lo) / (hi - lo) * (SVG_H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}">{} ({})</text>"#, MARGIN, MARGIN - 15.0, field.label(), field.unit().label());
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#, SVG_W / 2.0, SVG_H - 12.0);
    for (v, label) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{label}</text>"#, MARGIN - 4.0, y(v) + 4.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="end">{t_max:.1}</text>"#, x(t_max), SVG_H - MARGIN + 14.0);
    if !truth_pts.is_empty() {
        let d: Vec<String> = truth_pts.iter().map(|(t, v)| format!("{:.1},{:.1}", x(*t), y(*v))).collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#999" stroke-dasharray="4 3"/>"##, d.join(" "));
    }
    let mut legend = vec![("truth".to_owned(), "#999")];
    for (i, (name, pts)) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        legend.push((name.clone(), color));
        if pts.is_empty() {
            continue;
        }
        let mut d = format!("M{:.1} {:.1}", x(pts[0].0), y(pts[0].1));
        for w in pts.windows(2) {
            let _ = write!(d, " H{:.1} V{:.1}", x(w[1].0), y(w[1].1));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
    }
    for (i, (name, color)) in legend.iter().enumerate() {
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{name}</text>"#, SVG_W - MARGIN - 150.0);
    }
    out.push_str("</svg>\n");
    out
}

pub struct ReportFiles {
    pub metrics: Vec<MethodMetrics>,
    pub written: Vec<PathBuf>,
}

fn put(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<(), ExportError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| ExportError::Io { path: dir.to_owned(), source })?;
    }
    fs::write(&path, text).map_err(|source| ExportError::Io { path: path.clone(), source })?;
    written.push(path);
    Ok(())
}

/// Write `report.csv`, `report.txt`, `traces/<name>.csv` and, on request,
/// `traces.svg` under `out`.
pub fn write_report(out: &Path, series: &[KpiSeries], truth: Option<&ScenarioModel>, svg: bool) -> Result<ReportFiles, ExportError> {
    let field = Field::Rsrp;
    let metrics = analyze(series, truth, field);
    let mut written = Vec::new();
    put(out.join("report.csv"), &report_csv(&metrics), &mut written)?;
    put(out.join("report.txt"), &report_text(&metrics), &mut written)?;
    for s in series {
        put(out.join("traces").join(format!("{}.csv", s.descriptor.name())), &trace_csv(s, truth, field), &mut written)?;
    }
    if svg {
        put(out.join("traces.svg"), &trace_svg(series, truth, field), &mut written)?;
    }
    Ok(ReportFiles { metrics, written })
}
