//! Report rows, their CSV form and the SVG line plots drawn from them.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use noper_core::operator::ModelKind;
use noper_core::train::Task;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelKind,
    pub task: Task,
    pub resolution: usize,
    pub rel_l2_mean: f64,
    /// Absent for a single seed.
    pub rel_l2_std: Option<f64>,
    pub rel_linf_mean: f64,
    pub rel_linf_std: Option<f64>,
    pub seeds: usize,
    pub wall_seconds: f64,
}

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RelL2,
    RelLinf,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::RelL2, Metric::RelLinf];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RelL2 => "rel_l2",
            Metric::RelLinf => "rel_linf",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::RelL2 => "relative l2 error",
            Metric::RelLinf => "relative l-inf error",
        }
    }

    fn of(self, row: &ReportRow) -> f64 {
        match self {
            Metric::RelL2 => row.rel_l2_mean,
            Metric::RelLinf => row.rel_linf_mean,
        }
    }
}

/// Writes a one-line `# key=value ...` header followed by the CSV body.
pub fn write_csv<T: Serialize>(path: &Path, header: &str, rows: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "# {header}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Header comment and rows of a file written by [`write_csv`].
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(String, Vec<T>)> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let header = first
        .strip_prefix("# ")
        .ok_or_else(|| CliError::Report(format!("{} lacks its header comment", path.display())))?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let rows = reader.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((header.to_string(), rows))
}

/// Value of `key` in a `key=value key=value` header.
pub fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header.split_whitespace().find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

fn colour(model: ModelKind) -> &'static str {
    match model {
        ModelKind::Mfno => "#1f77b4",
        ModelKind::Zfno => "#2ca02c",
        ModelKind::Fno => "#d62728",
        ModelKind::Deeponet => "#9467bd",
    }
}

/// Error-vs-resolution line plot of `metric` for the rows of `task`, one
/// curve per model on a log error axis. A pure function of the rows.
pub fn plot_svg(rows: &[ReportRow], task: Task, metric: Metric) -> String {
    let rows: Vec<&ReportRow> = rows.iter().filter(|r| r.task == task && metric.of(r) > 0.0).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{task}: {} vs resolution</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        metric.label()
    );
    if rows.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let (xmin, xmax) = rows.iter().fold((usize::MAX, 0), |(lo, hi), r| (lo.min(r.resolution), hi.max(r.resolution)));
    let (xmin, xmax) = (xmin as f64, (xmax as f64).max(xmin as f64 + 1.0));
    let logs = rows.iter().map(|r| metric.of(r).log10());
    let (lmin, lmax) = logs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (ymin, ymax) = (lmin.floor(), lmax.ceil().max(lmin.floor() + 1.0));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * plot_w;
    let py = |l: f64| TOP + (ymax - l) / (ymax - ymin) * plot_h;

    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    );
    let mut ticks: Vec<usize> = rows.iter().map(|r| r.resolution).collect();
    ticks.sort_unstable();
    ticks.dedup();
    for t in &ticks {
        let x = px(*t as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="9">{t}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 17.0
        );
    }
    for d in (ymin as i32)..=(ymax as i32) {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">resolution (segments)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        metric.label()
    );

    let mut legend_y = TOP + 10.0;
    for model in ModelKind::ALL {
        let mut points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.model == model)
            .map(|r| (px(r.resolution as f64), py(metric.of(r).log10())))
            .collect();
        if points.is_empty() {
            continue;
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let c = colour(model);
        let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, path.join(" "));
        for (x, y) in &points {
            let _ = writeln!(svg, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{c}"/>"#);
        }
        let lx = LEFT + plot_w + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{legend_y:.1}" x2="{:.1}" y2="{legend_y:.1}" stroke="{c}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            legend_y + 4.0,
            model.name()
        );
        legend_y += 18.0;
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: ModelKind, resolution: usize, e: f64) -> ReportRow {
        ReportRow {
            model,
            task: Task::Sde1,
            resolution,
            rel_l2_mean: e,
            rel_l2_std: None,
            rel_linf_mean: 2.0 * e,
            rel_linf_std: Some(0.1 * e),
            seeds: 1,
            wall_seconds: 0.5,
        }
    }

    #[test]
    fn sample_deviation_needs_two_values() {
        assert_eq!(mean_std(&[2.0]), (2.0, None));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_keeps_plots_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![
            row(ModelKind::Mfno, 128, 3.3e-4),
            row(ModelKind::Mfno, 256, 3.1e-4 / 3.0),
            row(ModelKind::Fno, 128, 1.0e-3),
            row(ModelKind::Fno, 256, 7.0e-3),
        ];
        write_csv(&path, "config_hash=abc seeds=0", &rows).unwrap();
        let (header, back): (String, Vec<ReportRow>) = read_csv(&path).unwrap();
        assert_eq!(header_field(&header, "config_hash"), Some("abc"));
        assert_eq!(back, rows);
        for metric in Metric::ALL {
            assert_eq!(plot_svg(&rows, Task::Sde1, metric), plot_svg(&back, Task::Sde1, metric));
        }
        let svg = plot_svg(&rows, Task::Sde1, Metric::RelL2);
        assert!(svg.contains(">mfno<") && svg.contains(">fno<") && !svg.contains(">zfno<"));
        assert_eq!(svg.matches("<circle").count(), 4);
    }
}
