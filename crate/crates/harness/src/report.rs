//! Result emission: CSV (parse-back supported), a mean/stddev text table,
//! and SVG reward curves.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::experiment::{MetricSummary, RunRecord};

pub const CSV_HEADER: [&str; 11] = [
    "world",
    "model",
    "algo",
    "start_mode",
    "runs",
    "lt_mean",
    "lt_std",
    "lt_na_count",
    "lp_mean",
    "lp_std",
    "seconds_mean",
];

fn opt_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>, io::Error> {
    if s == "NA" {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

/// Writes summaries as CSV. Float cells use the shortest round-trip
/// decimal form, so reading the file back reproduces the values exactly.
pub fn write_csv(summaries: &[MetricSummary], w: impl io::Write) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for s in summaries {
        wtr.write_record([
            s.world.clone(),
            s.model.clone(),
            s.algo.clone(),
            s.start_mode.clone(),
            s.runs.to_string(),
            opt_cell(s.lt_mean),
            opt_cell(s.lt_std),
            s.lt_na_count.to_string(),
            opt_cell(s.lp_mean),
            opt_cell(s.lp_std),
            format!("{}", s.seconds_mean),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One parsed CSV row; the scalar image of a [`MetricSummary`].
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub world: String,
    pub model: String,
    pub algo: String,
    pub start_mode: String,
    pub runs: usize,
    pub lt_mean: Option<f64>,
    pub lt_std: Option<f64>,
    pub lt_na_count: usize,
    pub lp_mean: Option<f64>,
    pub lp_std: Option<f64>,
    pub seconds_mean: f64,
}

impl From<&MetricSummary> for SummaryRow {
    fn from(s: &MetricSummary) -> Self {
        SummaryRow {
            world: s.world.clone(),
            model: s.model.clone(),
            algo: s.algo.clone(),
            start_mode: s.start_mode.clone(),
            runs: s.runs,
            lt_mean: s.lt_mean,
            lt_std: s.lt_std,
            lt_na_count: s.lt_na_count,
            lp_mean: s.lp_mean,
            lp_std: s.lp_std,
            seconds_mean: s.seconds_mean,
        }
    }
}

/// Parses a CSV produced by [`write_csv`].
pub fn read_csv(r: impl io::Read) -> io::Result<Vec<SummaryRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let rec = record?;
        let field = |i: usize| -> &str { rec.get(i).unwrap_or("") };
        let int = |i: usize| -> io::Result<usize> {
            field(i)
                .parse()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))
        };
        rows.push(SummaryRow {
            world: field(0).to_string(),
            model: field(1).to_string(),
            algo: field(2).to_string(),
            start_mode: field(3).to_string(),
            runs: int(4)?,
            lt_mean: parse_opt(field(5))?,
            lt_std: parse_opt(field(6))?,
            lt_na_count: int(7)?,
            lp_mean: parse_opt(field(8))?,
            lp_std: parse_opt(field(9))?,
            seconds_mean: field(10)
                .parse()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{e}")))?,
        });
    }
    Ok(rows)
}

fn fmt_pair(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.1}/{s:.1}"),
        _ => "NA".to_string(),
    }
}

/// Text table in the mean/stddev cell style of the result tables.
pub fn format_table(summaries: &[MetricSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:<6} {:<10} {:<7} {:>5} {:>16} {:>6} {:>16} {:>10}",
        "world", "model", "algo", "start", "runs", "learn_time", "nNA", "learn_perf", "secs"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<6} {:<6} {:<10} {:<7} {:>5} {:>16} {:>6} {:>16} {:>10.1}",
            s.world,
            s.model,
            s.algo,
            s.start_mode,
            s.runs,
            fmt_pair(s.lt_mean, s.lt_std),
            s.lt_na_count,
            fmt_pair(s.lp_mean, s.lp_std),
            s.seconds_mean,
        );
    }
    out
}

/// Mean reward per episode across runs (over the runs that reached each
/// episode index).
pub fn mean_curve(records: &[RunRecord]) -> Vec<f64> {
    let longest = records.iter().map(|r| r.rewards.len()).max().unwrap_or(0);
    (0..longest)
        .map(|e| {
            let vals: Vec<f64> = records
                .iter()
                .filter_map(|r| r.rewards.get(e))
                .copied()
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}

/// Writes a per-episode mean-reward curve as a standalone SVG.
pub fn write_svg(curve: &[f64], title: &str, w: &mut impl io::Write) -> io::Result<()> {
    let (width, height, margin) = (900.0, 420.0, 50.0);
    let n = curve.len().max(1);
    let y_min = curve.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let y_max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let y_span = (y_max - y_min).max(1e-9);
    let sx = |i: usize| margin + (width - 2.0 * margin) * i as f64 / (n.max(2) - 1) as f64;
    let sy = |v: f64| height - margin - (height - 2.0 * margin) * (v - y_min) / y_span;

    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )?;
    writeln!(
        w,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    )?;
    writeln!(
        w,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        width / 2.0
    )?;
    // axes
    writeln!(
        w,
        r#"<line x1="{m}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#,
        m = margin,
        y0 = height - margin,
        x1 = width - margin
    )?;
    writeln!(
        w,
        r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{y0}" stroke="black"/>"#,
        m = margin,
        y0 = height - margin
    )?;
    writeln!(
        w,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">episode</text>"#,
        width - margin - 40.0,
        height - margin + 30.0
    )?;
    for (label, v) in [(y_min, y_min), (y_max, y_max)] {
        let _ = label;
        writeln!(
            w,
            r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="11">{v:.0}</text>"#,
            sy(v) + 4.0
        )?;
    }
    if !curve.is_empty() {
        let mut points = String::new();
        for (i, v) in curve.iter().enumerate() {
            let _ = write!(points, "{:.2},{:.2} ", sx(i), sy(*v));
        }
        writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1"/>"#,
            points.trim_end()
        )?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

/// Output format for [`emit_results`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Table,
    Svg,
}

impl OutputFormat {
    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "table" => Some(OutputFormat::Table),
            "svg" => Some(OutputFormat::Svg),
            _ => None,
        }
    }
}

/// Results for one configuration: the aggregate plus its raw runs.
pub struct ExperimentResult {
    pub summary: MetricSummary,
    pub records: Vec<RunRecord>,
    pub label: String,
}

/// Emits results under `out_dir`: `results.csv` for CSV, `results.txt`
/// (plus stdout) for the table, one `curve_<label>.svg` per configuration
/// (plus the CSV) for SVG.
pub fn emit_results(
    results: &[ExperimentResult],
    format: OutputFormat,
    out_dir: &Path,
) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    let summaries: Vec<MetricSummary> = results.iter().map(|r| r.summary.clone()).collect();
    match format {
        OutputFormat::Csv => {
            let f = fs::File::create(out_dir.join("results.csv"))?;
            write_csv(&summaries, f)?;
        }
        OutputFormat::Table => {
            let table = format_table(&summaries);
            fs::write(out_dir.join("results.txt"), &table)?;
            print!("{table}");
        }
        OutputFormat::Svg => {
            let f = fs::File::create(out_dir.join("results.csv"))?;
            write_csv(&summaries, f)?;
            for r in results {
                let curve = mean_curve(&r.records);
                let mut f = fs::File::create(out_dir.join(format!("curve_{}.svg", r.label)))?;
                write_svg(&curve, &r.label, &mut f)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(lt: Option<f64>) -> MetricSummary {
        MetricSummary {
            world: "gw".into(),
            model: "gru".into(),
            algo: "advantage".into(),
            start_mode: "fixed".into(),
            runs: 3,
            lt_per_run: vec![Some(10), Some(20), None],
            lp_per_run: vec![Some(-1.0), Some(-2.5), Some(-3.25)],
            lt_mean: lt,
            lt_std: lt.map(|_| 5.0e-1),
            lt_na_count: 1,
            lp_mean: Some(-2.25),
            lp_std: Some(0.9274260335029676),
            seconds_mean: 1.5,
        }
    }

    #[test]
    fn empty_summary_list_gives_header_only_csv() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.trim(), CSV_HEADER.join(","));
    }

    #[test]
    fn na_learning_time_appears_as_literal_na() {
        let mut buf = Vec::new();
        write_csv(&[summary(None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        assert!(data_line.contains(",NA,NA,"), "line: {data_line}");
    }

    #[test]
    fn csv_round_trips_exactly() {
        let s = summary(Some(15.333333333333334));
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&s), &mut buf).unwrap();
        let rows = read_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0], SummaryRow::from(&s));
    }

    #[test]
    fn table_uses_mean_stddev_cells() {
        let text = format_table(&[summary(Some(216.0))]);
        assert!(text.contains("216.0/0.5"));
        let text = format_table(&[summary(None)]);
        assert!(text.contains("NA"));
    }

    #[test]
    fn mean_curve_averages_available_runs() {
        let rec = |rewards: Vec<f64>| RunRecord {
            seed: 0,
            rewards,
            seconds: 0.0,
            train_rounds: 0,
            diverged: None,
        };
        let curve = mean_curve(&[rec(vec![0.0, 2.0, 4.0]), rec(vec![2.0])]);
        assert_eq!(curve, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let mut buf = Vec::new();
        write_svg(&[0.0, -1.0, -2.0, 0.5], "demo", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("<polyline"));
        assert!(text.trim_end().ends_with("</svg>"));
    }
}
