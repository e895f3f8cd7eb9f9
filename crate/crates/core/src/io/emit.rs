//! Trace serialization: CSV data, a JSON metadata sidecar, and an SVG
//! heatmap of the label histogram over (log) iterations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::engine::{EngineConfig, Trace};
use crate::error::{Error, Result};
use crate::io::scenario::scenario_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonMeta,
    SvgHeatmap,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::JsonMeta, Format::SvgHeatmap];

    pub fn file_name(self) -> &'static str {
        match self {
            Format::Csv => "trace.csv",
            Format::JsonMeta => "trace.json",
            Format::SvgHeatmap => "heatmap.svg",
        }
    }
}

fn non_empty(trace: &Trace) -> Result<()> {
    if trace.records.is_empty() {
        return Err(Error::Validation("cannot emit an empty trace".into()));
    }
    Ok(())
}

/// One row per (record, market).
pub fn csv_string(trace: &Trace) -> Result<String> {
    non_empty(trace)?;
    let mut out = String::from("iteration,clock,market");
    for b in 0..trace.bins {
        write!(out, ",bin_{b}").unwrap();
    }
    out.push_str(",K_n,herfindahl,max_share,events_new,events_cross,events_within\n");
    for record in &trace.records {
        for (name, m) in trace.market_names.iter().zip(&record.markets) {
            write!(out, "{},", record.iteration).unwrap();
            if let Some(clock) = record.clock {
                write!(out, "{clock}").unwrap();
            }
            write!(out, ",{name}").unwrap();
            for c in &m.histogram.counts {
                write!(out, ",{c}").unwrap();
            }
            writeln!(
                out,
                ",{},{},{},{},{},{}",
                m.firm_count, m.herfindahl, m.max_share, m.events.new_firm, m.events.cross, m.events.within
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// Resolved configuration, seed and trace shape.
pub fn json_meta(trace: &Trace, config: &EngineConfig) -> Result<String> {
    non_empty(trace)?;
    let scenario = match scenario_file(config) {
        Ok(file) => serde_json::to_value(file).map_err(|e| Error::Scenario(e.to_string()))?,
        Err(_) => serde_json::Value::Null,
    };
    let meta = json!({
        "seed": config.seed,
        "n": trace.n,
        "bins": trace.bins,
        "markets": trace.market_names,
        "iterations": config.iterations,
        "retained": trace.records.iter().map(|r| r.iteration).collect::<Vec<_>>(),
        "iteration_unit": "single-unit update",
        "config": scenario,
    });
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Scenario(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// One panel per market: label bins left to right, iterations bottom to top
/// on a log scale, cell shade proportional to the share in the bin.
pub fn svg_heatmap(trace: &Trace) -> Result<String> {
    non_empty(trace)?;
    let markets = trace.market_names.len();
    let width = MARGIN + markets as f64 * (PANEL_W + MARGIN);
    let height = PANEL_H + 2.0 * MARGIN;
    let first = trace.records[0].iteration.max(1) as f64;
    let last = trace.records.last().unwrap().iteration.max(1) as f64;
    let log_span = (last.ln() - first.ln()).max(f64::MIN_POSITIVE);
    // Row r covers [log t_r, log t_{r+1}); the final row gets the average height.
    let levels: Vec<f64> = trace
        .records
        .iter()
        .map(|r| (r.iteration.max(1) as f64).ln() - first.ln())
        .collect();
    let step = if levels.len() > 1 { log_span / (levels.len() - 1) as f64 } else { 1.0 };
    let total = levels.last().unwrap() + step;
    let y_of = |level: f64| MARGIN + PANEL_H * (1.0 - level / total);
    let cell_w = PANEL_W / trace.bins as f64;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (m, name) in trace.market_names.iter().enumerate() {
        let x0 = MARGIN + m as f64 * (PANEL_W + MARGIN);
        writeln!(out, r#"<g id="market-{name}">"#).unwrap();
        for (r, record) in trace.records.iter().enumerate() {
            let top = y_of(levels.get(r + 1).copied().unwrap_or(total));
            let bottom = y_of(levels[r]);
            for (b, &count) in record.markets[m].histogram.counts.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let shade = 255.0 * (1.0 - count as f64 / trace.n as f64);
                writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({:.0},{:.0},255)"/>"#,
                    x0 + b as f64 * cell_w,
                    top,
                    cell_w,
                    bottom - top,
                    shade,
                    shade
                )
                .unwrap();
            }
        }
        writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{MARGIN:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="black"/>"#
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">market {name}</text>"#,
            x0 + PANEL_W / 2.0,
            MARGIN - 15.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">label</text>"#,
            x0 + PANEL_W / 2.0,
            MARGIN + PANEL_H + 20.0
        )
        .unwrap();
        let mut decade = 10f64.powf(first.log10().ceil());
        while decade <= last {
            let y = y_of(decade.ln() - first.ln());
            writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">1e{:.0}</text>"#,
                x0 - 4.0,
                y + 3.0,
                decade.log10()
            )
            .unwrap();
            decade *= 10.0;
        }
        writeln!(out, "</g>").unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    Ok(out)
}

/// Writes the requested formats into `dir`, creating it if needed.
pub fn emit_trace(trace: &Trace, config: &EngineConfig, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(formats.len());
    for &format in formats {
        let body = match format {
            Format::Csv => csv_string(trace)?,
            Format::JsonMeta => json_meta(trace, config)?,
            Format::SvgHeatmap => svg_heatmap(trace)?,
        };
        let path = dir.join(format.file_name());
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
