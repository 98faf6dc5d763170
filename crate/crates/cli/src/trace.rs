//! JSON-lines iteration traces and their conversion to plot-ready CSV.

use std::io::{BufRead, Write};

use alin_core::IterationRecord;

use crate::error::{CliError, CliResult};

pub fn write_trace<W: Write>(records: &[IterationRecord], mut w: W) -> CliResult<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Blank lines are skipped.
pub fn read_trace<R: BufRead>(r: R) -> CliResult<Vec<IterationRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| CliError::Trace {
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub k: usize,
    pub objective: f64,
    /// `log₁₀((𝓛 − 𝓛*) / max(1, |𝓛*|))`, floored at `-16`.
    pub log_error: f64,
}

/// Error of each iterate against `reference`, or against the best
/// objective in the trace when no reference is given.
pub fn plot_rows(records: &[IterationRecord], reference: Option<f64>) -> Vec<PlotRow> {
    let best = reference.unwrap_or_else(|| {
        records
            .iter()
            .map(|r| r.objective)
            .fold(f64::INFINITY, f64::min)
    });
    records
        .iter()
        .map(|r| {
            let rel = (r.objective - best).max(0.0) / best.abs().max(1.0);
            PlotRow {
                k: r.k,
                objective: r.objective,
                log_error: rel.log10().max(-16.0),
            }
        })
        .collect()
}

pub fn write_plot_csv<W: Write>(rows: &[PlotRow], w: W) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "objective", "log10_rel_error"])?;
    for row in rows {
        out.write_record([
            row.k.to_string(),
            format!("{:e}", row.objective),
            format!("{:.6}", row.log_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}
