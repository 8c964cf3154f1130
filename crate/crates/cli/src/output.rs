//! CSV emission: header row, 17 significant digits, LF line endings.

use anyhow::{Context, Result};
use pgso_core::fmt::g17;
use pgso_core::train::{EpochRecord, TrainHistory};
use pgso_core::ParamSet;
use std::path::Path;

pub fn num(x: f64) -> String {
    g17(x)
}

pub fn opt(x: Option<f64>) -> String {
    x.map(g17).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("--out: cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().with_context(|| format!("--out: cannot write {}", path.display()))?;
    Ok(())
}

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

/// Columns of `history.csv`. Operator tuples beyond the first (per-layer
/// operators) append their parameters and bounds with a `_<layer>` suffix.
pub fn history_header(tuples: usize) -> Vec<String> {
    let mut h = header(&["epoch", "loss", "val_acc", "test_acc"]);
    h.extend(ParamSet::NAMES.iter().map(|s| s.to_string()));
    h.extend(header(&["support_lo", "support_hi", "clamps"]));
    for l in 1..tuples {
        h.extend(ParamSet::NAMES.iter().map(|s| format!("{s}_{l}")));
        h.push(format!("support_lo_{l}"));
        h.push(format!("support_hi_{l}"));
    }
    h
}

fn tuple_cols(r: &EpochRecord, l: usize, out: &mut Vec<String>) {
    out.extend(r.params[l].to_array().iter().map(|&v| num(v)));
    let t = r.telemetry.get(l);
    out.push(opt(t.map(|t| t.support_lo)));
    out.push(opt(t.map(|t| t.support_hi)));
}

pub fn history_rows(h: &TrainHistory) -> Vec<Vec<String>> {
    h.records
        .iter()
        .map(|r| {
            let mut row = vec![r.epoch.to_string(), num(r.loss), num(r.val_acc), num(r.test_acc)];
            tuple_cols(r, 0, &mut row);
            row.push(r.clamps.to_string());
            for l in 1..r.params.len() {
                tuple_cols(r, l, &mut row);
            }
            row
        })
        .collect()
}

pub fn write_history(path: &Path, h: &TrainHistory) -> Result<()> {
    let tuples = h.records.first().map_or(1, |r| r.params.len());
    write_csv(path, &history_header(tuples), &history_rows(h))
}

/// Spectral telemetry rows for epochs with a computed spectrum.
pub fn spectra_rows(h: &TrainHistory) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in &h.records {
        for (l, t) in r.telemetry.iter().enumerate() {
            if t.lambda_min.is_some() {
                rows.push(vec![
                    r.epoch.to_string(),
                    l.to_string(),
                    opt(t.lambda_min),
                    opt(t.lambda_max),
                    num(t.support_lo),
                    num(t.support_hi),
                    t.contained.map(|c| c.to_string()).unwrap_or_default(),
                ]);
            }
        }
    }
    rows
}

pub fn write_spectra(path: &Path, h: &TrainHistory) -> Result<()> {
    let head = header(&["epoch", "layer", "lambda_min", "lambda_max", "support_lo", "support_hi", "contained"]);
    write_csv(path, &head, &spectra_rows(h))
}
