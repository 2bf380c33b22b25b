//! Summaries and rankings of training traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::trace::{read_trace, write_csv, TraceRow};

/// Median of the finite-or-infinite values; NaNs sort last. Even counts take
/// the midpoint of the two central values.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a == b {
            a
        } else {
            a + (b - a) / 2.0
        }
    }
}

pub const CHECKPOINTS: [f64; 3] = [0.1, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub rank: usize,
    pub label: String,
    pub seeds: usize,
    pub median_final_loss: f64,
    /// Median loss at 10%, 50% and 100% of the steps.
    pub loss_10pct: f64,
    pub loss_50pct: f64,
    pub loss_100pct: f64,
    /// Median over seeds of `∫ log₁₀ loss d(step)` (trapezoid rule); empty when
    /// some loss is not positive.
    pub auc_log10_loss: Option<f64>,
}

fn by_seed(rows: &[TraceRow]) -> BTreeMap<u64, Vec<TraceRow>> {
    let mut m: BTreeMap<u64, Vec<TraceRow>> = BTreeMap::new();
    for r in rows {
        m.entry(r.seed).or_default().push(*r);
    }
    m
}

/// Loss at the last logged step not after `step`.
fn loss_at(rows: &[TraceRow], step: usize) -> f64 {
    rows.iter()
        .take_while(|r| r.step <= step)
        .last()
        .map_or(f64::NAN, |r| r.loss)
}

fn auc(rows: &[TraceRow]) -> Option<f64> {
    if rows.iter().any(|r| !(r.loss > 0.0)) {
        return None;
    }
    Some(
        rows.windows(2)
            .map(|w| 0.5 * (w[0].loss.log10() + w[1].loss.log10()) * (w[1].step - w[0].step) as f64)
            .sum(),
    )
}

pub fn summarize(label: &str, rows: &[TraceRow]) -> TraceSummary {
    let seeds = by_seed(rows);
    let last_step = rows.iter().map(|r| r.step).max().unwrap_or(0);
    let finals: Vec<f64> = seeds
        .values()
        .map(|s| s.last().map_or(f64::NAN, |r| r.loss))
        .collect();
    let cp: Vec<f64> = CHECKPOINTS
        .iter()
        .map(|f| {
            let step = (f * last_step as f64).round() as usize;
            median(&seeds.values().map(|s| loss_at(s, step)).collect::<Vec<_>>())
        })
        .collect();
    let aucs: Option<Vec<f64>> = seeds.values().map(|s| auc(s)).collect();
    TraceSummary {
        rank: 0,
        label: label.to_string(),
        seeds: seeds.len(),
        median_final_loss: median(&finals),
        loss_10pct: cp[0],
        loss_50pct: cp[1],
        loss_100pct: cp[2],
        auc_log10_loss: aucs.filter(|a| !a.is_empty()).map(|a| median(&a)),
    }
}

/// Summaries ranked by median final loss, lowest first. Equal medians share a
/// rank and keep their input order; NaN medians rank last.
pub fn rank(traces: &[(String, Vec<TraceRow>)]) -> Vec<TraceSummary> {
    let mut out: Vec<TraceSummary> = traces.iter().map(|(l, r)| summarize(l, r)).collect();
    out.sort_by(|a, b| a.median_final_loss.total_cmp(&b.median_final_loss));
    for i in 0..out.len() {
        out[i].rank = if i > 0
            && out[i]
                .median_final_loss
                .total_cmp(&out[i - 1].median_final_loss)
                .is_eq()
        {
            out[i - 1].rank
        } else {
            i + 1
        };
    }
    out
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "rank",
    "label",
    "seeds",
    "median_final_loss",
    "loss_10pct",
    "loss_50pct",
    "loss_100pct",
    "auc_log10_loss",
];

pub fn write_summary_csv(path: &Path, rows: &[TraceSummary]) -> Result<()> {
    write_csv(path, &SUMMARY_HEADER, rows)
}

pub fn text_table(rows: &[TraceSummary]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|s| {
            vec![
                s.rank.to_string(),
                s.label.clone(),
                s.seeds.to_string(),
                format!("{:.6e}", s.median_final_loss),
                format!("{:.6e}", s.loss_10pct),
                format!("{:.6e}", s.loss_50pct),
                format!("{:.6e}", s.loss_100pct),
                s.auc_log10_loss.map_or("-".into(), |a| format!("{a:.4}")),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..SUMMARY_HEADER.len())
        .map(|c| {
            cells
                .iter()
                .map(|r| r[c].len())
                .chain([SUMMARY_HEADER[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let parts: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                if c == 1 {
                    format!("{s:<w$}")
                } else {
                    format!("{s:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &SUMMARY_HEADER);
    for r in &cells {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Reads traces (labelled by path) and ranks them.
pub fn compare_files(paths: &[impl AsRef<Path>]) -> Result<Vec<TraceSummary>> {
    if paths.is_empty() {
        return Err(crate::error::config_err("compare needs at least one trace"));
    }
    let traces = paths
        .iter()
        .map(|p| {
            let rows = read_trace(p.as_ref())?;
            if rows.is_empty() {
                return Err(HarnessError::Trace {
                    path: p.as_ref().into(),
                    reason: "no rows".into(),
                });
            }
            Ok((p.as_ref().display().to_string(), rows))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank(&traces))
}
