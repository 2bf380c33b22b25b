//! Wall-clock cost of one GGT step as a function of `d` and `r`.

use std::path::Path;
use std::time::Instant;

use ggt_core::linalg::gaussian_matrix;
use ggt_core::optimizers::{Ggt, GgtConfig, Optimizer};
use ndarray::Array2;
use serde::Serialize;

use crate::compare::median;
use crate::error::{config_err, Result};
use crate::rng::stream;
use crate::trace::write_csv;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub d: usize,
    pub r: usize,
    pub median_ns: u64,
}

/// Median over `reps` of the time per `ggt` update with a full window. Each
/// repetition times a batch of updates long enough to dwarf timer resolution.
pub fn bench_step_cost(d_list: &[usize], r_list: &[usize], reps: usize) -> Result<Vec<BenchRow>> {
    if d_list.is_empty() || r_list.is_empty() || reps == 0 {
        return Err(config_err(
            "bench needs non-empty d and r lists and reps >= 1",
        ));
    }
    if d_list.contains(&0) || r_list.contains(&0) {
        return Err(config_err("bench dimensions must be >= 1"));
    }
    let mut rows = Vec::new();
    for &d in d_list {
        for &r in r_list {
            let mut rng = stream(0, (d as u64) << 32 | r as u64, "bench");
            let grads: Array2<f64> = gaussian_matrix(d, 2 * r + 8, &mut rng);
            let mut opt = Ggt::new(d, GgtConfig::plain(1e-3, 1e-4, r))?;
            for g in grads.columns().into_iter().take(r) {
                opt.update(g)?;
            }
            // batch so that one repetition does roughly 2e7 multiply-adds
            let work = (d * r * r + r * r * r).max(1);
            let batch = (20_000_000 / work).clamp(1, 1000);
            let mut times = Vec::with_capacity(reps);
            let mut col = 0;
            // one untimed repetition warms caches and the allocator
            for rep in 0..=reps {
                let start = Instant::now();
                for _ in 0..batch {
                    opt.update(grads.column(r + col % (r + 8)))?;
                    col += 1;
                }
                if rep > 0 {
                    times.push(start.elapsed().as_nanos() as f64 / batch as f64);
                }
            }
            rows.push(BenchRow {
                d,
                r,
                median_ns: median(&times).round() as u64,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<()> {
    write_csv(path, &["d", "r", "median_ns"], rows)
}
