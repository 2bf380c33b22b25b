//! Eigenvalue snapshots of `G_tᵀG_t` taken during training.
//!
//! Snapshots reuse the singular values already computed by the preconditioner,
//! so capturing them costs no extra decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lowrank::Preconditioner;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSnapshot<T> {
    pub step: usize,
    /// `σᵢ²` in descending order, zero-padded to the window length.
    pub eigenvalues: Vec<T>,
    /// Smallest eigenvalue that survived truncation (`None` for an empty window).
    pub lambda_min_retained: Option<T>,
    pub lambda_max: T,
}

pub fn capture<T: Scalar>(p: &Preconditioner<T>, step: usize, r: usize) -> SpectrumSnapshot<T> {
    let mut eigenvalues: Vec<T> = p.sigma().iter().map(|&s| s * s).collect();
    let lambda_min_retained = eigenvalues.last().copied();
    let lambda_max = eigenvalues.first().copied().unwrap_or(T::zero());
    eigenvalues.resize(r.max(eigenvalues.len()), T::zero());
    SpectrumSnapshot {
        step,
        eigenvalues,
        lambda_min_retained,
        lambda_max,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumber<T> {
    pub value: T,
    /// The smallest retained eigenvalue was missing or below `floor`.
    pub floored: bool,
}

/// `λ_max / max(λ_min_retained, floor)`.
pub fn condition_number<T: Scalar>(s: &SpectrumSnapshot<T>, floor: T) -> ConditionNumber<T> {
    let min = s.lambda_min_retained.unwrap_or(T::zero());
    let floored = min < floor;
    ConditionNumber {
        value: s.lambda_max / min.max(floor),
        floored,
    }
}

/// Running median with an odd window; near the edges the window shrinks
/// symmetrically.
pub fn median_filter<T: Scalar>(series: &[T], filter_len: usize) -> Result<Vec<T>> {
    if filter_len == 0 || filter_len.is_multiple_of(2) {
        return Err(invalid(
            "filter_len",
            format!("must be odd and >= 1, got {filter_len}"),
        ));
    }
    let n = series.len();
    let h = filter_len / 2;
    let mut buf = Vec::with_capacity(filter_len);
    Ok((0..n)
        .map(|i| {
            let half = h.min(i).min(n - 1 - i);
            buf.clear();
            buf.extend_from_slice(&series[i - half..=i + half]);
            buf.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            buf[half]
        })
        .collect())
}

/// Median-filtered series of the smallest retained and the largest eigenvalue.
pub fn minmax_series<T: Scalar>(
    snapshots: &[SpectrumSnapshot<T>],
    filter_len: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let mins: Vec<T> = snapshots
        .iter()
        .map(|s| s.lambda_min_retained.unwrap_or(T::zero()))
        .collect();
    let maxs: Vec<T> = snapshots.iter().map(|s| s.lambda_max).collect();
    Ok((
        median_filter(&mins, filter_len)?,
        median_filter(&maxs, filter_len)?,
    ))
}

/// Per-snapshot histogram of `log₁₀ λ` over fixed bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    /// `bins + 1` edges in log₁₀ units.
    pub edges: Vec<f64>,
    pub rows: Vec<DensityRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub step: usize,
    pub counts: Vec<u64>,
}

/// Histogram of log₁₀ of the nonzero eigenvalues of each snapshot.
///
/// Values outside `log_range` are counted in the nearest edge bin so that each
/// row sums to the number of nonzero eigenvalues.
pub fn density_histogram<T: Scalar>(
    snapshots: &[SpectrumSnapshot<T>],
    bins: usize,
    log_range: (f64, f64),
) -> Result<DensityGrid> {
    let (lo, hi) = log_range;
    if bins == 0 {
        return Err(invalid("bins", "must be >= 1"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(
            "log_range",
            format!("need finite lo < hi, got ({lo}, {hi})"),
        ));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let rows = snapshots
        .iter()
        .map(|s| {
            let mut counts = vec![0u64; bins];
            for &l in &s.eigenvalues {
                let l = l.as_f64();
                if l > 0.0 {
                    let pos = ((l.log10() - lo) / width).floor();
                    let idx = pos.clamp(0.0, (bins - 1) as f64) as usize;
                    counts[idx] += 1;
                }
            }
            DensityRow {
                step: s.step,
                counts,
            }
        })
        .collect();
    Ok(DensityGrid { edges, rows })
}

/// Smallest and largest `log₁₀` of any nonzero eigenvalue, for automatic ranges.
pub fn log10_extent<T: Scalar>(snapshots: &[SpectrumSnapshot<T>]) -> Option<(f64, f64)> {
    let mut ext: Option<(f64, f64)> = None;
    for l in snapshots.iter().flat_map(|s| s.eigenvalues.iter()) {
        let l = l.as_f64();
        if l > 0.0 {
            let v = l.log10();
            ext = Some(match ext {
                None => (v, v),
                Some((a, b)) => (a.min(v), b.max(v)),
            });
        }
    }
    ext
}
