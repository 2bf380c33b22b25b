#![allow(dead_code)]

use ggt_core::problems::StochasticOracle;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut r))
}

pub fn gaussian_vec(d: usize, seed: u64) -> Array1<f64> {
    let mut r = rng(seed);
    Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut r))
}

pub fn rel_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let diff = (a - b).mapv(|v| v * v).sum().sqrt();
    let base = b.mapv(|v| v * v).sum().sqrt();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

pub fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest relative error of the analytic gradient against central differences
/// with step `1e-6·(1 + |xᵢ|)`, measured per coordinate against `max(|g|_∞, 1e-3)`.
pub fn finite_difference_error<O: StochasticOracle<f64> + ?Sized>(
    oracle: &O,
    x: &Array1<f64>,
) -> f64 {
    let g = oracle.gradient(x.view()).unwrap();
    let scale = g.iter().fold(1e-3f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fd = (oracle.loss(xp.view()).unwrap() - oracle.loss(xm.view()).unwrap()) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    worst
}

#[allow(dead_code)]
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}
