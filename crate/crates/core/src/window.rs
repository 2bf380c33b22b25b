//! Sliding window of the last `r` gradients, attenuated by `β₂` per step of age.
//!
//! After pushes `g_1, …, g_t` the logical window is
//! `[g_t, β₂ g_{t−1}, …, β₂^{r−1} g_{t−r+1}]`, with zero columns for ages `k ≥ t`.
//!
//! Attenuation is lazy. Stored columns are scaled by a single running
//! multiplier `m = β₂^age_offset`: reads multiply by `m` and a new column is
//! stored as `g / m`. When `m` drops below an underflow guard the multiplier is
//! folded into the buffer and reset to one.

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};

use crate::error::{invalid, Error, Result};
use crate::lowrank::LowRankFactor;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GradientWindow<T> {
    buffer: Array2<T>,
    head: usize,
    fill: usize,
    pushes: usize,
    beta2: T,
    scale: T,
}

impl<T: Scalar> GradientWindow<T> {
    pub fn new(d: usize, r: usize, beta2: T) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be >= 1"));
        }
        if r == 0 {
            return Err(invalid("window_size", "must be >= 1"));
        }
        if !(beta2 > T::zero() && beta2 <= T::one()) {
            return Err(invalid("beta2", format!("must lie in (0, 1], got {beta2}")));
        }
        Ok(Self {
            buffer: Array2::zeros((d, r).f()),
            head: r - 1,
            fill: 0,
            pushes: 0,
            beta2,
            scale: T::one(),
        })
    }

    pub fn dim(&self) -> usize {
        self.buffer.nrows()
    }

    pub fn window_size(&self) -> usize {
        self.buffer.ncols()
    }

    /// Number of stored columns (saturates at `r`).
    pub fn fill(&self) -> usize {
        self.fill
    }

    /// Total number of gradients pushed so far.
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn beta2(&self) -> T {
        self.beta2
    }

    /// Number of scalars held by the column buffer (always `d · r`).
    pub fn storage_len(&self) -> usize {
        self.buffer.len()
    }

    fn underflow_guard() -> T {
        let wanted = T::from_f64(1e-150).unwrap_or_else(T::zero);
        wanted.max(T::min_positive_value().sqrt())
    }

    fn materialize(&mut self) {
        let s = self.scale;
        self.buffer.mapv_inplace(|x| x * s);
        self.scale = T::one();
    }

    pub fn push(&mut self, g: ArrayView1<T>) -> Result<()> {
        if g.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient {
                step: self.pushes + 1,
            });
        }
        if self.beta2 < T::one() {
            self.scale *= self.beta2;
            if self.scale < Self::underflow_guard() {
                self.materialize();
            }
        }
        let slot = (self.head + 1) % self.window_size();
        let mut stored = g.mapv(|x| x / self.scale);
        if stored.iter().any(|x| !x.is_finite()) {
            self.materialize();
            stored = g.to_owned();
        }
        self.buffer.column_mut(slot).assign(&stored);
        self.head = slot;
        self.fill = (self.fill + 1).min(self.window_size());
        self.pushes += 1;
        Ok(())
    }

    /// The window in storage order (a fixed cyclic permutation of age order).
    pub fn as_factor(&self) -> LowRankFactor<T> {
        let s = self.scale;
        LowRankFactor::new(self.buffer.mapv(|x| x * s))
            .expect("window buffer holds finite values of valid shape")
    }

    /// The window with column `k` holding the gradient of age `k`.
    pub fn logical_matrix(&self) -> Array2<T> {
        let (d, r) = self.buffer.dim();
        let mut out = Array2::zeros((d, r).f());
        for age in 0..self.fill {
            let slot = (self.head + r - age) % r;
            let s = self.scale;
            out.column_mut(age)
                .assign(&self.buffer.column(slot).mapv(|x| x * s));
        }
        out
    }

    /// `diag(G Gᵀ)`: per-coordinate sum of squares across the window.
    pub fn row_norms_sq(&self) -> Array1<T> {
        let s2 = self.scale * self.scale;
        self.buffer
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&x| x * x).sum::<T>() * s2)
            .collect()
    }
}
