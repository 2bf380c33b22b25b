use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_point, make_anisotropic_gaussian, minibatch_mean, StochasticOracle};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Logarithmic barrier of a random polytope, `f(w) = (1/n) Σ −log(wᵀxᵢ + cᵢ)`.
///
/// Its minimizer is the analytic center of `{w : wᵀxᵢ + cᵢ > 0}`. Outside that
/// set the loss and gradients are undefined and the oracle returns
/// [`Error::Infeasible`].
#[derive(Debug, Clone)]
pub struct LogBarrier<T> {
    directions: Array2<T>,
    offsets: Array1<T>,
}

/// Directions are anisotropic Gaussian rows; offsets are uniform on `(0, 1)`.
pub fn make_barrier<T: Scalar>(
    d: usize,
    n: usize,
    cond_ratio: f64,
    seed: u64,
) -> Result<LogBarrier<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Array2<T> = make_anisotropic_gaussian(d, n, cond_ratio, &mut rng)?;
    let offsets = (0..n)
        .map(|_| loop {
            let c: f64 = rng.random();
            if c > 0.0 {
                break T::lit(c);
            }
        })
        .collect();
    Ok(LogBarrier {
        directions,
        offsets,
    })
}

impl<T: Scalar> LogBarrier<T> {
    pub fn new(directions: Array2<T>, offsets: Array1<T>) -> Self {
        Self {
            directions,
            offsets,
        }
    }

    pub fn directions(&self) -> &Array2<T> {
        &self.directions
    }

    pub fn offsets(&self) -> &Array1<T> {
        &self.offsets
    }

    fn n(&self) -> usize {
        self.directions.nrows()
    }

    pub fn slacks(&self, w: ArrayView1<T>) -> Array1<T> {
        self.directions.dot(&w) + &self.offsets
    }

    fn feasible_slacks(&self, w: ArrayView1<T>) -> Result<Array1<T>> {
        check_point(self.dim(), w)?;
        let s = self.slacks(w);
        if let Some((i, v)) = s.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
            return Err(Error::Infeasible(format!("barrier slack {i} is {v}")));
        }
        Ok(s)
    }
}

impl<T: Scalar> StochasticOracle<T> for LogBarrier<T> {
    fn dim(&self) -> usize {
        self.directions.ncols()
    }

    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        self.feasible_slacks(x)?;
        minibatch_mean(self.n(), self.dim(), rng, batch_size, |i, acc| {
            let row = self.directions.row(i);
            let s = row.dot(&x) + self.offsets[i];
            acc.scaled_add(-T::one() / s, &row);
            Ok(())
        })
    }

    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        let s = self.feasible_slacks(x)?;
        let total: T = s.iter().map(|v| -v.ln()).sum();
        Ok(total / T::lit(self.n() as f64))
    }

    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let s = self.feasible_slacks(x)?;
        let weights = s.mapv(|v| -T::one() / v);
        Ok(self.directions.t().dot(&weights) / T::lit(self.n() as f64))
    }

    fn is_feasible(&self, x: ArrayView1<T>) -> bool {
        x.len() == self.dim() && self.slacks(x).iter().all(|&v| v > T::zero())
    }

    fn hessian(&self, x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        let s = match self.feasible_slacks(x) {
            Ok(s) => s,
            Err(e) => return Some(Err(e)),
        };
        let weighted = &self.directions / &s.view().insert_axis(ndarray::Axis(1));
        Some(Ok(weighted.t().dot(&weighted) / T::lit(self.n() as f64)))
    }
}
