//! Stochastic gradient oracles for the synthetic benchmarks.
//!
//! Every oracle is immutable after construction. Sampling takes an explicit
//! RNG handle, so runs on different threads never share generator state and
//! the same `(seed, call sequence)` reproduces the same samples bit for bit.

mod barrier;
mod data;
mod hinge;
mod logreg;
mod mlp;
mod quadratic;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, RngCore};

pub use barrier::{make_barrier, LogBarrier};
pub use data::{make_anisotropic_gaussian, random_unit_vector};
pub use hinge::{make_hinge_adaptivity, HingeAdaptivity};
pub use logreg::{make_logreg, LogisticRegression};
pub use mlp::{make_mlp, Mlp, MLP_INPUT_DIM, MLP_MAX_PARAMS};
pub use quadratic::{make_quadratic, Quadratic};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub trait StochasticOracle<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Unbiased minibatch estimate of the gradient at `x`.
    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>>;

    /// Exact objective.
    fn loss(&self, x: ArrayView1<T>) -> Result<T>;

    /// Exact gradient.
    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>>;

    fn is_feasible(&self, _x: ArrayView1<T>) -> bool {
        true
    }

    /// Upper bound `L` on `‖∇²f‖₂`, when known.
    fn smoothness_hint(&self) -> Option<T> {
        None
    }

    /// Strong-convexity modulus, when known.
    fn strong_convexity_hint(&self) -> Option<T> {
        None
    }

    /// Per-sample gradient-noise level `E‖∇̃f − ∇f‖²`, when known.
    fn variance_hint(&self) -> Option<T> {
        None
    }

    /// Exact Hessian, for oracles that provide one.
    fn hessian(&self, _x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        None
    }
}

impl<T: Scalar, O: StochasticOracle<T> + ?Sized> StochasticOracle<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        (**self).sample_gradient(x, rng, batch_size)
    }
    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        (**self).loss(x)
    }
    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        (**self).gradient(x)
    }
    fn is_feasible(&self, x: ArrayView1<T>) -> bool {
        (**self).is_feasible(x)
    }
    fn smoothness_hint(&self) -> Option<T> {
        (**self).smoothness_hint()
    }
    fn strong_convexity_hint(&self) -> Option<T> {
        (**self).strong_convexity_hint()
    }
    fn variance_hint(&self) -> Option<T> {
        (**self).variance_hint()
    }
    fn hessian(&self, x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        (**self).hessian(x)
    }
}

impl<T: Scalar> StochasticOracle<T> for Box<dyn StochasticOracle<T>> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        (**self).sample_gradient(x, rng, batch_size)
    }
    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        (**self).loss(x)
    }
    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        (**self).gradient(x)
    }
    fn is_feasible(&self, x: ArrayView1<T>) -> bool {
        (**self).is_feasible(x)
    }
    fn smoothness_hint(&self) -> Option<T> {
        (**self).smoothness_hint()
    }
    fn strong_convexity_hint(&self) -> Option<T> {
        (**self).strong_convexity_hint()
    }
    fn variance_hint(&self) -> Option<T> {
        (**self).variance_hint()
    }
    fn hessian(&self, x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        (**self).hessian(x)
    }
}

pub(crate) fn check_point<T: Scalar>(dim: usize, x: ArrayView1<T>) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("oracle query point".into()));
    }
    Ok(())
}

pub(crate) fn check_batch(batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(invalid("batch_size", "must be >= 1"));
    }
    Ok(())
}

/// Averages per-example gradients over a uniform minibatch drawn with replacement.
pub(crate) fn minibatch_mean<T: Scalar>(
    n: usize,
    dim: usize,
    rng: &mut dyn RngCore,
    batch_size: usize,
    mut per_example: impl FnMut(usize, &mut Array1<T>) -> Result<()>,
) -> Result<Array1<T>> {
    check_batch(batch_size)?;
    let mut acc = Array1::zeros(dim);
    for _ in 0..batch_size {
        let i = rng.random_range(0..n);
        per_example(i, &mut acc)?;
    }
    let inv = T::one() / T::lit(batch_size as f64);
    acc.mapv_inplace(|v| v * inv);
    Ok(acc)
}
