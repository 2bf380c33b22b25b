use ndarray::{Array1, Array2, ArrayView1};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_batch, check_point, StochasticOracle};
use crate::error::{invalid, Result};
use crate::linalg::{random_orthogonal, standard_normal};
use crate::scalar::Scalar;

/// `f(x) = ½ xᵀAx` with `A = Q diag(spectrum) Qᵀ` and additive Gaussian
/// gradient noise `ξ ~ N(0, ν² I)` per sample.
#[derive(Debug, Clone)]
pub struct Quadratic<T> {
    matrix: Array2<T>,
    spectrum: Vec<T>,
    noise: T,
}

pub fn make_quadratic<T: Scalar>(spectrum: &[T], noise: T, seed: u64) -> Result<Quadratic<T>> {
    if spectrum.is_empty() {
        return Err(invalid("spectrum", "must be non-empty"));
    }
    if spectrum
        .iter()
        .any(|&l| !(l >= T::zero()) || !l.is_finite())
    {
        return Err(invalid("spectrum", "entries must be finite and >= 0"));
    }
    if !(noise >= T::zero()) || !noise.is_finite() {
        return Err(invalid(
            "noise",
            format!("must be finite and >= 0, got {noise}"),
        ));
    }
    let d = spectrum.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q: Array2<T> = random_orthogonal(d, &mut rng);
    let diag = Array1::from_vec(spectrum.to_vec());
    let matrix = crate::linalg::symmetrize((&q * &diag).dot(&q.t()).view());
    Ok(Quadratic {
        matrix,
        spectrum: spectrum.to_vec(),
        noise,
    })
}

impl<T: Scalar> Quadratic<T> {
    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &[T] {
        &self.spectrum
    }

    pub fn noise(&self) -> T {
        self.noise
    }

    /// The unique minimizer when the spectrum is positive.
    pub fn minimizer(&self) -> Array1<T> {
        Array1::zeros(self.spectrum.len())
    }
}

impl<T: Scalar> StochasticOracle<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        check_batch(batch_size)?;
        let mut g = self.matrix.dot(&x);
        if self.noise > T::zero() {
            let scale = self.noise / T::lit(batch_size as f64);
            for _ in 0..batch_size {
                for v in g.iter_mut() {
                    *v += scale * standard_normal::<T, _>(rng);
                }
            }
        }
        Ok(g)
    }

    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        check_point(self.dim(), x)?;
        Ok(T::lit(0.5) * x.dot(&self.matrix.dot(&x)))
    }

    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        Ok(self.matrix.dot(&x))
    }

    fn smoothness_hint(&self) -> Option<T> {
        self.spectrum.iter().cloned().reduce(T::max)
    }

    fn strong_convexity_hint(&self) -> Option<T> {
        self.spectrum.iter().cloned().reduce(T::min)
    }

    fn variance_hint(&self) -> Option<T> {
        Some(T::lit(self.dim() as f64) * self.noise * self.noise)
    }

    fn hessian(&self, x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        Some(check_point(self.dim(), x).map(|_| self.matrix.clone()))
    }
}
