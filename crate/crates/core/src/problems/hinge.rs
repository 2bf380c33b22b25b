use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_batch, check_point, StochasticOracle};
use crate::error::{invalid, Result};
use crate::linalg::{norm2, random_orthogonal};
use crate::scalar::Scalar;

/// Online hinge-loss sequence where full-matrix AdaGrad is far better than its
/// worst-case bound.
///
/// For `t = 1..T`, the example is `z_t = v_i` for the `i`-th contiguous block of
/// length `T/d`, where `v_i` are the columns of a random orthogonal `V`; the
/// label `y_t = sign(⟨1, Vᵀz_t⟩)` is always `+1`. The loss is
/// `f_t(x) = [1 − y_t⟨x, z_t⟩]₊` on the ball `‖x‖₂ ≤ √d`, minimized by
/// `x* = Σ v_i`.
///
/// As a [`StochasticOracle`], the objective is the average `(1/T) Σ f_t` and a
/// stochastic gradient is the subgradient of a uniformly drawn `f_t`.
#[derive(Debug, Clone)]
pub struct HingeAdaptivity<T> {
    basis: Array2<T>,
    horizon: usize,
}

pub fn make_hinge_adaptivity<T: Scalar>(
    d: usize,
    horizon: usize,
    seed: u64,
) -> Result<HingeAdaptivity<T>> {
    if d == 0 {
        return Err(invalid("d", "must be >= 1"));
    }
    if horizon == 0 || !horizon.is_multiple_of(d) {
        return Err(invalid(
            "T",
            format!("must be a positive multiple of d = {d}, got {horizon}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(HingeAdaptivity {
        basis: random_orthogonal(d, &mut rng),
        horizon,
    })
}

impl<T: Scalar> HingeAdaptivity<T> {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn basis(&self) -> &Array2<T> {
        &self.basis
    }

    fn block_len(&self) -> usize {
        self.horizon / self.basis.ncols()
    }

    /// `(z_t, y_t)` for `t` in `1..=T`.
    pub fn example(&self, t: usize) -> (ArrayView1<'_, T>, T) {
        assert!(
            (1..=self.horizon).contains(&t),
            "round {t} outside 1..={}",
            self.horizon
        );
        let z = self.basis.column((t - 1) / self.block_len());
        let y = if self.basis.t().dot(&z).sum() >= T::zero() {
            T::one()
        } else {
            -T::one()
        };
        (z, y)
    }

    fn margin(&self, t: usize, x: ArrayView1<T>) -> (T, ArrayView1<'_, T>, T) {
        let (z, y) = self.example(t);
        (y * z.dot(&x), z, y)
    }

    pub fn loss_at(&self, t: usize, x: ArrayView1<T>) -> T {
        let (m, _, _) = self.margin(t, x);
        (T::one() - m).max(T::zero())
    }

    /// Subgradient of `f_t`; zero whenever the margin is at least one, up to a
    /// few ulps so that an exactly reached kink is not re-triggered by rounding.
    pub fn subgradient_at(&self, t: usize, x: ArrayView1<T>) -> Array1<T> {
        let (m, z, y) = self.margin(t, x);
        if m >= T::one() - T::lit(16.0) * T::epsilon() {
            Array1::zeros(z.len())
        } else {
            z.mapv(|v| -y * v)
        }
    }

    /// `x* = Σ v_i`.
    pub fn comparator(&self) -> Array1<T> {
        self.basis.sum_axis(ndarray::Axis(1))
    }

    pub fn radius(&self) -> T {
        T::lit(self.basis.ncols() as f64).sqrt()
    }

    /// Euclidean projection onto `‖x‖₂ ≤ √d`.
    pub fn project(&self, x: &mut Array1<T>) {
        project_ball(x, self.radius());
    }
}

pub(crate) fn project_ball<T: Scalar>(x: &mut Array1<T>, radius: T) {
    let n = norm2(x.view());
    if n > radius {
        let s = radius / n;
        x.mapv_inplace(|v| v * s);
    }
}

impl<T: Scalar> StochasticOracle<T> for HingeAdaptivity<T> {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }

    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        check_batch(batch_size)?;
        let mut acc = Array1::zeros(self.dim());
        for _ in 0..batch_size {
            let t = rng.random_range(1..=self.horizon);
            acc += &self.subgradient_at(t, x);
        }
        Ok(acc / T::lit(batch_size as f64))
    }

    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        check_point(self.dim(), x)?;
        let total: T = (1..=self.horizon).map(|t| self.loss_at(t, x)).sum();
        Ok(total / T::lit(self.horizon as f64))
    }

    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        let mut acc = Array1::zeros(self.dim());
        for t in 1..=self.horizon {
            acc += &self.subgradient_at(t, x);
        }
        Ok(acc / T::lit(self.horizon as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_are_unit_columns_with_positive_labels() {
        let h = make_hinge_adaptivity::<f64>(4, 16, 0).unwrap();
        for t in 1..=16 {
            let (z, y) = h.example(t);
            assert!((z.dot(&z) - 1.0).abs() < 1e-12);
            assert_eq!(y, 1.0);
        }
        // blocks of length T/d march through the columns
        assert_eq!(h.example(1).0, h.basis().column(0));
        assert_eq!(h.example(5).0, h.basis().column(1));
        assert_eq!(h.example(16).0, h.basis().column(3));
    }

    #[test]
    fn comparator_has_zero_loss() {
        let h = make_hinge_adaptivity::<f64>(5, 25, 2).unwrap();
        let xs = h.comparator();
        assert!((norm2(xs.view()) - h.radius()).abs() < 1e-12);
        for t in 1..=25 {
            assert!(h.loss_at(t, xs.view()) < 1e-12);
        }
    }

    #[test]
    fn horizon_must_be_multiple_of_d() {
        assert!(make_hinge_adaptivity::<f64>(3, 10, 0).is_err());
    }

    #[test]
    fn projection_clips_to_radius() {
        let h = make_hinge_adaptivity::<f64>(4, 4, 0).unwrap();
        let mut x = Array1::from_elem(4, 10.0);
        h.project(&mut x);
        assert!((norm2(x.view()) - 2.0).abs() < 1e-12);
    }
}
