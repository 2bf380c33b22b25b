use ndarray::{Array1, Array2, ArrayView1};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_point, make_anisotropic_gaussian, minibatch_mean, random_unit_vector, StochasticOracle,
};
use crate::error::Result;
use crate::linalg::symmetric_eigen;
use crate::scalar::Scalar;

/// Logistic regression `f(w) = (1/n) Σ log(1 + exp(−yᵢ wᵀzᵢ))` on anisotropic
/// Gaussian features with labels from a random hyperplane.
#[derive(Debug, Clone)]
pub struct LogisticRegression<T> {
    features: Array2<T>,
    labels: Array1<T>,
    smoothness: T,
}

pub fn make_logreg<T: Scalar>(
    d: usize,
    n: usize,
    cond_ratio: f64,
    seed: u64,
) -> Result<LogisticRegression<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Array2<T> = make_anisotropic_gaussian(d, n, cond_ratio, &mut rng)?;
    let w_star: Array1<T> = random_unit_vector(d, &mut rng);
    let labels = features
        .dot(&w_star)
        .mapv(|m| if m >= T::zero() { T::one() } else { -T::one() });
    LogisticRegression::new(features, labels)
}

/// `log(1 + exp(−m))` without overflow.
fn softplus_neg<T: Scalar>(m: T) -> T {
    (-m).max(T::zero()) + (-m.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(m: T) -> T {
    if m >= T::zero() {
        T::one() / (T::one() + (-m).exp())
    } else {
        let e = m.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> LogisticRegression<T> {
    pub fn new(features: Array2<T>, labels: Array1<T>) -> Result<Self> {
        let n = T::lit(features.nrows() as f64);
        let cov = features.t().dot(&features) / n;
        let lambda_max = symmetric_eigen(cov.view())?.values[0];
        Ok(Self {
            features,
            labels,
            smoothness: lambda_max / T::lit(4.0),
        })
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<T> {
        &self.labels
    }

    fn n(&self) -> usize {
        self.features.nrows()
    }

    fn add_example_gradient(&self, w: ArrayView1<T>, i: usize, acc: &mut Array1<T>) {
        let z = self.features.row(i);
        let y = self.labels[i];
        let coef = -y * sigmoid(-y * z.dot(&w));
        acc.scaled_add(coef, &z);
    }
}

impl<T: Scalar> StochasticOracle<T> for LogisticRegression<T> {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        minibatch_mean(self.n(), self.dim(), rng, batch_size, |i, acc| {
            self.add_example_gradient(x, i, acc);
            Ok(())
        })
    }

    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        check_point(self.dim(), x)?;
        let margins = self.features.dot(&x) * &self.labels;
        let total: T = margins.iter().map(|&m| softplus_neg(m)).sum();
        Ok(total / T::lit(self.n() as f64))
    }

    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        let coef = (self.features.dot(&x) * &self.labels).mapv(|m| -sigmoid(-m)) * &self.labels;
        Ok(self.features.t().dot(&coef) / T::lit(self.n() as f64))
    }

    fn smoothness_hint(&self) -> Option<T> {
        Some(self.smoothness)
    }

    fn hessian(&self, x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        if let Err(e) = check_point(self.dim(), x) {
            return Some(Err(e));
        }
        let d = self.dim();
        let mut h = Array2::zeros((d, d));
        for (z, &y) in self.features.rows().into_iter().zip(self.labels.iter()) {
            let s = sigmoid(y * z.dot(&x));
            let w = s * (T::one() - s);
            for a in 0..d {
                for b in 0..d {
                    h[[a, b]] += w * z[a] * z[b];
                }
            }
        }
        Some(Ok(h / T::lit(self.n() as f64)))
    }
}
