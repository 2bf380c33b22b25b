use ndarray::{s, Array1, Array2, ArrayView1};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_point, minibatch_mean, StochasticOracle};
use crate::error::{invalid, Result};
use crate::linalg::gaussian_matrix;
use crate::scalar::Scalar;

pub const MLP_INPUT_DIM: usize = 4;
pub const MLP_MAX_PARAMS: usize = 200;

/// Two-layer tanh network `ŷ(z) = w₂ᵀ tanh(W₁z + b₁) + b₂` with squared loss
/// `(1/n) Σ (ŷ(zᵢ) − yᵢ)²`, differentiated by hand.
///
/// Parameters are packed as `[W₁ (row-major, hidden × 4), b₁, w₂, b₂]`.
/// Inputs are standard Gaussian in dimension 4 with XOR-style labels
/// `y = sign(z₀ z₁) ∈ {−1, +1}`, which a linear model cannot fit.
#[derive(Debug, Clone)]
pub struct Mlp<T> {
    hidden: usize,
    inputs: Array2<T>,
    targets: Array1<T>,
    smoothness: Option<T>,
}

pub fn make_mlp<T: Scalar>(hidden: usize, n: usize, seed: u64) -> Result<Mlp<T>> {
    if hidden == 0 {
        return Err(invalid("hidden", "must be >= 1"));
    }
    let params = hidden * (MLP_INPUT_DIM + 2) + 1;
    if params > MLP_MAX_PARAMS {
        return Err(invalid(
            "hidden",
            format!("{hidden} units give {params} parameters, limit is {MLP_MAX_PARAMS}"),
        ));
    }
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Array2<T> = gaussian_matrix(n, MLP_INPUT_DIM, &mut rng);
    let targets = inputs
        .rows()
        .into_iter()
        .map(|z| {
            if z[0] * z[1] >= T::zero() {
                T::one()
            } else {
                -T::one()
            }
        })
        .collect();
    Ok(Mlp {
        hidden,
        inputs,
        targets,
        smoothness: None,
    })
}

struct Layers<'a, T> {
    w1: ndarray::ArrayView2<'a, T>,
    b1: ArrayView1<'a, T>,
    w2: ArrayView1<'a, T>,
    b2: T,
}

impl<T: Scalar> Mlp<T> {
    /// Attaches a smoothness constant `L`, required by the proximal reduction.
    pub fn with_smoothness(mut self, smoothness: T) -> Self {
        self.smoothness = Some(smoothness);
        self
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn inputs(&self) -> &Array2<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &Array1<T> {
        &self.targets
    }

    fn n(&self) -> usize {
        self.inputs.nrows()
    }

    fn unpack<'a>(&self, x: &'a ArrayView1<'a, T>) -> Layers<'a, T> {
        let h = self.hidden;
        let k = h * MLP_INPUT_DIM;
        let w1 = x
            .slice(s![..k])
            .into_shape_with_order((h, MLP_INPUT_DIM))
            .expect("contiguous parameter slice");
        Layers {
            w1,
            b1: x.slice(s![k..k + h]),
            w2: x.slice(s![k + h..k + 2 * h]),
            b2: x[k + 2 * h],
        }
    }

    /// Network output for one input.
    pub fn predict(&self, x: ArrayView1<T>, z: ArrayView1<T>) -> T {
        let p = self.unpack(&x);
        let act = (p.w1.dot(&z) + p.b1).mapv(T::tanh);
        act.dot(&p.w2) + p.b2
    }

    fn example_residual_and_grad(&self, x: ArrayView1<T>, i: usize, acc: &mut Array1<T>) {
        let h = self.hidden;
        let k = h * MLP_INPUT_DIM;
        let p = self.unpack(&x);
        let z = self.inputs.row(i);
        let act = (p.w1.dot(&z) + p.b1).mapv(T::tanh);
        let out = act.dot(&p.w2) + p.b2;
        let e = (out - self.targets[i]) * T::lit(2.0);
        for u in 0..h {
            let da = e * p.w2[u] * (T::one() - act[u] * act[u]);
            for j in 0..MLP_INPUT_DIM {
                acc[u * MLP_INPUT_DIM + j] += da * z[j];
            }
            acc[k + u] += da;
            acc[k + h + u] += e * act[u];
        }
        acc[k + 2 * h] += e;
    }
}

impl<T: Scalar> StochasticOracle<T> for Mlp<T> {
    fn dim(&self) -> usize {
        self.hidden * (MLP_INPUT_DIM + 2) + 1
    }

    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        minibatch_mean(self.n(), self.dim(), rng, batch_size, |i, acc| {
            self.example_residual_and_grad(x, i, acc);
            Ok(())
        })
    }

    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        check_point(self.dim(), x)?;
        let total: T = self
            .inputs
            .rows()
            .into_iter()
            .zip(self.targets.iter())
            .map(|(z, &y)| {
                let r = self.predict(x, z) - y;
                r * r
            })
            .sum();
        Ok(total / T::lit(self.n() as f64))
    }

    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        check_point(self.dim(), x)?;
        let mut acc = Array1::zeros(self.dim());
        for i in 0..self.n() {
            self.example_residual_and_grad(x, i, &mut acc);
        }
        Ok(acc / T::lit(self.n() as f64))
    }

    fn smoothness_hint(&self) -> Option<T> {
        self.smoothness
    }
}
