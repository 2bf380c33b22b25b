//! Fast application of `[(G Gᵀ)^{1/2} + εI]⁻¹` for a tall, low-rank `G`.
//!
//! With `G = U Σ Vᵀ` and `U_r` an orthonormal basis of the column space of `G`,
//!
//! ```text
//! [(G Gᵀ)^{1/2} + εI]⁻¹ v = (1/ε) v + U_r [(Σ_r + εI)⁻¹ − (1/ε) I] U_rᵀ v
//! ```
//!
//! `U_r` and `Σ_r` come from the `r × r` eigendecomposition `GᵀG = V Σ_r² Vᵀ`
//! via `U_r = G V Σ_r⁺`, so the cost is `O(d r² + r³)` and `GGᵀ` is never formed.
//! The scalar multiplying the complement term (`1/ε` above) can be decoupled
//! from `ε` through [`Preconditioner::with_sgd_scale`]; large values push the
//! update towards a plain SGD step.

use ndarray::{Array1, Array2, ArrayView1, Axis, ShapeBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, symmetric_eigen, truncation_threshold};
use crate::scalar::Scalar;

/// Largest dimension accepted by [`dense_oracle`].
pub const DENSE_ORACLE_MAX_DIM: usize = 512;

/// A `d × r` matrix of (attenuated) gradients, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor<T> {
    columns: Array2<T>,
}

impl<T: Scalar> LowRankFactor<T> {
    pub fn new(columns: Array2<T>) -> Result<Self> {
        let (d, r) = columns.dim();
        if d == 0 || r == 0 {
            return Err(invalid(
                "factor",
                format!("shape {d}x{r} must be at least 1x1"),
            ));
        }
        if columns.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("low-rank factor column".into()));
        }
        Ok(Self { columns })
    }

    /// Builds a factor from column vectors of equal length.
    pub fn from_columns(cols: &[Array1<T>]) -> Result<Self> {
        let r = cols.len();
        let d = cols.first().map(|c| c.len()).unwrap_or(0);
        let mut m = Array2::<T>::zeros((d, r).f());
        for (j, c) in cols.iter().enumerate() {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: c.len(),
                });
            }
            m.column_mut(j).assign(c);
        }
        Self::new(m)
    }

    pub fn zeros(d: usize, r: usize) -> Result<Self> {
        Self::new(Array2::zeros((d, r).f()))
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn window_len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &Array2<T> {
        &self.columns
    }

    pub fn frobenius_norm_sq(&self) -> T {
        self.columns.iter().map(|&x| x * x).sum()
    }
}

/// `GᵀG`, symmetrized after the product.
pub fn gram<T: Scalar>(factor: &LowRankFactor<T>) -> Array2<T> {
    let g = factor.columns();
    linalg::symmetrize(g.t().dot(g).view())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions<T> {
    /// Multiple of the identity added to `GᵀG` before the eigendecomposition
    /// and subtracted from the eigenvalues afterwards.
    pub jitter: T,
    /// Eigenvalues `λ ≤ max(truncation_rel · λ_max, 1e-12)` are discarded.
    pub truncation_rel: T,
}

impl<T: Scalar> Default for DecomposeOptions<T> {
    fn default() -> Self {
        Self {
            jitter: T::lit(1e-6),
            truncation_rel: T::lit(1e-10),
        }
    }
}

impl<T: Scalar> DecomposeOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.jitter >= T::zero()) || !self.jitter.is_finite() {
            return Err(invalid(
                "jitter",
                format!("must be finite and >= 0, got {}", self.jitter),
            ));
        }
        if !(self.truncation_rel >= T::zero() && self.truncation_rel < T::one()) {
            return Err(invalid(
                "truncation_rel",
                format!("must lie in [0, 1), got {}", self.truncation_rel),
            ));
        }
        Ok(())
    }
}

/// Retained singular directions of a gradient window together with `ε`.
#[derive(Debug, Clone)]
pub struct Preconditioner<T> {
    sigma: Array1<T>,
    basis: Array2<T>,
    eps: T,
    sgd_scale: T,
    window_len: usize,
}

/// Eigendecomposes `GᵀG` and forms `Σ_r` and `U_r = G V Σ_r⁺`.
///
/// All-zero windows (and windows whose spectrum is entirely below the
/// truncation threshold) produce an empty basis, in which case the operator is
/// `v ↦ sgd_scale · v`.
pub fn decompose<T: Scalar>(
    factor: &LowRankFactor<T>,
    eps: T,
    opts: &DecomposeOptions<T>,
) -> Result<Preconditioner<T>> {
    opts.validate()?;
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(invalid("eps", format!("must be finite and > 0, got {eps}")));
    }
    let r = factor.window_len();
    let mut a = gram(factor);
    for i in 0..r {
        a[[i, i]] += opts.jitter;
    }
    let eig = symmetric_eigen(a.view())?;
    let lambdas: Vec<T> = eig
        .values
        .iter()
        .map(|&l| (l - opts.jitter).max(T::zero()))
        .collect();
    let lambda_max = lambdas.first().copied().unwrap_or(T::zero());
    let cut = truncation_threshold(lambda_max, opts.truncation_rel, r);
    // eigenvalues are sorted descending, so the retained set is a prefix; the
    // rank of G can never exceed d
    let k = lambdas
        .iter()
        .take_while(|&&l| l > cut)
        .count()
        .min(factor.dim());

    let v_kept = eig.vectors.slice(ndarray::s![.., ..k]);
    let gv = factor.columns().dot(&v_kept);
    // σᵢ = ‖G vᵢ‖ rather than √λᵢ: equal in exact arithmetic, but the column
    // norm carries relative error ~ε·κ(G) instead of ε·κ(G)²
    let norms: Vec<T> = gv.axis_iter(Axis(1)).map(|c| linalg::norm2(c)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma = Array1::from_iter(order.iter().map(|&i| norms[i]));
    let mut basis = Array2::zeros((factor.dim(), k));
    for (j, &i) in order.iter().enumerate() {
        let s = norms[i];
        basis.column_mut(j).assign(&gv.column(i).mapv(|x| x / s));
    }
    Ok(Preconditioner {
        sigma,
        basis,
        eps,
        sgd_scale: T::one() / eps,
        window_len: r,
    })
}

impl<T: Scalar> Preconditioner<T> {
    /// Replaces the complement-term scalar (defaults to `1/ε`).
    pub fn with_sgd_scale(mut self, sgd_scale: T) -> Self {
        self.sgd_scale = sgd_scale;
        self
    }

    /// Retained singular values of `G`, descending.
    pub fn sigma(&self) -> &Array1<T> {
        &self.sigma
    }

    /// `d × k` column-orthonormal basis `U_r`.
    pub fn basis(&self) -> &Array2<T> {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn sgd_scale(&self) -> T {
        self.sgd_scale
    }

    /// `sgd_scale · v + U_r [(Σ_r + εI)⁻¹ − sgd_scale · I] U_rᵀ v`.
    pub fn apply_inverse_sqrt(&self, v: ArrayView1<T>) -> Result<Array1<T>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        if !linalg::all_finite(v) {
            return Err(Error::NonFinite(
                "vector passed to apply_inverse_sqrt".into(),
            ));
        }
        if self.rank() == 0 {
            return Ok(v.mapv(|x| x * self.sgd_scale));
        }
        // evaluated as sgd_scale·(v − UUᵀv) + U(Σ+εI)⁻¹Uᵀv; when U spans ℝᵈ the
        // complement is exactly zero and is skipped, since with sgd_scale = 1/ε
        // its rounding error would otherwise be amplified by 1/ε
        let coeffs = self.basis.t().dot(&v);
        let mut out = if self.rank() < self.dim() {
            let mut c = v.to_owned();
            c -= &self.basis.dot(&coeffs);
            c.mapv_inplace(|x| x * self.sgd_scale);
            c
        } else {
            Array1::zeros(self.dim())
        };
        let scaled = Array1::from_iter(
            coeffs
                .iter()
                .zip(self.sigma.iter())
                .map(|(&c, &s)| c / (s + self.eps)),
        );
        out += &self.basis.dot(&scaled);
        Ok(out)
    }
}

/// Brute-force `[(G Gᵀ)^{1/2} + εI]⁻¹ v` through a dense `d × d` eigendecomposition.
///
/// Eigenvalues of `GGᵀ` under the default truncation threshold are treated as
/// exact zeros, matching the pseudoinverse convention of [`decompose`].
pub fn dense_oracle<T: Scalar>(
    factor: &LowRankFactor<T>,
    v: ArrayView1<T>,
    eps: T,
) -> Result<Array1<T>> {
    let d = factor.dim();
    if d > DENSE_ORACLE_MAX_DIM {
        return Err(Error::DenseTooLarge {
            d,
            max: DENSE_ORACLE_MAX_DIM,
        });
    }
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: v.len(),
        });
    }
    if !(eps > T::zero()) {
        return Err(invalid("eps", format!("must be > 0, got {eps}")));
    }
    let g = factor.columns();
    let outer = g.dot(&g.t());
    let eig = symmetric_eigen(outer.view())?;
    Ok(linalg::apply_inverse_sqrt_dense(
        &eig,
        eps,
        DecomposeOptions::<T>::default().truncation_rel,
        v,
    ))
}
