use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{gaussian_matrix, norm2, random_orthogonal, standard_normal};
use crate::scalar::Scalar;

/// `n × d` rows drawn from `N(0, Q diag(λ) Qᵀ)`.
///
/// The eigenvalues `λ` are log-spaced from `1` down to `1 / cond_ratio` and `Q`
/// is a Haar-random orthogonal matrix, both drawn from `rng`.
pub fn make_anisotropic_gaussian<T: Scalar, R: Rng + ?Sized>(
    d: usize,
    n: usize,
    cond_ratio: f64,
    rng: &mut R,
) -> Result<Array2<T>> {
    if d < 2 {
        return Err(invalid("d", format!("must be >= 2, got {d}")));
    }
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    if !(cond_ratio >= 1.0) || !cond_ratio.is_finite() {
        return Err(invalid(
            "cond_ratio",
            format!("must be finite and >= 1, got {cond_ratio}"),
        ));
    }
    let q: Array2<T> = random_orthogonal(d, rng);
    let root_lambda: Array1<T> = (0..d)
        .map(|i| {
            let frac = i as f64 / (d - 1) as f64;
            T::lit(cond_ratio.powf(-frac).sqrt())
        })
        .collect();
    let xi: Array2<T> = gaussian_matrix(n, d, rng);
    // row z = Q diag(√λ) ξ  ⇔  Z = Ξ diag(√λ) Qᵀ
    let scaled = &xi * &root_lambda;
    Ok(scaled.dot(&q.t()))
}

pub fn random_unit_vector<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array1<T> {
    loop {
        let v: Array1<T> = (0..d).map(|_| standard_normal::<T, R>(rng)).collect();
        let n = norm2(v.view());
        if n > T::lit(1e-8) {
            return v / n;
        }
    }
}
