//! Small dense linear-algebra kernels: a tridiagonal-QL symmetric eigensolver,
//! Haar-random orthogonal matrices, and a few vector helpers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_QL_ITERATIONS: usize = 60;

/// Absolute eigenvalue floor below which a direction counts as numerically null.
pub const ABS_EIGEN_FLOOR: f64 = 1e-12;

/// Eigendecomposition `A = V diag(values) Vᵀ` of a symmetric matrix.
///
/// `values` are sorted in descending order and `vectors` holds the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

/// Returns `(A + Aᵀ) / 2`.
pub fn symmetrize<T: Scalar>(a: ArrayView2<T>) -> Array2<T> {
    let half = T::lit(0.5);
    let mut out = a.to_owned();
    let n = out.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (a[[i, j]] + a[[j, i]]) * half;
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    out
}

/// Symmetric eigendecomposition by Householder tridiagonalization followed by
/// the implicit-shift QL iteration.
///
/// The input is symmetrized first.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<T>) -> Result<SymmetricEigen<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to symmetric_eigen".into()));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    // Work on a unit-scaled copy so huge but finite entries cannot overflow
    // inside the QL sweeps.
    let sym = symmetrize(a);
    let amax = sym.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let unit = if amax > T::zero() { amax } else { T::one() };
    let mut v: Vec<T> = sym.iter().map(|&x| x / unit).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| d[i] * unit));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[order[c] * n + r]);
    Ok(SymmetricEigen { values, vectors })
}

/// Householder reduction of the column-major `n × n` matrix in `v` to tridiagonal
/// form; on return `v` holds the accumulated orthogonal transform, `d` the
/// diagonal and `e[1..]` the sub-diagonal.
fn tridiagonalize<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let at = |r: usize, c: usize| c * n + r;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
                v[at(j, i)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                let col = &v[at(j + 1, j)..at(i, j)];
                for ((&vkj, &dk), ek) in col.iter().zip(&d[j + 1..i]).zip(&mut e[j + 1..i]) {
                    g += vkj * dk;
                    *ek += vkj * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut v[at(j, j)..at(i, j)];
                for ((vkj, &ek), &dk) in col.iter_mut().zip(&e[j..i]).zip(&d[j..i]) {
                    *vkj -= f * ek + g * dk;
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            let (head, tail) = v.split_at_mut(at(0, i + 1));
            let pivot = &tail[..=i];
            for j in 0..=i {
                let col = &mut head[at(0, j)..=at(i, j)];
                let g: T = pivot.iter().zip(col.iter()).map(|(&a, &b)| a * b).sum();
                for (vkj, &dk) in col.iter_mut().zip(&d[..=i]) {
                    *vkj -= g * dk;
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = T::zero();
    }
    v[at(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit-shift QL on the tridiagonal `(d, e)`, accumulating rotations into `v`.
fn tridiagonal_ql<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::EigenNoConvergence {
                        iterations: MAX_QL_ITERATIONS,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (e[l] + e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut left[i * n..];
                    let col_next = &mut right[..n];
                    for (vk, vk1) in col_i.iter_mut().zip(col_next.iter_mut()) {
                        let (a, b) = (*vk, *vk1);
                        *vk1 = s * a + c * b;
                        *vk = c * a - s * b;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Threshold at or below which an eigenvalue of an `order × order` Gram matrix
/// is treated as zero: `max(rel·λ_max, 1e-12, order·ε_mach·λ_max)`.
///
/// The last term only matters in single precision, where rounding noise in the
/// eigenvalues is far above the default `rel = 1e-10`.
pub fn truncation_threshold<T: Scalar>(lambda_max: T, truncation_rel: T, order: usize) -> T {
    let noise = T::lit(order as f64) * T::epsilon() * lambda_max;
    (truncation_rel * lambda_max)
        .max(T::lit(ABS_EIGEN_FLOOR))
        .max(noise)
}

/// Computes `(δI + S^{1/2})⁻¹ v` from an eigendecomposition of the PSD matrix `S`.
///
/// Eigenvalues at or below the truncation threshold count as zero. With
/// `delta == 0` those directions are dropped (Moore–Penrose pseudoinverse).
pub fn apply_inverse_sqrt_dense<T: Scalar>(
    eig: &SymmetricEigen<T>,
    delta: T,
    truncation_rel: T,
    v: ArrayView1<T>,
) -> Array1<T> {
    let lambda_max = eig.values.iter().cloned().fold(T::zero(), T::max);
    let cut = truncation_threshold(lambda_max, truncation_rel, eig.values.len());
    let coeffs = eig.vectors.t().dot(&v);
    let mut scaled = Array1::<T>::zeros(coeffs.len());
    for (i, (&lambda, &c)) in eig.values.iter().zip(coeffs.iter()).enumerate() {
        let root = if lambda > cut {
            lambda.sqrt()
        } else {
            T::zero()
        };
        let denom = delta + root;
        if denom > T::zero() {
            scaled[i] = c / denom;
        }
    }
    eig.vectors.dot(&scaled)
}

/// `(δI + S₊^{1/2})⁻¹ v` with no truncation; needs `δ > 0`.
///
/// Truncating here would send a small but genuine direction (`λ = c²` just
/// under the cut) through `c/δ` instead of about `c/(|c| + δ)`.
pub fn apply_inverse_sqrt_regularized<T: Scalar>(
    eig: &SymmetricEigen<T>,
    delta: T,
    v: ArrayView1<T>,
) -> Array1<T> {
    let coeffs = eig.vectors.t().dot(&v);
    let scaled = Array1::from_iter(
        eig.values
            .iter()
            .zip(coeffs.iter())
            .map(|(&lambda, &c)| c / (delta + lambda.max(T::zero()).sqrt())),
    );
    eig.vectors.dot(&scaled)
}

/// Draws a standard normal sample as `T`.
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Array2<T> {
    Array2::from_shape_simple_fn((rows, cols), || standard_normal(rng))
}

/// Haar-distributed random orthogonal `d × d` matrix (Gram–Schmidt QR of a
/// Gaussian matrix, with the sign convention `diag(R) > 0`).
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array2<T> {
    loop {
        let mut q = gaussian_matrix::<T, R>(d, d, rng);
        let mut ok = true;
        for j in 0..d {
            // two passes of modified Gram-Schmidt for orthogonality to working precision
            for _ in 0..2 {
                for k in 0..j {
                    let proj = q.column(k).dot(&q.column(j));
                    let qk = q.column(k).to_owned();
                    q.column_mut(j).scaled_add(-proj, &qk);
                }
            }
            let norm = norm2(q.column(j));
            if norm <= T::lit(1e-10) {
                ok = false;
                break;
            }
            q.column_mut(j).mapv_inplace(|x| x / norm);
        }
        if ok {
            return q;
        }
    }
}

pub fn norm2<T: Scalar>(v: ArrayView1<T>) -> T {
    // scaled to avoid overflow for large entries
    let scale = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = v.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * s.sqrt()
}

pub fn all_finite<T: Scalar>(v: ArrayView1<T>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Index and magnitude of the largest-magnitude (or first non-finite) coordinate.
pub fn worst_coordinate<T: Scalar>(v: ArrayView1<T>) -> (usize, f64) {
    let mut best = (0usize, 0.0f64);
    for (i, &x) in v.iter().enumerate() {
        let m = x.abs().as_f64();
        if !m.is_finite() {
            return (i, m);
        }
        if m > best.1 {
            best = (i, m);
        }
    }
    best
}
