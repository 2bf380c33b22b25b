mod common;

use common::{finite_difference_error, gaussian_vec, rng};
use ggt_core::problems::{
    make_anisotropic_gaussian, make_barrier, make_hinge_adaptivity, make_logreg, make_mlp,
    make_quadratic, StochasticOracle,
};
use ggt_core::theory::proximal_subproblem;
use ndarray::{Array1, Array2};

fn covariance_eigen_ratio(z: &Array2<f64>) -> f64 {
    let n = z.nrows() as f64;
    let cov = z.t().dot(z) / n;
    let m = nalgebra::DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[[i, j]]);
    let ev = m.symmetric_eigenvalues();
    ev.max() / ev.min()
}

/// Mean of `samples` stochastic gradients against the exact gradient, per
/// coordinate, in units of the empirical standard error.
fn worst_z_score<O: StochasticOracle<f64> + ?Sized>(
    oracle: &O,
    x: &Array1<f64>,
    samples: usize,
    seed: u64,
) -> f64 {
    let d = oracle.dim();
    let mut r = rng(seed);
    let mut sum = Array1::<f64>::zeros(d);
    let mut sq = Array1::<f64>::zeros(d);
    for _ in 0..samples {
        let g = oracle.sample_gradient(x.view(), &mut r, 1).unwrap();
        sq += &g.mapv(|v| v * v);
        sum += &g;
    }
    let n = samples as f64;
    let mean = &sum / n;
    let exact = oracle.gradient(x.view()).unwrap();
    let mut worst = 0.0f64;
    for i in 0..d {
        let var = (sq[i] / n - mean[i] * mean[i]).max(0.0) * n / (n - 1.0);
        let se = (var / n).sqrt();
        let gap = (mean[i] - exact[i]).abs();
        let z = if se > 0.0 {
            gap / se
        } else if gap <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    worst
}

const SAMPLES: usize = 100_000;

#[test]
fn isotropic_data_has_flat_spectrum() {
    let z: Array2<f64> = make_anisotropic_gaussian(2, 10_000, 1.0, &mut rng(0)).unwrap();
    let ratio = covariance_eigen_ratio(&z);
    assert!((0.8..=1.25).contains(&ratio), "{ratio}");
}

#[test]
fn anisotropic_data_has_requested_condition() {
    let z: Array2<f64> = make_anisotropic_gaussian(10, 1000, 1e4, &mut rng(0)).unwrap();
    let ratio = covariance_eigen_ratio(&z);
    assert!((2e3..=5e4).contains(&ratio), "{ratio}");
}

#[test]
fn data_is_deterministic_per_seed() {
    let a: Array2<f64> = make_anisotropic_gaussian(5, 50, 100.0, &mut rng(3)).unwrap();
    let b: Array2<f64> = make_anisotropic_gaussian(5, 50, 100.0, &mut rng(3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn logreg_gradient_at_origin() {
    let p = make_logreg::<f64>(10, 1000, 1e4, 5).unwrap();
    let g = p.gradient(Array1::zeros(10).view()).unwrap();
    let mut expect = Array1::<f64>::zeros(10);
    for (z, &y) in p.features().rows().into_iter().zip(p.labels()) {
        expect.scaled_add(-y / 2000.0, &z);
    }
    assert!(common::max_abs_diff(&g, &expect) < 1e-14);
}

#[test]
fn logreg_invariants() {
    let p = make_logreg::<f64>(10, 1000, 1e4, 0).unwrap();
    for k in 0..5 {
        let x = gaussian_vec(10, 100 + k);
        assert!(finite_difference_error(&p, &x) <= 1e-5);
    }
    let x = gaussian_vec(10, 7) * 0.3;
    assert!(worst_z_score(&p, &x, SAMPLES, 11) <= 3.0);
}

#[test]
fn barrier_invariants() {
    let p = make_barrier::<f64>(10, 100, 1e4, 0).unwrap();
    let origin = Array1::zeros(10);
    let expect = -p.offsets().mapv(f64::ln).mean().unwrap();
    assert!((p.loss(origin.view()).unwrap() - expect).abs() < 1e-14);
    let mut g0 = Array1::<f64>::zeros(10);
    for (x, &c) in p.directions().rows().into_iter().zip(p.offsets()) {
        g0.scaled_add(-1.0 / (100.0 * c), &x);
    }
    assert!(common::max_abs_diff(&p.gradient(origin.view()).unwrap(), &g0) < 1e-12);

    let mut points = Vec::new();
    let mut k = 0;
    while points.len() < 5 {
        let x = gaussian_vec(10, 200 + k) * 0.01;
        k += 1;
        if p.is_feasible(x.view()) {
            points.push(x);
        }
    }
    for x in &points {
        assert!(finite_difference_error(&p, x) <= 1e-5);
    }
    assert!(worst_z_score(&p, &points[0], SAMPLES, 12) <= 3.0);

    let ha = p.hessian(points[0].view()).unwrap().unwrap();
    let hb = p.hessian(points[1].view()).unwrap().unwrap();
    let comm = ha.dot(&hb) - hb.dot(&ha);
    assert!(comm.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-6);
}

#[test]
fn quadratic_invariants() {
    let q = make_quadratic(&[0.1, 1.0, 3.0, 10.0], 0.5, 2).unwrap();
    for k in 0..5 {
        assert!(finite_difference_error(&q, &gaussian_vec(4, 300 + k)) <= 1e-5);
    }
    assert!(worst_z_score(&q, &gaussian_vec(4, 9), SAMPLES, 13) <= 3.0);
}

#[test]
fn hinge_invariants() {
    let h = make_hinge_adaptivity::<f64>(4, 64, 1).unwrap();
    let x = gaussian_vec(4, 4) * 0.5;
    assert!(worst_z_score(&h, &x, SAMPLES, 14) <= 3.0);
}

#[test]
fn mlp_invariants() {
    let m = make_mlp::<f64>(8, 200, 0).unwrap();
    for k in 0..5 {
        let x = gaussian_vec(m.dim(), 400 + k) * 0.5;
        assert!(finite_difference_error(&m, &x) <= 1e-5);
    }
    let x = gaussian_vec(m.dim(), 8) * 0.5;
    assert!(worst_z_score(&m, &x, SAMPLES, 15) <= 3.0);
}

#[test]
fn mlp_is_not_convex() {
    let m = make_mlp::<f64>(8, 200, 0).unwrap();
    let found = (0..1000u64).any(|k| {
        let a = gaussian_vec(m.dim(), 1000 + 2 * k);
        let b = gaussian_vec(m.dim(), 1001 + 2 * k);
        let mid = (&a + &b) * 0.5;
        let fa = m.loss(a.view()).unwrap();
        let fb = m.loss(b.view()).unwrap();
        m.loss(mid.view()).unwrap() > 0.5 * (fa + fb) + 1e-9
    });
    assert!(found);
}

#[test]
fn proximal_wrapper_invariants() {
    let base = make_logreg::<f64>(10, 1000, 1e4, 3).unwrap();
    let l = base.smoothness_hint().unwrap();
    let p = proximal_subproblem(&base, gaussian_vec(10, 5), l);
    for k in 0..5 {
        assert!(finite_difference_error(&p, &gaussian_vec(10, 500 + k)) <= 1e-5);
    }
    assert!(worst_z_score(&p, &gaussian_vec(10, 6), SAMPLES, 16) <= 3.0);
}

#[test]
fn sampling_is_deterministic() {
    let oracles: Vec<Box<dyn StochasticOracle<f64>>> = vec![
        Box::new(make_logreg::<f64>(10, 100, 1e2, 0).unwrap()),
        Box::new(make_barrier::<f64>(10, 100, 1e2, 0).unwrap()),
        Box::new(make_quadratic(&[1.0, 2.0], 1.0, 0).unwrap()),
        Box::new(make_hinge_adaptivity::<f64>(2, 8, 0).unwrap()),
        Box::new(make_mlp::<f64>(3, 50, 0).unwrap()),
    ];
    for o in &oracles {
        let x = Array1::zeros(o.dim());
        let draw = |seed| {
            let mut r = rng(seed);
            (0..20)
                .map(|_| o.sample_gradient(x.view(), &mut r, 3).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(1), draw(1));
    }
}
