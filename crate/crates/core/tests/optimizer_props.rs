mod common;

use common::{gaussian, gaussian_vec};
use ggt_core::optimizers::{
    AdagradDiag, Adam, FullAdagrad, Ggt, GgtConfig, LrSchedule, Optimizer, Sgd, WindowFeed,
    WindowedDiag,
};
use ggt_core::problems::{make_quadratic, StochasticOracle};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn run(opt: &mut dyn Optimizer<f64>, x0: &Array1<f64>, grads: &Array2<f64>) -> Vec<Array1<f64>> {
    let mut x = x0.clone();
    let mut out = Vec::new();
    for g in grads.columns() {
        opt.step(&mut x, g).unwrap();
        out.push(x.clone());
    }
    out
}

fn max_gap(a: &[Array1<f64>], b: &[Array1<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

fn axis_aligned(d: usize, steps: usize, seed: u64) -> Array2<f64> {
    let vals = gaussian(1, steps, seed);
    let mut g = Array2::zeros((d, steps));
    for t in 0..steps {
        g[[(t * 7 + seed as usize) % d, t]] = vals[[0, t]];
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ggt_matches_full_adagrad(d in 1usize..=32, e in 0usize..3, seed in any::<u64>()) {
        let steps = 20;
        let eps = [1e-3, 1e-1, 1.0][e];
        let grads = gaussian(d, steps, seed);
        let x0 = gaussian_vec(d, seed ^ 1);
        let cfg = GgtConfig { jitter: 0.0, ..GgtConfig::plain(0.1, eps, steps) };
        let a = run(&mut Ggt::new(d, cfg).unwrap(), &x0, &grads);
        let b = run(&mut FullAdagrad::new(d, LrSchedule::constant(0.1), eps).unwrap(), &x0, &grads);
        prop_assert!(max_gap(&a, &b) <= 1e-8, "gap {}", max_gap(&a, &b));
    }

    #[test]
    fn windowed_diag_is_ggt_in_one_dimension(
        beta1 in 0.0f64..0.95,
        beta2 in 0.3f64..=1.0,
        r in 1usize..=8,
        seed in any::<u64>(),
    ) {
        let grads = gaussian(1, 30, seed);
        let cfg = GgtConfig { beta1, beta2, ..GgtConfig::plain(0.05, 0.2, r) };
        let x0 = Array1::from_elem(1, 0.5);
        let a = run(&mut Ggt::new(1, cfg).unwrap(), &x0, &grads);
        let b = run(&mut WindowedDiag::new(1, cfg).unwrap(), &x0, &grads);
        prop_assert!(max_gap(&a, &b) <= 1e-10);
    }

    #[test]
    fn windowed_diag_is_ggt_for_axis_aligned_streams(
        d in 1usize..=10,
        beta1 in 0.0f64..0.9,
        beta2 in 0.5f64..=1.0,
        r in 1usize..=12,
        seed in any::<u64>(),
    ) {
        let grads = axis_aligned(d, 25, seed);
        // raw-gradient feed keeps the window axis-aligned even with momentum
        let cfg = GgtConfig {
            beta1,
            beta2,
            window_feed: WindowFeed::RawGradient,
            ..GgtConfig::plain(0.05, 0.1, r)
        };
        let x0 = gaussian_vec(d, seed);
        let a = run(&mut Ggt::new(d, cfg).unwrap(), &x0, &grads);
        let b = run(&mut WindowedDiag::new(d, cfg).unwrap(), &x0, &grads);
        prop_assert!(max_gap(&a, &b) <= 1e-8, "gap {}", max_gap(&a, &b));
    }

    #[test]
    fn unattenuated_windowed_diag_is_adagrad(d in 1usize..=10, seed in any::<u64>()) {
        let steps = 15;
        let grads = gaussian(d, steps, seed);
        let x0 = gaussian_vec(d, seed ^ 3);
        let cfg = GgtConfig::plain(0.3, 1e-3, steps);
        let a = run(&mut WindowedDiag::new(d, cfg).unwrap(), &x0, &grads);
        let b = run(&mut AdagradDiag::new(d, LrSchedule::constant(0.3), 1e-3).unwrap(), &x0, &grads);
        prop_assert!(max_gap(&a, &b) <= 1e-8);
    }

    #[test]
    fn huge_eps_is_scaled_sgd(d in 1usize..=12, beta1 in 0.0f64..0.9, seed in any::<u64>()) {
        let eps = 1e12;
        let lr = 0.7;
        let grads = gaussian(d, 10, seed);
        let cfg = GgtConfig { beta1, ..GgtConfig::plain(lr, eps, 5) };
        let mut ggt = Ggt::new(d, cfg).unwrap();
        let mut v = Array1::<f64>::zeros(d);
        for g in grads.columns() {
            v = &v * beta1 + g;
            let got = ggt.update(g).unwrap();
            let expect = &v * (lr / eps);
            let rel = (&got - &expect).mapv(|x| x * x).sum().sqrt() / expect.mapv(|x| x * x).sum().sqrt();
            prop_assert!(rel <= 1e-6, "{}", rel);
        }
    }

    #[test]
    fn doubling_lr_doubles_every_displacement(d in 1usize..=8, which in 0usize..6, seed in any::<u64>()) {
        let grads = gaussian(d, 12, seed);
        let make = |lr: f64| -> Box<dyn Optimizer<f64>> {
            let s = LrSchedule::constant(lr);
            match which {
                0 => Box::new(Sgd::new(d, s, 0.9).unwrap()),
                1 => Box::new(AdagradDiag::new(d, s, 1e-3).unwrap()),
                2 => Box::new(Adam::with_defaults(d, s).unwrap()),
                3 => Box::new(FullAdagrad::new(d, s, 1e-3).unwrap()),
                4 => Box::new(WindowedDiag::new(d, GgtConfig { lr: s, ..GgtConfig::default() }).unwrap()),
                _ => Box::new(Ggt::new(d, GgtConfig { lr: s, window_size: 4, ..GgtConfig::default() }).unwrap()),
            }
        };
        let mut a = make(0.125);
        let mut b = make(0.25);
        for g in grads.columns() {
            let da = a.update(g).unwrap();
            let db = b.update(g).unwrap();
            prop_assert_eq!(&da * 2.0, db);
        }
    }
}

/// Textbook Adam written independently of the library version.
fn reference_adam(
    grads: &Array2<f64>,
    x0: &Array1<f64>,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
) -> Vec<Array1<f64>> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut m = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut out = Vec::new();
    for (t, g) in grads.columns().into_iter().enumerate() {
        let t = (t + 1) as i32;
        for i in 0..d {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mhat = m[i] / (1.0 - b1.powi(t));
            let vhat = v[i] / (1.0 - b2.powi(t));
            x[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        out.push(Array1::from_vec(x.clone()));
    }
    out
}

#[test]
fn adam_matches_reference() {
    let grads = gaussian(7, 20, 42);
    let x0 = gaussian_vec(7, 43);
    let lib = run(
        &mut Adam::new(7, LrSchedule::constant(0.01), 0.9, 0.999, 1e-8).unwrap(),
        &x0,
        &grads,
    );
    let reference = reference_adam(&grads, &x0, 0.01, 0.9, 0.999, 1e-8);
    assert!(max_gap(&lib, &reference) <= 1e-12);
}

#[test]
fn sgd_on_quadratic_follows_closed_form() {
    let q = make_quadratic(&[0.5, 2.0, 5.0, 9.0], 0.0, 8).unwrap();
    let a = q.matrix().clone();
    let eta = 0.2;
    let mut opt = Sgd::new(4, LrSchedule::constant(eta), 0.0).unwrap();
    let mut x = gaussian_vec(4, 9);
    let mut expect = x.clone();
    let step = Array2::<f64>::eye(4) - &a * eta;
    for _ in 0..60 {
        let g = q.gradient(x.view()).unwrap();
        opt.step(&mut x, g.view()).unwrap();
        expect = step.dot(&expect);
        let gap = (&x - &expect).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(gap <= 1e-10, "{gap}");
    }
}

#[test]
fn every_optimizer_solves_a_quadratic() {
    let q = make_quadratic(&[1.0, 2.0, 4.0, 7.0, 10.0], 0.0, 5).unwrap();
    let x0 = gaussian_vec(5, 6);
    let f0 = q.loss(x0.view()).unwrap();
    let lrs = [1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0];
    type Make = fn(f64) -> Box<dyn Optimizer<f64>>;
    let makers: [(&str, Make); 7] = [
        ("sgd", |lr| {
            Box::new(Sgd::new(5, LrSchedule::constant(lr), 0.0).unwrap())
        }),
        ("momentum", |lr| {
            Box::new(Sgd::new(5, LrSchedule::constant(lr), 0.9).unwrap())
        }),
        ("adagrad", |lr| {
            Box::new(AdagradDiag::new(5, LrSchedule::constant(lr), 1e-8).unwrap())
        }),
        ("adam", |lr| {
            Box::new(Adam::with_defaults(5, LrSchedule::constant(lr)).unwrap())
        }),
        ("full_adagrad", |lr| {
            Box::new(FullAdagrad::new(5, LrSchedule::constant(lr), 1e-8).unwrap())
        }),
        ("windowed_diag", |lr| {
            Box::new(
                WindowedDiag::new(
                    5,
                    GgtConfig {
                        beta2: 0.99,
                        window_size: 20,
                        ..GgtConfig::plain(lr, 1e-4, 20)
                    },
                )
                .unwrap(),
            )
        }),
        ("ggt", |lr| {
            Box::new(
                Ggt::new(
                    5,
                    GgtConfig {
                        window_size: 20,
                        lr: LrSchedule::constant(lr),
                        ..GgtConfig::default()
                    },
                )
                .unwrap(),
            )
        }),
    ];
    for (name, make) in makers {
        let best = lrs
            .iter()
            .map(|&lr| {
                let mut opt = make(lr);
                let mut x = x0.clone();
                for _ in 0..2000 {
                    let g = q.gradient(x.view()).unwrap();
                    if opt.step(&mut x, g.view()).is_err() {
                        return f64::INFINITY;
                    }
                }
                q.loss(x.view()).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-3 * f0, "{name}: {best} vs {f0}");
    }
}

#[test]
fn single_precision_ggt_tracks_double() {
    let grads = gaussian(6, 15, 10);
    let cfg64 = GgtConfig::plain(0.1, 0.1, 8);
    let cfg32 = GgtConfig::plain(0.1f32, 0.1, 8);
    let mut a = Ggt::new(6, cfg64).unwrap();
    let mut b = Ggt::new(6, cfg32).unwrap();
    let mut x = Array1::<f64>::zeros(6);
    let mut y = Array1::<f32>::zeros(6);
    for g in grads.columns() {
        a.step(&mut x, g).unwrap();
        b.step(&mut y, g.mapv(|v| v as f32).view()).unwrap();
    }
    for (p, q) in x.iter().zip(y.iter()) {
        assert!((p - f64::from(*q)).abs() < 1e-4);
    }
}
