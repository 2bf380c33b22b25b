//! GGT and baseline optimizers behind a common stepping interface.
//!
//! Every optimizer owns its internal state (momentum, accumulators, gradient
//! window, step counter) but not the parameters: [`Optimizer::update`] consumes
//! a gradient and returns the displacement `Δ` with `x_{t+1} = x_t − Δ`. This
//! lets callers shrink a step (feasibility backtracking) without touching the
//! optimizer state.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, symmetric_eigen, worst_coordinate};
use crate::lowrank::{self, DecomposeOptions, Preconditioner};
use crate::scalar::Scalar;
use crate::window::GradientWindow;

/// Dense full-matrix AdaGrad keeps a `d × d` accumulator; larger problems are refused.
pub const FULL_ADAGRAD_MAX_DIM: usize = 512;

/// Learning-rate schedule `t ↦ η_t`, with `t` counted from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSchedule<T> {
    Constant {
        lr: T,
    },
    /// `lr / √t`
    InvSqrt {
        lr: T,
    },
    /// Cosine annealing from `lr` down to `min_lr` over `total_steps`.
    Cosine {
        lr: T,
        total_steps: usize,
        min_lr: T,
    },
}

impl<T: Scalar> LrSchedule<T> {
    pub fn constant(lr: T) -> Self {
        Self::Constant { lr }
    }

    pub fn at(&self, t: usize) -> T {
        let t = t.max(1);
        match *self {
            Self::Constant { lr } => lr,
            Self::InvSqrt { lr } => lr / T::lit(t as f64).sqrt(),
            Self::Cosine {
                lr,
                total_steps,
                min_lr,
            } => {
                let total = total_steps.max(1) as f64;
                let progress = ((t - 1) as f64 / total).min(1.0);
                let w = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                min_lr + (lr - min_lr) * T::lit(w)
            }
        }
    }

    pub fn base_lr(&self) -> T {
        match *self {
            Self::Constant { lr } | Self::InvSqrt { lr } | Self::Cosine { lr, .. } => lr,
        }
    }

    /// Same schedule shape with the base rate replaced.
    pub fn with_base_lr(self, new_lr: T) -> Self {
        match self {
            Self::Constant { .. } => Self::Constant { lr: new_lr },
            Self::InvSqrt { .. } => Self::InvSqrt { lr: new_lr },
            Self::Cosine {
                total_steps,
                min_lr,
                ..
            } => Self::Cosine {
                lr: new_lr,
                total_steps,
                min_lr,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        match *self {
            Self::Constant { lr } | Self::InvSqrt { lr } if !ok(lr) => {
                Err(invalid("lr", format!("must be finite and > 0, got {lr}")))
            }
            Self::Cosine { lr, min_lr, .. } if !ok(lr) || !(min_lr >= T::zero()) || min_lr > lr => {
                Err(invalid(
                    "lr",
                    format!("cosine needs 0 <= min_lr <= lr, got lr={lr}, min_lr={min_lr}"),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Which vector is pushed into the gradient window each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowFeed {
    RawGradient,
    #[default]
    MomentumBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GgtConfig<T> {
    pub lr: LrSchedule<T>,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    /// Complement-term scalar; `None` means `1/eps`.
    pub sgd_scale: Option<T>,
    pub window_size: usize,
    pub jitter: T,
    pub truncation_rel: T,
    pub window_feed: WindowFeed,
}

impl<T: Scalar> Default for GgtConfig<T> {
    fn default() -> Self {
        Self {
            lr: LrSchedule::constant(T::lit(1e-3)),
            beta1: T::lit(0.9),
            beta2: T::one(),
            eps: T::lit(1e-4),
            sgd_scale: None,
            window_size: 200,
            jitter: T::lit(1e-6),
            truncation_rel: T::lit(1e-10),
            window_feed: WindowFeed::MomentumBuffer,
        }
    }
}

impl<T: Scalar> GgtConfig<T> {
    /// Algorithm-1 settings: no momentum, raw gradients in the window.
    pub fn plain(lr: T, eps: T, window_size: usize) -> Self {
        Self {
            lr: LrSchedule::constant(lr),
            beta1: T::zero(),
            beta2: T::one(),
            eps,
            window_size,
            window_feed: WindowFeed::RawGradient,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lr.validate()?;
        if !(self.eps > T::zero()) || !self.eps.is_finite() {
            return Err(invalid(
                "eps",
                format!("must be finite and > 0, got {}", self.eps),
            ));
        }
        if !(self.beta1 >= T::zero() && self.beta1 < T::one()) {
            return Err(invalid(
                "beta1",
                format!("must lie in [0, 1), got {}", self.beta1),
            ));
        }
        if !(self.beta2 > T::zero() && self.beta2 <= T::one()) {
            return Err(invalid(
                "beta2",
                format!("must lie in (0, 1], got {}", self.beta2),
            ));
        }
        if self.window_size == 0 {
            return Err(invalid("window_size", "must be >= 1"));
        }
        if let Some(s) = self.sgd_scale {
            if !(s >= T::zero()) || !s.is_finite() {
                return Err(invalid(
                    "sgd_scale",
                    format!("must be finite and >= 0, got {s}"),
                ));
            }
        }
        self.decompose_options().validate()
    }

    pub fn decompose_options(&self) -> DecomposeOptions<T> {
        DecomposeOptions {
            jitter: self.jitter,
            truncation_rel: self.truncation_rel,
        }
    }

    pub fn resolved_sgd_scale(&self) -> T {
        self.sgd_scale.unwrap_or(T::one() / self.eps)
    }
}

pub trait Optimizer<T: Scalar>: Send {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Number of accepted updates so far.
    fn steps(&self) -> usize;

    /// Consumes one stochastic gradient and returns the displacement `Δ`
    /// (`x_{t+1} = x_t − Δ`).
    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>>;

    fn step(&mut self, x: &mut Array1<T>, grad: ArrayView1<T>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let delta = self.update(grad)?;
        *x -= &delta;
        check_finite(self.steps(), x.view())
    }

    /// Preconditioner built during the last update, for optimizers that have one.
    fn preconditioner(&self) -> Option<&Preconditioner<T>> {
        None
    }
}

fn check_grad<T: Scalar>(dim: usize, t: usize, grad: ArrayView1<T>) -> Result<()> {
    if grad.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: grad.len(),
        });
    }
    if !linalg::all_finite(grad) {
        return Err(Error::NonFiniteGradient { step: t + 1 });
    }
    Ok(())
}

fn check_finite<T: Scalar>(step: usize, v: ArrayView1<T>) -> Result<()> {
    if linalg::all_finite(v) {
        return Ok(());
    }
    let (coordinate, magnitude) = worst_coordinate(v);
    Err(Error::Divergence {
        step,
        coordinate,
        magnitude,
    })
}

/// SGD with optional heavy-ball momentum: `v ← β₁v + g`, `Δ = η v`.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    lr: LrSchedule<T>,
    beta1: T,
    momentum: Array1<T>,
    t: usize,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(dim: usize, lr: LrSchedule<T>, beta1: T) -> Result<Self> {
        lr.validate()?;
        if !(beta1 >= T::zero() && beta1 < T::one()) {
            return Err(invalid("beta1", format!("must lie in [0, 1), got {beta1}")));
        }
        Ok(Self {
            lr,
            beta1,
            momentum: Array1::zeros(dim),
            t: 0,
        })
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn dim(&self) -> usize {
        self.momentum.len()
    }

    fn steps(&self) -> usize {
        self.t
    }

    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>> {
        check_grad(self.dim(), self.t, grad)?;
        let b = self.beta1;
        self.momentum.zip_mut_with(&grad, |v, &g| *v = b * *v + g);
        self.t += 1;
        let delta = self.momentum.mapv(|v| v * self.lr.at(self.t));
        check_finite(self.t, delta.view())?;
        Ok(delta)
    }
}

/// Diagonal AdaGrad: `Δᵢ = η gᵢ / (√Σ gᵢ² + ε)`.
#[derive(Debug, Clone)]
pub struct AdagradDiag<T> {
    lr: LrSchedule<T>,
    eps: T,
    accum: Array1<T>,
    t: usize,
}

impl<T: Scalar> AdagradDiag<T> {
    pub fn new(dim: usize, lr: LrSchedule<T>, eps: T) -> Result<Self> {
        lr.validate()?;
        if !(eps >= T::zero()) {
            return Err(invalid("eps", format!("must be >= 0, got {eps}")));
        }
        Ok(Self {
            lr,
            eps,
            accum: Array1::zeros(dim),
            t: 0,
        })
    }

    pub fn accumulator(&self) -> &Array1<T> {
        &self.accum
    }
}

impl<T: Scalar> Optimizer<T> for AdagradDiag<T> {
    fn name(&self) -> &'static str {
        "adagrad"
    }

    fn dim(&self) -> usize {
        self.accum.len()
    }

    fn steps(&self) -> usize {
        self.t
    }

    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>> {
        check_grad(self.dim(), self.t, grad)?;
        self.accum.zip_mut_with(&grad, |a, &g| *a += g * g);
        self.t += 1;
        let lr = self.lr.at(self.t);
        let mut delta = Array1::zeros(self.dim());
        for ((d, &g), &a) in delta.iter_mut().zip(grad.iter()).zip(self.accum.iter()) {
            let denom = a.sqrt() + self.eps;
            // zero accumulator with eps = 0 only happens for a zero gradient
            *d = if denom > T::zero() {
                lr * g / denom
            } else {
                T::zero()
            };
        }
        check_finite(self.t, delta.view())?;
        Ok(delta)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: LrSchedule<T>,
    beta1: T,
    beta2: T,
    eps: T,
    m: Array1<T>,
    v: Array1<T>,
    t: usize,
}

impl<T: Scalar> Adam<T> {
    pub fn new(dim: usize, lr: LrSchedule<T>, beta1: T, beta2: T, eps: T) -> Result<Self> {
        lr.validate()?;
        if !(beta1 >= T::zero() && beta1 < T::one()) {
            return Err(invalid("beta1", format!("must lie in [0, 1), got {beta1}")));
        }
        if !(beta2 >= T::zero() && beta2 < T::one()) {
            return Err(invalid("beta2", format!("must lie in [0, 1), got {beta2}")));
        }
        if !(eps >= T::zero()) {
            return Err(invalid("eps", format!("must be >= 0, got {eps}")));
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps,
            m: Array1::zeros(dim),
            v: Array1::zeros(dim),
            t: 0,
        })
    }

    /// `β₁ = 0.9, β₂ = 0.999, ε = 1e-8`.
    pub fn with_defaults(dim: usize, lr: LrSchedule<T>) -> Result<Self> {
        Self::new(dim, lr, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn dim(&self) -> usize {
        self.m.len()
    }

    fn steps(&self) -> usize {
        self.t
    }

    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>> {
        check_grad(self.dim(), self.t, grad)?;
        let (b1, b2) = (self.beta1, self.beta2);
        self.m
            .zip_mut_with(&grad, |m, &g| *m = b1 * *m + (T::one() - b1) * g);
        self.v
            .zip_mut_with(&grad, |v, &g| *v = b2 * *v + (T::one() - b2) * g * g);
        self.t += 1;
        let t = self.t as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let lr = self.lr.at(self.t);
        let mut delta = Array1::zeros(self.dim());
        for ((d, &m), &v) in delta.iter_mut().zip(self.m.iter()).zip(self.v.iter()) {
            let denom = (v / c2).sqrt() + self.eps;
            *d = if denom > T::zero() {
                lr * (m / c1) / denom
            } else {
                T::zero()
            };
        }
        check_finite(self.t, delta.view())?;
        Ok(delta)
    }
}

/// Dense full-matrix AdaGrad: `S ← S + ggᵀ`, `Δ = η (δI + S^{1/2})⁻¹ g`.
///
/// Directions with (numerically) zero curvature use the pseudoinverse when
/// `δ = 0`.
#[derive(Debug, Clone)]
pub struct FullAdagrad<T> {
    lr: LrSchedule<T>,
    delta: T,
    truncation_rel: T,
    accum: Array2<T>,
    t: usize,
}

impl<T: Scalar> FullAdagrad<T> {
    pub fn new(dim: usize, lr: LrSchedule<T>, delta: T) -> Result<Self> {
        lr.validate()?;
        if dim > FULL_ADAGRAD_MAX_DIM {
            return Err(Error::DenseTooLarge {
                d: dim,
                max: FULL_ADAGRAD_MAX_DIM,
            });
        }
        if !(delta >= T::zero()) || !delta.is_finite() {
            return Err(invalid(
                "delta",
                format!("must be finite and >= 0, got {delta}"),
            ));
        }
        Ok(Self {
            lr,
            delta,
            truncation_rel: DecomposeOptions::<T>::default().truncation_rel,
            accum: Array2::zeros((dim, dim)),
            t: 0,
        })
    }

    pub fn accumulator(&self) -> &Array2<T> {
        &self.accum
    }

    /// Clears `S` (the epoch restart of AdaGrad with epochs).
    pub fn reset(&mut self) {
        self.accum.fill(T::zero());
    }
}

impl<T: Scalar> Optimizer<T> for FullAdagrad<T> {
    fn name(&self) -> &'static str {
        "full_adagrad"
    }

    fn dim(&self) -> usize {
        self.accum.nrows()
    }

    fn steps(&self) -> usize {
        self.t
    }

    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>> {
        check_grad(self.dim(), self.t, grad)?;
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                self.accum[[i, j]] += grad[i] * grad[j];
            }
        }
        self.t += 1;
        let eig = symmetric_eigen(self.accum.view())?;
        let dir = if self.delta > T::zero() {
            linalg::apply_inverse_sqrt_regularized(&eig, self.delta, grad)
        } else {
            linalg::apply_inverse_sqrt_dense(&eig, self.delta, self.truncation_rel, grad)
        };
        let delta = dir * self.lr.at(self.t);
        check_finite(self.t, delta.view())?;
        Ok(delta)
    }
}

/// Windowed diagonal preconditioner: the GGT window with the off-diagonal
/// entries of `GGᵀ` dropped, `Δᵢ = η vᵢ / (√diag(GGᵀ)ᵢ + ε)`.
#[derive(Debug, Clone)]
pub struct WindowedDiag<T> {
    cfg: GgtConfig<T>,
    window: GradientWindow<T>,
    momentum: Array1<T>,
    t: usize,
}

impl<T: Scalar> WindowedDiag<T> {
    pub fn new(dim: usize, cfg: GgtConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            window: GradientWindow::new(dim, cfg.window_size, cfg.beta2)?,
            momentum: Array1::zeros(dim),
            cfg,
            t: 0,
        })
    }

    pub fn window(&self) -> &GradientWindow<T> {
        &self.window
    }
}

impl<T: Scalar> Optimizer<T> for WindowedDiag<T> {
    fn name(&self) -> &'static str {
        "windowed_diag"
    }

    fn dim(&self) -> usize {
        self.momentum.len()
    }

    fn steps(&self) -> usize {
        self.t
    }

    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>> {
        check_grad(self.dim(), self.t, grad)?;
        let b = self.cfg.beta1;
        self.momentum.zip_mut_with(&grad, |v, &g| *v = b * *v + g);
        match self.cfg.window_feed {
            WindowFeed::MomentumBuffer => self.window.push(self.momentum.view())?,
            WindowFeed::RawGradient => self.window.push(grad)?,
        }
        self.t += 1;
        let lr = self.cfg.lr.at(self.t);
        let diag = self.window.row_norms_sq();
        let mut delta = Array1::zeros(self.dim());
        for ((d, &v), &s) in delta.iter_mut().zip(self.momentum.iter()).zip(diag.iter()) {
            *d = lr * v / (s.sqrt() + self.cfg.eps);
        }
        check_finite(self.t, delta.view())?;
        Ok(delta)
    }
}

/// GGT: `Δ = η_t [(G_t G_tᵀ)^{1/2} + εI]⁻¹ v_t` with `v_t = β₁ v_{t−1} + g_t`.
///
/// With `β₁ = 0` and the default `sgd_scale` this is the plain windowed
/// full-matrix update.
#[derive(Debug, Clone)]
pub struct Ggt<T> {
    cfg: GgtConfig<T>,
    window: GradientWindow<T>,
    momentum: Array1<T>,
    last: Option<Preconditioner<T>>,
    t: usize,
}

impl<T: Scalar> Ggt<T> {
    pub fn new(dim: usize, cfg: GgtConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            window: GradientWindow::new(dim, cfg.window_size, cfg.beta2)?,
            momentum: Array1::zeros(dim),
            last: None,
            cfg,
            t: 0,
        })
    }

    pub fn config(&self) -> &GgtConfig<T> {
        &self.cfg
    }

    pub fn window(&self) -> &GradientWindow<T> {
        &self.window
    }

    pub fn momentum(&self) -> &Array1<T> {
        &self.momentum
    }
}

impl<T: Scalar> Optimizer<T> for Ggt<T> {
    fn name(&self) -> &'static str {
        "ggt"
    }

    fn dim(&self) -> usize {
        self.momentum.len()
    }

    fn steps(&self) -> usize {
        self.t
    }

    fn update(&mut self, grad: ArrayView1<T>) -> Result<Array1<T>> {
        check_grad(self.dim(), self.t, grad)?;
        let b = self.cfg.beta1;
        self.momentum.zip_mut_with(&grad, |v, &g| *v = b * *v + g);
        match self.cfg.window_feed {
            WindowFeed::MomentumBuffer => self.window.push(self.momentum.view())?,
            WindowFeed::RawGradient => self.window.push(grad)?,
        }
        self.t += 1;
        let p = lowrank::decompose(
            &self.window.as_factor(),
            self.cfg.eps,
            &self.cfg.decompose_options(),
        )?
        .with_sgd_scale(self.cfg.resolved_sgd_scale());
        // with β₁ = 0 the momentum buffer equals the raw gradient
        let dir = p.apply_inverse_sqrt(self.momentum.view())?;
        let delta = dir * self.cfg.lr.at(self.t);
        self.last = Some(p);
        check_finite(self.t, delta.view())?;
        Ok(delta)
    }

    fn preconditioner(&self) -> Option<&Preconditioner<T>> {
        self.last.as_ref()
    }
}
