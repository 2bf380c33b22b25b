//! The idealized algorithms behind the convergence analysis.
//!
//! - [`adagrad_with_epochs`]: full-matrix AdaGrad restarted every `T′` steps,
//!   each epoch warm-started from the previous epoch's iterate average.
//! - [`nonconvex_solve`]: repeatedly solves the strongly convex proximal
//!   problem `f(x) + (3L/2)‖x − x_t‖²` with AdaGrad-with-epochs and returns a
//!   uniformly sampled iterate.
//! - [`adaptivity_ratio`]: `μ = Σ g_tᵀ(x_t − x*) / (‖x₁ − x*‖ √Σ‖g_t‖²)`.
//!
//! The epoch length appears with three different constants in the analysis;
//! all are exposed and none is applied implicitly:
//!
//! | function                       | `T′`                              |
//! |--------------------------------|-----------------------------------|
//! | [`steps_per_epoch_main`]       | `64 M μ² σ² / ε² · log(M/ε)`      |
//! | [`steps_per_epoch_reduction`]  | `16 μ² σ² / (ε² L)`               |
//! | [`steps_per_epoch_strongly_convex`] | `8 μ² σ² / (ε L)`            |

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, norm2, symmetric_eigen};
use crate::optimizers::{FullAdagrad, LrSchedule, Optimizer};
use crate::problems::{HingeAdaptivity, StochasticOracle};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochConfig<T> {
    pub num_epochs: usize,
    pub steps_per_epoch: usize,
    pub delta: T,
    pub eta: T,
    /// Radius of the Euclidean ball (centered at the origin) iterates are
    /// projected onto; `None` leaves the problem unconstrained.
    pub projection_radius: Option<T>,
    #[serde(default = "one")]
    pub batch_size: usize,
}

fn one() -> usize {
    1
}

impl<T: Scalar> EpochConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.num_epochs == 0 {
            return Err(invalid("num_epochs", "must be >= 1"));
        }
        if self.steps_per_epoch == 0 {
            return Err(invalid("steps_per_epoch", "must be >= 1"));
        }
        if !(self.delta >= T::zero()) || !self.delta.is_finite() {
            return Err(invalid(
                "delta",
                format!("must be finite and >= 0, got {}", self.delta),
            ));
        }
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return Err(invalid(
                "eta",
                format!("must be finite and > 0, got {}", self.eta),
            ));
        }
        if let Some(r) = self.projection_radius {
            if !(r > T::zero()) {
                return Err(invalid(
                    "projection_radius",
                    format!("must be > 0, got {r}"),
                ));
            }
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Query points and stochastic gradients of one AdaGrad run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace<T> {
    pub points: Vec<Array1<T>>,
    pub gradients: Vec<Array1<T>>,
}

#[derive(Debug, Clone)]
pub struct EpochRun<T> {
    /// `x_{N+1}⁰`.
    pub output: Array1<T>,
    /// `x_1⁰, …, x_{N+1}⁰`.
    pub epoch_starts: Vec<Array1<T>>,
    pub traces: Vec<RunTrace<T>>,
}

fn project_ball<T: Scalar>(x: &mut Array1<T>, radius: Option<T>) {
    if let Some(r) = radius {
        let n = norm2(x.view());
        if n > r {
            let s = r / n;
            x.mapv_inplace(|v| v * s);
        }
    }
}

/// AdaGrad with epochs: `N` restarts of dense full-matrix AdaGrad, each run for
/// `T′` steps from the average of the previous epoch's iterates.
pub fn adagrad_with_epochs<T: Scalar, O: StochasticOracle<T> + ?Sized>(
    oracle: &O,
    x0: ArrayView1<T>,
    cfg: &EpochConfig<T>,
    rng: &mut dyn RngCore,
) -> Result<EpochRun<T>> {
    cfg.validate()?;
    if x0.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            actual: x0.len(),
        });
    }
    if !linalg::all_finite(x0) {
        return Err(Error::NonFinite("initial point".into()));
    }
    let mut start = x0.to_owned();
    let mut epoch_starts = vec![start.clone()];
    let mut traces = Vec::with_capacity(cfg.num_epochs);
    let inv_len = T::one() / T::lit(cfg.steps_per_epoch as f64);
    for _ in 0..cfg.num_epochs {
        let mut opt = FullAdagrad::new(oracle.dim(), LrSchedule::constant(cfg.eta), cfg.delta)?;
        let mut x = start.clone();
        let mut avg = Array1::<T>::zeros(x.len());
        let mut trace = RunTrace::default();
        for _ in 0..cfg.steps_per_epoch {
            let g = oracle.sample_gradient(x.view(), rng, cfg.batch_size)?;
            trace.points.push(x.clone());
            opt.step(&mut x, g.view())?;
            trace.gradients.push(g);
            project_ball(&mut x, cfg.projection_radius);
            avg.scaled_add(inv_len, &x);
        }
        start = avg;
        epoch_starts.push(start.clone());
        traces.push(trace);
    }
    Ok(EpochRun {
        output: start,
        epoch_starts,
        traces,
    })
}

/// `f(x) + (3L/2)‖x − center‖²`, which is `2L`-strongly convex and `4L`-smooth
/// whenever `f` is `L`-smooth.
#[derive(Debug, Clone)]
pub struct Proximal<'a, O: ?Sized, T> {
    base: &'a O,
    center: Array1<T>,
    smoothness: T,
}

pub fn proximal_subproblem<T: Scalar, O: StochasticOracle<T> + ?Sized>(
    oracle: &O,
    center: Array1<T>,
    smoothness: T,
) -> Proximal<'_, O, T> {
    Proximal {
        base: oracle,
        center,
        smoothness,
    }
}

impl<O: ?Sized, T: Scalar> Proximal<'_, O, T> {
    pub fn center(&self) -> &Array1<T> {
        &self.center
    }

    fn weight(&self) -> T {
        T::lit(3.0) * self.smoothness
    }
}

impl<T: Scalar, O: StochasticOracle<T> + ?Sized> StochasticOracle<T> for Proximal<'_, O, T> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn sample_gradient(
        &self,
        x: ArrayView1<T>,
        rng: &mut dyn RngCore,
        batch_size: usize,
    ) -> Result<Array1<T>> {
        let mut g = self.base.sample_gradient(x, rng, batch_size)?;
        g.scaled_add(self.weight(), &(&x - &self.center));
        Ok(g)
    }

    fn loss(&self, x: ArrayView1<T>) -> Result<T> {
        let diff = &x - &self.center;
        Ok(self.base.loss(x)? + T::lit(0.5) * self.weight() * diff.dot(&diff))
    }

    fn gradient(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let mut g = self.base.gradient(x)?;
        g.scaled_add(self.weight(), &(&x - &self.center));
        Ok(g)
    }

    fn is_feasible(&self, x: ArrayView1<T>) -> bool {
        self.base.is_feasible(x)
    }

    fn smoothness_hint(&self) -> Option<T> {
        Some(T::lit(4.0) * self.smoothness)
    }

    fn strong_convexity_hint(&self) -> Option<T> {
        Some(T::lit(2.0) * self.smoothness)
    }

    fn variance_hint(&self) -> Option<T> {
        self.base.variance_hint()
    }

    fn hessian(&self, x: ArrayView1<T>) -> Option<Result<Array2<T>>> {
        self.base.hessian(x).map(|h| {
            h.map(|mut h| {
                for i in 0..h.nrows() {
                    h[[i, i]] += self.weight();
                }
                h
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct NonconvexRun<T> {
    /// Index into `iterates` of the returned point, uniform over `1..=T+1`.
    pub sampled_index: usize,
    pub sampled: Array1<T>,
    /// `x_0, x_1, …, x_{T+1}`.
    pub iterates: Vec<Array1<T>>,
    pub subproblems: Vec<EpochRun<T>>,
}

/// Non-convex optimization through `T + 1` proximal subproblems, each solved
/// by [`adagrad_with_epochs`] warm-started at the current iterate.
///
/// Requires the oracle to report a smoothness constant.
pub fn nonconvex_solve<T: Scalar, O: StochasticOracle<T> + ?Sized>(
    oracle: &O,
    x0: ArrayView1<T>,
    outer_steps: usize,
    cfg: &EpochConfig<T>,
    rng: &mut dyn RngCore,
) -> Result<NonconvexRun<T>> {
    let smoothness = oracle.smoothness_hint().ok_or_else(|| {
        invalid(
            "smoothness",
            "the oracle does not provide L; set it explicitly",
        )
    })?;
    if !(smoothness > T::zero()) {
        return Err(invalid(
            "smoothness",
            format!("must be > 0, got {smoothness}"),
        ));
    }
    cfg.validate()?;
    let mut iterates = vec![x0.to_owned()];
    let mut subproblems = Vec::with_capacity(outer_steps + 1);
    for _ in 0..=outer_steps {
        let center = iterates.last().expect("non-empty").clone();
        let prox = proximal_subproblem(oracle, center.clone(), smoothness);
        let run = adagrad_with_epochs(&prox, center.view(), cfg, rng)?;
        iterates.push(run.output.clone());
        subproblems.push(run);
    }
    let sampled_index = rng.random_range(1..=outer_steps + 1);
    Ok(NonconvexRun {
        sampled: iterates[sampled_index].clone(),
        sampled_index,
        iterates,
        subproblems,
    })
}

/// History needed to evaluate the adaptivity ratio of one run.
#[derive(Debug, Clone)]
pub struct AdaptivityRecord<T> {
    pub points: Vec<Array1<T>>,
    pub gradients: Vec<Array1<T>>,
    pub comparator: Array1<T>,
}

impl<T: Scalar> AdaptivityRecord<T> {
    pub fn new(comparator: Array1<T>) -> Self {
        Self {
            points: Vec::new(),
            gradients: Vec::new(),
            comparator,
        }
    }

    pub fn from_trace(trace: &RunTrace<T>, comparator: Array1<T>) -> Self {
        Self {
            points: trace.points.clone(),
            gradients: trace.gradients.clone(),
            comparator,
        }
    }

    pub fn push(&mut self, point: Array1<T>, gradient: Array1<T>) {
        self.points.push(point);
        self.gradients.push(gradient);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ g_tᵀ(x_t − x*)`, the regret-style numerator of `μ`.
    pub fn linear_regret(&self) -> T {
        self.points
            .iter()
            .zip(&self.gradients)
            .map(|(x, g)| g.dot(&(x - &self.comparator)))
            .sum()
    }

    pub fn initial_distance(&self) -> T {
        self.points
            .first()
            .map(|x1| norm2((x1 - &self.comparator).view()))
            .unwrap_or(T::zero())
    }
}

/// `μ = Σ g_tᵀ(x_t − x*) / (‖x₁ − x*‖ √Σ‖g_t‖²)`, recomputed from the stored history.
pub fn adaptivity_ratio<T: Scalar>(record: &AdaptivityRecord<T>) -> Result<T> {
    let dist = record.initial_distance();
    let grad_sq: T = record.gradients.iter().map(|g| g.dot(g)).sum();
    if !(dist > T::zero()) || !(grad_sq > T::zero()) {
        return Err(Error::Degenerate(format!(
            "adaptivity ratio undefined: ‖x₁ − x*‖ = {dist}, Σ‖g‖² = {grad_sq}"
        )));
    }
    Ok(record.linear_regret() / (dist * grad_sq.sqrt()))
}

/// Variant of `μ` whose denominator uses a uniform gradient-norm bound,
/// `‖x₁ − x*‖ · G · √T`, i.e. the scale of the online-gradient-descent regret
/// bound for `G`-Lipschitz losses.
pub fn adaptivity_ratio_lipschitz<T: Scalar>(
    record: &AdaptivityRecord<T>,
    grad_bound: T,
) -> Result<T> {
    let dist = record.initial_distance();
    if !(dist > T::zero()) || !(grad_bound > T::zero()) || record.is_empty() {
        return Err(Error::Degenerate(format!(
            "adaptivity ratio undefined: ‖x₁ − x*‖ = {dist}, G = {grad_bound}, T = {}",
            record.len()
        )));
    }
    let denom = dist * grad_bound * T::lit(record.len() as f64).sqrt();
    Ok(record.linear_regret() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate<T> {
    /// Largest Monte-Carlo mean of `‖∇̃f(x)‖²` over the given points.
    pub value: T,
    pub std_error: T,
    pub point_index: usize,
}

/// Monte-Carlo estimate of `max_x E‖∇̃f(x)‖²` over `points`.
pub fn measure_sigma<T: Scalar, O: StochasticOracle<T> + ?Sized>(
    oracle: &O,
    points: &[Array1<T>],
    samples: usize,
    batch_size: usize,
    rng: &mut dyn RngCore,
) -> Result<SigmaEstimate<T>> {
    if points.is_empty() {
        return Err(invalid("points", "need at least one point"));
    }
    if samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    let mut best: Option<SigmaEstimate<T>> = None;
    for (i, x) in points.iter().enumerate() {
        let mut mean = 0.0f64;
        let mut m2 = 0.0f64;
        for k in 0..samples {
            let g = oracle.sample_gradient(x.view(), rng, batch_size)?;
            let v = g.dot(&g).as_f64();
            // Welford
            let delta = v - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (v - mean);
        }
        let var = m2 / (samples - 1) as f64;
        let est = SigmaEstimate {
            value: T::lit(mean),
            std_error: T::lit((var / samples as f64).sqrt()),
            point_index: i,
        };
        if best.is_none_or(|b| est.value > b.value) {
            best = Some(est);
        }
    }
    Ok(best.expect("points non-empty"))
}

/// High-accuracy minimizer used as the comparator `x*`.
///
/// Damped Newton with backtracking when the oracle exposes a Hessian, plain
/// gradient descent with step `1/L` otherwise. Stops once `‖∇f‖ ≤ tol`.
pub fn reference_minimizer<T: Scalar, O: StochasticOracle<T> + ?Sized>(
    oracle: &O,
    x0: ArrayView1<T>,
    tol: T,
    max_iter: usize,
) -> Result<Array1<T>> {
    let mut x = x0.to_owned();
    if !oracle.is_feasible(x.view()) {
        return Err(Error::Infeasible(
            "reference solve started outside the domain".into(),
        ));
    }
    for _ in 0..max_iter {
        let g = oracle.gradient(x.view())?;
        if norm2(g.view()) <= tol {
            return Ok(x);
        }
        let dir = match oracle.hessian(x.view()) {
            Some(h) => {
                let eig = symmetric_eigen(h?.view())?;
                linalg::apply_inverse_sqrt_dense(&squared(eig), T::zero(), T::lit(1e-14), g.view())
            }
            None => {
                let l = oracle
                    .smoothness_hint()
                    .ok_or_else(|| invalid("smoothness", "gradient-descent fallback needs L"))?;
                g.mapv(|v| v / l)
            }
        };
        let f0 = oracle.loss(x.view())?;
        let slope = g.dot(&dir);
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &x - &dir.mapv(|v| v * step);
            if oracle.is_feasible(cand.view()) {
                let f1 = oracle.loss(cand.view())?;
                if f1 <= f0 - T::lit(1e-4) * step * slope {
                    x = cand;
                    accepted = true;
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        if !accepted {
            // no further decrease at working precision
            return Ok(x);
        }
    }
    let g = oracle.gradient(x.view())?;
    if norm2(g.view()) <= tol * T::lit(1e3) {
        Ok(x)
    } else {
        Err(Error::Degenerate(format!(
            "reference solve stopped after {max_iter} iterations with ‖∇f‖ = {}",
            norm2(g.view())
        )))
    }
}

/// Turns an eigendecomposition of `H` into one of `H²`, so that
/// `apply_inverse_sqrt_dense` yields `H⁻¹ v`.
fn squared<T: Scalar>(mut e: linalg::SymmetricEigen<T>) -> linalg::SymmetricEigen<T> {
    e.values
        .mapv_inplace(|l| l.max(T::zero()) * l.max(T::zero()));
    e
}

/// Outcome of running full-matrix AdaGrad through the hinge-loss sequence.
#[derive(Debug, Clone)]
pub struct HingeRun<T> {
    pub total_loss: T,
    pub record: AdaptivityRecord<T>,
    pub final_point: Array1<T>,
}

/// Plays the online hinge sequence with projected full-matrix AdaGrad from
/// `x₁ = 0`, recording the suffered losses and subgradients.
pub fn run_hinge_adagrad<T: Scalar>(
    problem: &HingeAdaptivity<T>,
    delta: T,
    eta: T,
) -> Result<HingeRun<T>> {
    let d = problem.dim();
    let mut opt = FullAdagrad::new(d, LrSchedule::constant(eta), delta)?;
    let mut x = Array1::<T>::zeros(d);
    let mut record = AdaptivityRecord::new(problem.comparator());
    let mut total_loss = T::zero();
    for t in 1..=problem.horizon() {
        total_loss += problem.loss_at(t, x.view());
        let g = problem.subgradient_at(t, x.view());
        record.push(x.clone(), g.clone());
        if g.iter().any(|&v| v != T::zero()) {
            opt.step(&mut x, g.view())?;
            problem.project(&mut x);
        }
    }
    Ok(HingeRun {
        total_loss,
        record,
        final_point: x,
    })
}

fn ceil_positive(v: f64, what: &'static str) -> Result<usize> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(what, format!("formula produced {v}")));
    }
    Ok((v.ceil() as usize).max(1))
}

/// `N = ⌈log₂(M/ε)⌉`: the number of halvings that takes `M` below `ε`.
pub fn epochs_for_target(initial_gap: f64, target: f64) -> Result<usize> {
    if !(initial_gap > 0.0) || !(target > 0.0) {
        return Err(invalid("target", "M and ε must be > 0"));
    }
    ceil_positive((initial_gap / target).log2(), "num_epochs")
}

/// `T′ = 8 μ² σ² / (ε L)`.
pub fn steps_per_epoch_strongly_convex(
    mu: f64,
    sigma2: f64,
    target: f64,
    smoothness: f64,
) -> Result<usize> {
    ceil_positive(
        8.0 * mu * mu * sigma2 / (target * smoothness),
        "steps_per_epoch",
    )
}

/// `T′ = 16 μ² σ² / (ε² L)`.
pub fn steps_per_epoch_reduction(
    mu: f64,
    sigma2: f64,
    target: f64,
    smoothness: f64,
) -> Result<usize> {
    ceil_positive(
        16.0 * mu * mu * sigma2 / (target * target * smoothness),
        "steps_per_epoch",
    )
}

/// `T′ = 64 M μ² σ² / ε² · ln(M/ε)`.
pub fn steps_per_epoch_main(initial_gap: f64, mu: f64, sigma2: f64, target: f64) -> Result<usize> {
    let log = (initial_gap / target).ln().max(0.0);
    ceil_positive(
        64.0 * initial_gap * mu * mu * sigma2 / (target * target) * log,
        "steps_per_epoch",
    )
}
