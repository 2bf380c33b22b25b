//! Experiments on the appendix algorithms: AdaGrad with epoch restarts, the
//! non-convex reduction, and the hinge-loss adaptivity example.

use std::path::{Path, PathBuf};

use ggt_core::linalg::norm2;
use ggt_core::problems::{make_hinge_adaptivity, StochasticOracle};
use ggt_core::theory::{
    adagrad_with_epochs, adaptivity_ratio, adaptivity_ratio_lipschitz, measure_sigma,
    nonconvex_solve, proximal_subproblem, reference_minimizer, run_hinge_adagrad,
    steps_per_epoch_strongly_convex, AdaptivityRecord, EpochConfig, EpochRun,
};
use ndarray::Array1;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compare::median;
use crate::config::{InitSpec, Oracle, ProblemSpec, SeedSpec};
use crate::error::{config_err, HarnessError, Result};
use crate::rng::stream;
use crate::run::{GIT_HASH, VERSION};
use crate::trace::write_csv;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TheoryConfig {
    Epochs(EpochsExperiment),
    Nonconvex(NonconvexExperiment),
    Hinge(HingeExperiment),
}

/// AdaGrad with epoch restarts on a convex problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochsExperiment {
    #[serde(default = "twenty")]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_theory_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub init: InitSpec,
    pub num_epochs: usize,
    /// `T′`; omitted means sized by the strongly convex formula from a pilot
    /// measurement of `μ` and `σ²`, clamped to `max_steps_per_epoch`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
    /// Omitted means `‖x₀ − x*‖` per seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_radius: Option<f64>,
    /// The `L` of a 2L-strongly convex, 4L-smooth objective; omitted means a
    /// quarter of the problem's smoothness hint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(default = "default_pilot_seeds")]
    pub pilot_seeds: u64,
    #[serde(default = "default_pilot_steps")]
    pub pilot_steps: usize,
    #[serde(default = "default_sigma_samples")]
    pub sigma_samples: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps_per_epoch: usize,
    pub problem: ProblemSpec,
}

/// The proximal reduction for non-convex objectives, at several outer lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonconvexExperiment {
    #[serde(default = "ten")]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_theory_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub init: InitSpec,
    /// Smoothness `L`; required here or as a problem hint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    pub outer_steps: Vec<usize>,
    pub num_epochs: usize,
    pub steps_per_epoch: usize,
    pub eta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub batch_size: usize,
    /// Measure `μ` of every subproblem run against the subproblem minimizer.
    #[serde(default = "yes")]
    pub measure_mu: bool,
    pub problem: ProblemSpec,
}

/// Full-matrix AdaGrad on the hinge-loss adaptivity sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HingeExperiment {
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_theory_dir")]
    pub output_dir: PathBuf,
    pub d: usize,
    pub horizon: usize,
    #[serde(default = "one_f")]
    pub eta: f64,
    #[serde(default)]
    pub delta: f64,
}

fn twenty() -> SeedSpec {
    SeedSpec::Count(20)
}
fn ten() -> SeedSpec {
    SeedSpec::Count(10)
}
fn default_theory_dir() -> PathBuf {
    PathBuf::from("theory")
}
fn default_delta() -> f64 {
    1e-8
}
fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_pilot_seeds() -> u64 {
    3
}
fn default_pilot_steps() -> usize {
    200
}
fn default_sigma_samples() -> usize {
    2000
}
fn default_max_steps() -> usize {
    20_000
}

impl TheoryConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        if let (Some(toml::Value::Table(cfg)), true) =
            (table.get("config"), table.contains_key("version"))
        {
            let cfg: Self = cfg
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    pub fn output_dir(&self) -> &Path {
        match self {
            Self::Epochs(e) => &e.output_dir,
            Self::Nonconvex(e) => &e.output_dir,
            Self::Hinge(e) => &e.output_dir,
        }
    }

    fn set_output_dir(&mut self, dir: PathBuf) {
        match self {
            Self::Epochs(e) => e.output_dir = dir,
            Self::Nonconvex(e) => e.output_dir = dir,
            Self::Hinge(e) => e.output_dir = dir,
        }
    }

    /// Checks everything that can be checked without running an optimizer.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(HarnessError::into_config)
    }

    fn check(&self) -> Result<()> {
        let seeds = match self {
            Self::Epochs(e) => &e.seeds,
            Self::Nonconvex(e) => &e.seeds,
            Self::Hinge(e) => &e.seeds,
        };
        if seeds.indices().is_empty() {
            return Err(config_err("seeds must name at least one seed"));
        }
        match self {
            Self::Epochs(e) => e.validate(),
            Self::Nonconvex(e) => e.validate(),
            Self::Hinge(e) => {
                make_hinge_adaptivity::<f64>(e.d, e.horizon, 0)?;
                positive("eta", e.eta)?;
                nonnegative("delta", e.delta)
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

fn epoch_config(
    num_epochs: usize,
    steps: usize,
    eta: f64,
    delta: f64,
    radius: Option<f64>,
    batch: usize,
) -> Result<EpochConfig<f64>> {
    let c = EpochConfig {
        num_epochs,
        steps_per_epoch: steps,
        delta,
        eta,
        projection_radius: radius,
        batch_size: batch,
    };
    c.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(c)
}

impl EpochsExperiment {
    fn validate(&self) -> Result<()> {
        epoch_config(
            self.num_epochs,
            self.steps_per_epoch.unwrap_or(1),
            self.eta.unwrap_or(1.0),
            self.delta,
            self.projection_radius,
            self.batch_size,
        )?;
        if let Some(l) = self.smoothness {
            positive("smoothness", l)?;
        }
        if self.steps_per_epoch.is_none() {
            if self.pilot_seeds == 0 || self.pilot_steps == 0 || self.sigma_samples < 2 {
                return Err(config_err(
                    "automatic T′ needs pilot_seeds, pilot_steps >= 1 and sigma_samples >= 2",
                ));
            }
            if self.smoothness.is_none() && self.problem.build()?.smoothness_hint().is_none() {
                return Err(config_err(
                    "automatic T′ needs `smoothness` or a problem with a smoothness hint",
                ));
            }
        }
        self.problem.build()?;
        Ok(())
    }
}

impl NonconvexExperiment {
    fn validate(&self) -> Result<()> {
        if self.outer_steps.is_empty() {
            return Err(config_err("outer_steps must list at least one T"));
        }
        epoch_config(
            self.num_epochs,
            self.steps_per_epoch,
            self.eta,
            self.delta,
            None,
            self.batch_size,
        )?;
        match self.smoothness {
            Some(l) => positive("smoothness", l)?,
            None => {
                let hinted = match &self.problem {
                    ProblemSpec::Mlp(m) => m.smoothness.is_some(),
                    other => other.build()?.smoothness_hint().is_some(),
                };
                if !hinted {
                    return Err(config_err(
                        "the non-convex reduction needs a smoothness constant: set `smoothness` or problem.smoothness",
                    ));
                }
            }
        }
        self.problem.build()?;
        Ok(())
    }

    fn oracle(&self) -> Result<Oracle> {
        let mut p = self.problem.clone();
        if let (ProblemSpec::Mlp(m), Some(l)) = (&mut p, self.smoothness) {
            m.smoothness = Some(l);
        }
        let o = p.build()?;
        match (self.smoothness, o.smoothness_hint()) {
            (Some(l), Some(h)) if l != h => Err(config_err(format!(
                "smoothness = {l} conflicts with the problem's own constant {h}"
            ))),
            _ => Ok(o),
        }
    }
}

/// Per seed and epoch: `V̂ᵢ = f(xᵢ⁰) − f*` before and after, and the epoch's `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRow {
    pub seed: u64,
    pub epoch: usize,
    pub start_gap: f64,
    pub end_gap: f64,
    pub ratio: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochSizing {
    /// `T′` actually run: the sized value clamped to `max_steps_per_epoch`.
    pub steps_per_epoch: usize,
    /// `8μ̂²σ̂²/(εL)` before clamping; absent when `T′` was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_steps: Option<usize>,
    /// Pilot estimates; absent when `T′` was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2_hat: Option<f64>,
    pub initial_gap: f64,
    pub target: f64,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochsReport {
    pub sizing: EpochSizing,
    pub rows: Vec<EpochRow>,
    /// Median over seeds of `V̂ᵢ₊₁ / V̂ᵢ`, per epoch.
    pub median_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonconvexRow {
    pub seed: u64,
    pub outer_steps: usize,
    pub sampled_index: usize,
    pub sampled_grad_norm: f64,
    /// Mean of `‖∇f(xₜ)‖²` over the iterates `x′` is drawn from.
    pub mean_sq_grad_norm: f64,
    /// Median and max of `μ` over subproblem runs; NaN when not measured.
    pub mu_median: f64,
    pub mu_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HingeRow {
    pub seed: u64,
    pub d: usize,
    pub horizon: usize,
    pub total_loss: f64,
    /// `μ` with the Lipschitz bound `G = 1` in the denominator.
    pub mu_lipschitz: f64,
    pub mu_exact: f64,
    pub sqrt_d_over_t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TheoryReport {
    Epochs(EpochsReport),
    Nonconvex(Vec<NonconvexRow>),
    Hinge(Vec<HingeRow>),
}

fn ratio_or_nan(r: ggt_core::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

fn epoch_mus(run: &EpochRun<f64>, comparator: &Array1<f64>) -> Vec<f64> {
    run.traces
        .iter()
        .map(|t| {
            ratio_or_nan(adaptivity_ratio(&AdaptivityRecord::from_trace(
                t,
                comparator.clone(),
            )))
        })
        .collect()
}

fn init_point(init: &InitSpec, dim: usize, rng: &mut dyn RngCore) -> Result<Array1<f64>> {
    init.point(dim, rng)
}

fn run_epochs(e: &EpochsExperiment, parallel: bool) -> Result<(EpochsReport, EpochsExperiment)> {
    let oracle = e.problem.build()?;
    let d = oracle.dim();
    let xstar = reference_minimizer(&oracle, Array1::zeros(d).view(), 1e-10, 500)?;
    let fstar = oracle.loss(xstar.view())?;
    let seeds = e.seeds.indices();
    let starts: Vec<Array1<f64>> = seeds
        .iter()
        .map(|&s| init_point(&e.init, d, &mut stream(e.master_seed, s, "init")))
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = starts
        .iter()
        .map(|x| Ok(oracle.loss(x.view())? - fstar))
        .collect::<Result<_>>()?;
    let initial_gap = gaps.iter().cloned().fold(0.0, f64::max);
    if !(initial_gap > 0.0) || !initial_gap.is_finite() {
        return Err(config_err(format!(
            "initial suboptimality M = {initial_gap}: every seed starts at the minimizer (set init)"
        )));
    }
    let target = initial_gap / 2f64.powi(e.num_epochs as i32);
    let smoothness = e
        .smoothness
        .or_else(|| oracle.smoothness_hint().map(|l| l / 4.0))
        .unwrap_or(f64::NAN);
    let eta_for = |x0: &Array1<f64>| {
        e.eta
            .unwrap_or_else(|| norm2((x0 - &xstar).view()).max(1e-12))
    };

    let sizing = match e.steps_per_epoch {
        Some(t) => EpochSizing {
            steps_per_epoch: t,
            theorem_steps: None,
            mu_hat: None,
            sigma2_hat: None,
            initial_gap,
            target,
            smoothness,
        },
        None => {
            let mut mu_hat: f64 = 0.0;
            let mut points = Vec::new();
            for p in 0..e.pilot_seeds {
                let x0 = init_point(&e.init, d, &mut stream(e.master_seed, p, "pilot-init"))?;
                let cfg = epoch_config(
                    e.num_epochs,
                    e.pilot_steps,
                    eta_for(&x0),
                    e.delta,
                    e.projection_radius,
                    e.batch_size,
                )?;
                let run = adagrad_with_epochs(
                    &oracle,
                    x0.view(),
                    &cfg,
                    &mut stream(e.master_seed, p, "pilot-sample"),
                )?;
                mu_hat = epoch_mus(&run, &xstar)
                    .into_iter()
                    .filter(|m| m.is_finite())
                    .fold(mu_hat, f64::max);
                points.extend(run.epoch_starts);
            }
            points.extend(starts.iter().cloned());
            let sigma = measure_sigma(
                &oracle,
                &points,
                e.sigma_samples,
                e.batch_size,
                &mut stream(e.master_seed, 0, "pilot-sigma"),
            )?;
            let t =
                steps_per_epoch_strongly_convex(mu_hat, sigma.value, target, smoothness)?.max(1);
            EpochSizing {
                steps_per_epoch: t.min(e.max_steps_per_epoch),
                theorem_steps: Some(t),
                mu_hat: Some(mu_hat),
                sigma2_hat: Some(sigma.value),
                initial_gap,
                target,
                smoothness,
            }
        }
    };

    let per_seed = |(i, &s): (usize, &u64)| -> Result<Vec<EpochRow>> {
        let x0 = &starts[i];
        let cfg = epoch_config(
            e.num_epochs,
            sizing.steps_per_epoch,
            eta_for(x0),
            e.delta,
            e.projection_radius,
            e.batch_size,
        )?;
        let run = adagrad_with_epochs(
            &oracle,
            x0.view(),
            &cfg,
            &mut stream(e.master_seed, s, "sample"),
        )?;
        let mus = epoch_mus(&run, &xstar);
        let mut gaps: Vec<f64> = run
            .epoch_starts
            .iter()
            .map(|x| Ok(oracle.loss(x.view())? - fstar))
            .collect::<Result<_>>()?;
        gaps.push(oracle.loss(run.output.view())? - fstar);
        Ok((0..e.num_epochs)
            .map(|k| EpochRow {
                seed: s,
                epoch: k + 1,
                start_gap: gaps[k],
                end_gap: gaps[k + 1],
                ratio: gaps[k + 1] / gaps[k],
                mu: mus[k],
            })
            .collect())
    };
    let rows: Vec<Vec<EpochRow>> = if parallel {
        seeds
            .par_iter()
            .enumerate()
            .map(per_seed)
            .collect::<Result<_>>()?
    } else {
        seeds
            .iter()
            .enumerate()
            .map(per_seed)
            .collect::<Result<_>>()?
    };
    let rows: Vec<EpochRow> = rows.into_iter().flatten().collect();
    let median_ratios = (1..=e.num_epochs)
        .map(|k| {
            median(
                &rows
                    .iter()
                    .filter(|r| r.epoch == k)
                    .map(|r| r.ratio)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let resolved = EpochsExperiment {
        steps_per_epoch: Some(sizing.steps_per_epoch),
        ..e.clone()
    };
    Ok((
        EpochsReport {
            sizing,
            rows,
            median_ratios,
        },
        resolved,
    ))
}

fn run_nonconvex(e: &NonconvexExperiment, parallel: bool) -> Result<Vec<NonconvexRow>> {
    let oracle = e.oracle()?;
    let l = oracle
        .smoothness_hint()
        .or(e.smoothness)
        .expect("validated");
    let d = oracle.dim();
    let cfg = epoch_config(
        e.num_epochs,
        e.steps_per_epoch,
        e.eta,
        e.delta,
        None,
        e.batch_size,
    )?;
    let jobs: Vec<(u64, usize)> = e
        .seeds
        .indices()
        .into_iter()
        .flat_map(|s| e.outer_steps.iter().map(move |&t| (s, t)))
        .collect();
    let job = |&(s, t): &(u64, usize)| -> Result<NonconvexRow> {
        let x0 = init_point(&e.init, d, &mut stream(e.master_seed, s, "init"))?;
        let mut rng = stream(e.master_seed, s, &format!("nonconvex-{t}"));
        let out = nonconvex_solve(&oracle, x0.view(), t, &cfg, &mut rng)?;
        let sq: Vec<f64> = out.iterates[1..]
            .iter()
            .map(|x| Ok(norm2(oracle.gradient(x.view())?.view()).powi(2)))
            .collect::<Result<_>>()?;
        let mut mus = Vec::new();
        if e.measure_mu {
            for (center, run) in out.iterates.iter().zip(&out.subproblems) {
                let sub = proximal_subproblem(&oracle, center.clone(), l);
                // a subproblem that is not convex (L too small) has no reliable
                // comparator; its μ is skipped
                if let Ok(xs) = reference_minimizer(&sub, run.output.view(), 1e-10, 1000) {
                    mus.extend(epoch_mus(run, &xs).into_iter().filter(|m| m.is_finite()));
                }
            }
        }
        Ok(NonconvexRow {
            seed: s,
            outer_steps: t,
            sampled_index: out.sampled_index,
            sampled_grad_norm: norm2(oracle.gradient(out.sampled.view())?.view()),
            mean_sq_grad_norm: sq.iter().sum::<f64>() / sq.len() as f64,
            mu_median: median(&mus),
            mu_max: mus.iter().cloned().fold(f64::NAN, f64::max),
        })
    };
    if parallel {
        jobs.par_iter().map(job).collect()
    } else {
        jobs.iter().map(job).collect()
    }
}

fn run_hinge(e: &HingeExperiment) -> Result<Vec<HingeRow>> {
    e.seeds
        .indices()
        .into_iter()
        .map(|s| {
            let problem_seed = stream(e.master_seed, s, "hinge").next_u64();
            let p = make_hinge_adaptivity::<f64>(e.d, e.horizon, problem_seed)?;
            let run = run_hinge_adagrad(&p, e.delta, e.eta)?;
            Ok(HingeRow {
                seed: s,
                d: e.d,
                horizon: e.horizon,
                total_loss: run.total_loss,
                mu_lipschitz: ratio_or_nan(adaptivity_ratio_lipschitz(&run.record, 1.0)),
                mu_exact: ratio_or_nan(adaptivity_ratio(&run.record)),
                sqrt_d_over_t: (e.d as f64 / e.horizon as f64).sqrt(),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TheoryManifest<'a, S: Serialize> {
    version: &'a str,
    git_hash: &'a str,
    schema: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    sizing: Option<S>,
    config: &'a TheoryConfig,
}

/// Runs a theory experiment and writes its CSV and `manifest.toml` into the
/// output directory (or `out`, when given).
pub fn run_theory(cfg: &TheoryConfig, out: Option<&Path>, parallel: bool) -> Result<TheoryReport> {
    let mut cfg = cfg.clone();
    if let Some(o) = out {
        cfg.set_output_dir(o.to_path_buf());
    }
    cfg.validate()?;
    let dir = cfg.output_dir().to_path_buf();
    let (report, resolved, sizing) = match &cfg {
        TheoryConfig::Epochs(e) => {
            let (rep, resolved) = run_epochs(e, parallel)?;
            write_csv(
                &dir.join("epochs.csv"),
                &["seed", "epoch", "start_gap", "end_gap", "ratio", "mu"],
                &rep.rows,
            )?;
            write_csv(
                &dir.join("epoch_summary.csv"),
                &["epoch", "median_ratio"],
                rep.median_ratios
                    .iter()
                    .enumerate()
                    .map(|(k, r)| (k + 1, r)),
            )?;
            let sizing = rep.sizing.clone();
            (
                TheoryReport::Epochs(rep),
                TheoryConfig::Epochs(resolved),
                Some(sizing),
            )
        }
        TheoryConfig::Nonconvex(e) => {
            let rows = run_nonconvex(e, parallel)?;
            write_csv(
                &dir.join("nonconvex.csv"),
                &[
                    "seed",
                    "outer_steps",
                    "sampled_index",
                    "sampled_grad_norm",
                    "mean_sq_grad_norm",
                    "mu_median",
                    "mu_max",
                ],
                &rows,
            )?;
            (TheoryReport::Nonconvex(rows), cfg.clone(), None)
        }
        TheoryConfig::Hinge(e) => {
            let rows = run_hinge(e)?;
            write_csv(
                &dir.join("hinge.csv"),
                &[
                    "seed",
                    "d",
                    "horizon",
                    "total_loss",
                    "mu_lipschitz",
                    "mu_exact",
                    "sqrt_d_over_t",
                ],
                &rows,
            )?;
            (TheoryReport::Hinge(rows), cfg.clone(), None)
        }
    };
    let manifest = TheoryManifest {
        version: VERSION,
        git_hash: GIT_HASH,
        schema: 1,
        sizing,
        config: &resolved,
    };
    let path = dir.join("manifest.toml");
    std::fs::write(
        &path,
        toml::to_string(&manifest).expect("manifest is representable in TOML"),
    )
    .map_err(HarnessError::io(&path))?;
    Ok(report)
}

impl NonconvexRow {
    /// Median over seeds of `mean_sq_grad_norm` for one outer length.
    pub fn median_mean_sq(rows: &[Self], outer_steps: usize) -> f64 {
        median(
            &rows
                .iter()
                .filter(|r| r.outer_steps == outer_steps)
                .map(|r| r.mean_sq_grad_norm)
                .collect::<Vec<_>>(),
        )
    }
}
