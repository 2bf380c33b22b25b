//! TOML experiment configuration.
//!
//! Every table rejects unknown keys. Defaults are filled in at parse time, so a
//! parsed config serializes to its fully resolved form and the manifest alone
//! is enough to re-execute a run.

use std::path::{Path, PathBuf};

use ggt_core::optimizers::{
    AdagradDiag, Adam, FullAdagrad, Ggt, GgtConfig, LrSchedule, Optimizer, Sgd, WindowFeed,
    WindowedDiag,
};
use ggt_core::problems::{make_barrier, make_logreg, make_mlp, make_quadratic, StochasticOracle};
use ndarray::Array1;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, HarnessError, Result};

pub type Oracle = Box<dyn StochasticOracle<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Logreg(LogregProblem),
    Barrier(BarrierProblem),
    Quadratic(QuadraticProblem),
    Mlp(MlpProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogregProblem {
    pub d: usize,
    pub n: usize,
    pub cond_ratio: f64,
    pub seed: u64,
}

impl Default for LogregProblem {
    fn default() -> Self {
        Self {
            d: 10,
            n: 1000,
            cond_ratio: 1e4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierProblem {
    pub d: usize,
    pub n: usize,
    pub cond_ratio: f64,
    pub seed: u64,
}

impl Default for BarrierProblem {
    fn default() -> Self {
        Self {
            d: 10,
            n: 100,
            cond_ratio: 1e4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticProblem {
    pub spectrum: Vec<f64>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpProblem {
    pub hidden: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
}

impl Default for MlpProblem {
    fn default() -> Self {
        Self {
            hidden: 8,
            n: 200,
            seed: 0,
            smoothness: None,
        }
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Oracle> {
        Ok(match self {
            Self::Logreg(p) => Box::new(make_logreg::<f64>(p.d, p.n, p.cond_ratio, p.seed)?),
            Self::Barrier(p) => Box::new(make_barrier::<f64>(p.d, p.n, p.cond_ratio, p.seed)?),
            Self::Quadratic(p) => {
                if !(p.noise >= 0.0 && p.noise.is_finite()) {
                    return Err(config_err(format!(
                        "problem.noise must be finite and >= 0, got {}",
                        p.noise
                    )));
                }
                Box::new(make_quadratic(&p.spectrum, p.noise, p.seed)?)
            }
            Self::Mlp(p) => {
                let m = make_mlp::<f64>(p.hidden, p.n, p.seed)?;
                match p.smoothness {
                    Some(l) if !(l > 0.0 && l.is_finite()) => {
                        return Err(config_err(format!(
                            "problem.smoothness must be finite and > 0, got {l}"
                        )))
                    }
                    Some(l) => Box::new(m.with_smoothness(l)),
                    None => Box::new(m),
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd(SgdSpec),
    /// Diagonal AdaGrad.
    Adagrad(AdagradSpec),
    Adam(AdamSpec),
    FullAdagrad(FullAdagradSpec),
    WindowedDiag(WindowSpec),
    Ggt(WindowSpec),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdSpec {
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdagradSpec {
    pub eps: f64,
}

impl Default for AdagradSpec {
    fn default() -> Self {
        Self { eps: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamSpec {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSpec {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FullAdagradSpec {
    pub delta: f64,
}

impl Default for FullAdagradSpec {
    fn default() -> Self {
        Self { delta: 1e-4 }
    }
}

/// Window-based optimizers (GGT and its diagonal ablation); `lr` lives at the
/// top level of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub window_size: usize,
    pub jitter: f64,
    pub truncation_rel: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgd_scale: Option<f64>,
    pub window_feed: WindowFeed,
}

impl Default for WindowSpec {
    fn default() -> Self {
        let c = GgtConfig::<f64>::default();
        Self {
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
            window_size: c.window_size,
            jitter: c.jitter,
            truncation_rel: c.truncation_rel,
            sgd_scale: c.sgd_scale,
            window_feed: c.window_feed,
        }
    }
}

impl WindowSpec {
    fn ggt_config(&self, lr: LrSchedule<f64>) -> GgtConfig<f64> {
        GgtConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            sgd_scale: self.sgd_scale,
            window_size: self.window_size,
            jitter: self.jitter,
            truncation_rel: self.truncation_rel,
            window_feed: self.window_feed,
        }
    }
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd(_) => "sgd",
            Self::Adagrad(_) => "adagrad",
            Self::Adam(_) => "adam",
            Self::FullAdagrad(_) => "full_adagrad",
            Self::WindowedDiag(_) => "windowed_diag",
            Self::Ggt(_) => "ggt",
        }
    }

    pub fn build(&self, dim: usize, lr: LrSchedule<f64>) -> Result<Box<dyn Optimizer<f64>>> {
        Ok(match self {
            Self::Sgd(s) => Box::new(Sgd::new(dim, lr, s.momentum)?),
            Self::Adagrad(s) => Box::new(AdagradDiag::new(dim, lr, s.eps)?),
            Self::Adam(s) => Box::new(Adam::new(dim, lr, s.beta1, s.beta2, s.eps)?),
            Self::FullAdagrad(s) => Box::new(FullAdagrad::new(dim, lr, s.delta)?),
            Self::WindowedDiag(s) => Box::new(WindowedDiag::new(dim, s.ggt_config(lr))?),
            Self::Ggt(s) => Box::new(Ggt::new(dim, s.ggt_config(lr))?),
        })
    }

    /// The regularizer a grid sweeps over: `eps`, or `delta` for full AdaGrad.
    pub fn eps(&self) -> Option<f64> {
        match self {
            Self::Sgd(_) => None,
            Self::Adagrad(s) => Some(s.eps),
            Self::Adam(s) => Some(s.eps),
            Self::FullAdagrad(s) => Some(s.delta),
            Self::WindowedDiag(s) | Self::Ggt(s) => Some(s.eps),
        }
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            Self::Sgd(_) => return Err(config_err("grid.eps given but sgd has no eps")),
            Self::Adagrad(s) => s.eps = eps,
            Self::Adam(s) => s.eps = eps,
            Self::FullAdagrad(s) => s.delta = eps,
            Self::WindowedDiag(s) | Self::Ggt(s) => s.eps = eps,
        }
        Ok(out)
    }

    pub fn window_size(&self) -> Option<usize> {
        match self {
            Self::WindowedDiag(s) | Self::Ggt(s) => Some(s.window_size),
            _ => None,
        }
    }

    pub fn with_window(&self, window_size: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            Self::WindowedDiag(s) | Self::Ggt(s) => s.window_size = window_size,
            other => {
                return Err(config_err(format!(
                    "grid.window given but {} has no window",
                    other.name()
                )))
            }
        }
        Ok(out)
    }
}

/// A bare number means a constant rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LrSpec {
    Constant(f64),
    Schedule(LrSchedule<f64>),
}

impl LrSpec {
    pub fn schedule(&self) -> LrSchedule<f64> {
        match *self {
            Self::Constant(lr) => LrSchedule::constant(lr),
            Self::Schedule(s) => s,
        }
    }

    pub fn base_lr(&self) -> f64 {
        self.schedule().base_lr()
    }

    pub fn with_base_lr(&self, lr: f64) -> Self {
        match *self {
            Self::Constant(_) => Self::Constant(lr),
            Self::Schedule(s) => Self::Schedule(s.with_base_lr(lr)),
        }
    }
}

/// `seeds = 5` means seed indices `0..5`; a list names them explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self::Count(1)
    }
}

impl SeedSpec {
    pub fn indices(&self) -> Vec<u64> {
        match self {
            Self::Count(n) => (0..*n).collect(),
            Self::List(v) => v.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let idx = self.indices();
        if idx.is_empty() {
            return Err(config_err("seeds must name at least one seed"));
        }
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != idx.len() {
            return Err(config_err("seeds contains duplicates"));
        }
        Ok(())
    }
}

/// Starting point of every seed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    #[default]
    Zeros,
    /// `N(0, scale²)` per coordinate, drawn from the seed's `init` stream.
    Gaussian {
        scale: f64,
    },
    Point {
        x: Vec<f64>,
    },
}

impl InitSpec {
    pub fn point(&self, dim: usize, rng: &mut dyn RngCore) -> Result<Array1<f64>> {
        match self {
            Self::Zeros => Ok(Array1::zeros(dim)),
            Self::Gaussian { scale } => {
                if !(*scale >= 0.0 && scale.is_finite()) {
                    return Err(config_err(format!(
                        "init.scale must be finite and >= 0, got {scale}"
                    )));
                }
                Ok((0..dim)
                    .map(|_| scale * ggt_core::linalg::standard_normal::<f64, _>(rng))
                    .collect())
            }
            Self::Point { x } => {
                if x.len() != dim {
                    return Err(config_err(format!(
                        "init.x has {} entries, problem dimension is {dim}",
                        x.len()
                    )));
                }
                Ok(Array1::from(x.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Vec<usize>>,
}

/// One point of a grid sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub lr: f64,
    pub eps: Option<f64>,
    pub window: Option<usize>,
}

/// Log-spaced grid `lo … hi` with `n` points, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub steps: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub master_seed: u64,
    pub lr: LrSpec,
    /// Snapshot cadence in steps; 0 disables spectra output.
    #[serde(default = "default_spectra_every")]
    pub spectra_every: usize,
    #[serde(default = "default_density_bins")]
    pub density_bins: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Record wall time per step; off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub init: InitSpec,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

fn default_batch() -> usize {
    10
}

fn default_spectra_every() -> usize {
    10
}

fn default_density_bins() -> usize {
    40
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

pub const MAX_STEPS: usize = 10_000_000;
pub const MAX_BATCH: usize = 1_000_000;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Reads a config file, or the `config` table of a run manifest.
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

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(HarnessError::into_config)
    }

    fn check(&self) -> Result<()> {
        if self.steps == 0 || self.steps > MAX_STEPS {
            return Err(config_err(format!(
                "steps must lie in [1, {MAX_STEPS}], got {}",
                self.steps
            )));
        }
        if self.batch_size == 0 || self.batch_size > MAX_BATCH {
            return Err(config_err(format!(
                "batch_size must lie in [1, {MAX_BATCH}], got {}",
                self.batch_size
            )));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(config_err(
                "master_seed must fit in a signed 64-bit integer",
            ));
        }
        if self.density_bins == 0 {
            return Err(config_err("density_bins must be >= 1"));
        }
        self.seeds.validate()?;
        self.lr.schedule().validate()?;
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        for p in self.grid_points()? {
            let resolved = self.resolve(&p)?;
            let oracle = resolved.problem.build()?;
            resolved
                .optimizer
                .build(oracle.dim(), resolved.lr.schedule())?;
            let mut rng = crate::rng::stream(0, 0, "validate");
            let x0 = resolved.init.point(oracle.dim(), &mut rng)?;
            if matches!(resolved.init, InitSpec::Zeros | InitSpec::Point { .. })
                && !oracle.is_feasible(x0.view())
            {
                return Err(config_err("initial point is infeasible for the problem"));
            }
        }
        Ok(())
    }

    /// All grid points in row-major order (lr outermost, window innermost); a
    /// config without a grid has the single point of its own settings.
    pub fn grid_points(&self) -> Result<Vec<GridPoint>> {
        let g = self.grid.clone().unwrap_or_default();
        let lrs = g.lr.unwrap_or_else(|| vec![self.lr.base_lr()]);
        let epss: Vec<Option<f64>> = match g.eps {
            Some(v) => v.into_iter().map(Some).collect(),
            None => vec![self.optimizer.eps()],
        };
        let wins: Vec<Option<usize>> = match g.window {
            Some(v) => v.into_iter().map(Some).collect(),
            None => vec![self.optimizer.window_size()],
        };
        let mut out = Vec::new();
        for &lr in &lrs {
            for &eps in &epss {
                for &window in &wins {
                    out.push(GridPoint {
                        index: out.len(),
                        lr,
                        eps,
                        window,
                    });
                }
            }
        }
        Ok(out)
    }

    /// The single-run config of a grid point.
    pub fn resolve(&self, p: &GridPoint) -> Result<Self> {
        let mut optimizer = self.optimizer.clone();
        if let Some(e) = p
            .eps
            .filter(|_| self.grid.as_ref().is_some_and(|g| g.eps.is_some()))
        {
            optimizer = optimizer.with_eps(e)?;
        }
        if let Some(w) = p
            .window
            .filter(|_| self.grid.as_ref().is_some_and(|g| g.window.is_some()))
        {
            optimizer = optimizer.with_window(w)?;
        }
        Ok(Self {
            lr: self.lr.with_base_lr(p.lr),
            optimizer,
            grid: None,
            ..self.clone()
        })
    }

    pub fn is_grid(&self) -> bool {
        self.grid.is_some()
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: &Option<Vec<f64>>| -> Result<()> {
            match v {
                Some(v) if v.is_empty() => Err(config_err(format!("grid.{name} is empty"))),
                Some(v) if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) => Err(config_err(
                    format!("grid.{name} entries must be finite and > 0"),
                )),
                _ => Ok(()),
            }
        };
        positive("lr", &self.lr)?;
        positive("eps", &self.eps)?;
        match &self.window {
            Some(w) if w.is_empty() || w.contains(&0) => {
                Err(config_err("grid.window entries must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOGREG: &str = r#"
steps = 100
lr = 0.1
seeds = 3

[problem]
kind = "logreg"

[optimizer]
kind = "ggt"
window_size = 50
beta1 = 0.0
"#;

    #[test]
    fn defaults_are_filled_in() {
        let c = ExperimentConfig::from_toml(LOGREG).unwrap();
        assert_eq!(c.batch_size, 10);
        assert_eq!(c.spectra_every, 10);
        assert_eq!(c.seeds.indices(), vec![0, 1, 2]);
        assert_eq!(c.problem, ProblemSpec::Logreg(LogregProblem::default()));
        let OptimizerSpec::Ggt(w) = &c.optimizer else {
            panic!()
        };
        assert_eq!(
            (w.window_size, w.beta1, w.beta2, w.eps),
            (50, 0.0, 1.0, 1e-4)
        );
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::from_toml(LOGREG).unwrap();
        c.grid = Some(GridSpec {
            lr: Some(vec![0.1, 1.0]),
            eps: None,
            window: Some(vec![10, 20]),
        });
        c.lr = LrSpec::Schedule(LrSchedule::InvSqrt { lr: 0.5 });
        c.init = InitSpec::Point { x: vec![0.0; 10] };
        let text = c.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            format!("foo = 1\n{LOGREG}"),
            LOGREG.replace("kind = \"logreg\"", "kind = \"logreg\"\nbogus = 2"),
            LOGREG.replace("beta1 = 0.0", "beta1 = 0.0\nwindow = 3"),
            format!("{LOGREG}\n[grid]\nlrs = [1.0]\n"),
        ] {
            let e = ExperimentConfig::from_toml(&bad).unwrap_err();
            assert!(matches!(e, HarnessError::Config(_)), "{bad}");
        }
    }

    #[test]
    fn ranges_are_validated() {
        for bad in [
            LOGREG.replace("steps = 100", "steps = 0"),
            LOGREG.replace("lr = 0.1", "lr = -1.0"),
            LOGREG.replace("seeds = 3", "seeds = 0"),
            LOGREG.replace("seeds = 3", "seeds = [1, 1]"),
            LOGREG.replace("window_size = 50", "window_size = 0"),
            LOGREG.replace("kind = \"logreg\"", "kind = \"logreg\"\ncond_ratio = 0.5"),
            format!("batch_size = 0\n{LOGREG}"),
            format!("{LOGREG}\n[grid]\nlr = []\n"),
            LOGREG.replace(
                "kind = \"ggt\"\nwindow_size = 50\nbeta1 = 0.0",
                "kind = \"sgd\"",
            ) + "\n[grid]\neps = [1.0]\n",
        ] {
            assert!(ExperimentConfig::from_toml(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_expansion_order() {
        let mut c = ExperimentConfig::from_toml(LOGREG).unwrap();
        c.grid = Some(GridSpec {
            lr: Some(vec![0.1, 1.0]),
            eps: Some(vec![1e-4, 1e-2]),
            window: None,
        });
        let pts = c.grid_points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].lr, pts[1].eps), (0.1, Some(1e-2)));
        let r = c.resolve(&pts[3]).unwrap();
        assert_eq!(r.lr, LrSpec::Constant(1.0));
        assert_eq!(r.optimizer.eps(), Some(1e-2));
        assert!(r.grid.is_none());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 7);
        assert_eq!(g.len(), 7);
        assert!((g[0] - 1e-3).abs() < 1e-15 && (g[6] - 1.0).abs() < 1e-12);
        assert!((g[1] / g[0] - 10f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn barrier_start_must_be_feasible() {
        let text = LOGREG.replace("\"logreg\"", "\"barrier\"").replace("seeds = 3", "seeds = 1\ninit = { kind = \"point\", x = [-100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] }");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
