//! Executes (optimizer × problem × seed) runs and persists their outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ggt_core::linalg::{all_finite, norm2};
use ggt_core::spectra::{capture, density_histogram, log10_extent, SpectrumSnapshot};
use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, GridPoint};
use crate::error::{HarnessError, Result};
use crate::rng::stream;
use crate::trace::{write_csv, write_density, write_spectra, write_trace, TraceRow};

/// Halvings tried before a step that leaves the feasible set counts as failed.
pub const MAX_BACKTRACKS: u32 = 50;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_HASH: &str = env!("GGT_GIT_HASH");

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<SpectrumSnapshot<f64>>,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

impl SeedOutcome {
    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Resolved single-run config (no grid).
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedOutcome>,
}

impl RunOutcome {
    pub fn failed(&self) -> usize {
        self.seeds.iter().filter(|s| s.failure.is_some()).count()
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        self.seeds
            .iter()
            .flat_map(|s| s.rows.iter().copied())
            .collect()
    }

    /// Median over seeds of the final loss; a failed seed counts as `+∞`.
    pub fn median_final_loss(&self) -> f64 {
        let finals: Vec<f64> = self
            .seeds
            .iter()
            .map(|s| {
                if s.failure.is_some() {
                    f64::INFINITY
                } else {
                    s.final_loss()
                }
            })
            .collect();
        crate::compare::median(&finals)
    }
}

/// Runs one seed of a resolved config. Divergence is reported in the outcome,
/// not as an error.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let oracle = cfg.problem.build()?;
    let d = oracle.dim();
    let mut opt = cfg.optimizer.build(d, cfg.lr.schedule())?;
    let mut x = cfg
        .init
        .point(d, &mut stream(cfg.master_seed, seed, "init"))?;
    if !oracle.is_feasible(x.view()) {
        return Err(crate::error::config_err(format!(
            "seed {seed}: initial point is infeasible"
        )));
    }
    let mut rng = stream(cfg.master_seed, seed, "sample");
    let window = cfg.optimizer.window_size().unwrap_or(0);

    let mut out = SeedOutcome {
        seed,
        rows: Vec::with_capacity(cfg.steps + 1),
        snapshots: Vec::new(),
        failure: None,
    };
    let record = |x: &Array1<f64>,
                  step: usize,
                  ns: u64,
                  backtracks: u32|
     -> std::result::Result<TraceRow, String> {
        let loss = oracle.loss(x.view()).map_err(|e| e.to_string())?;
        let grad_norm = norm2(oracle.gradient(x.view()).map_err(|e| e.to_string())?.view());
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(format!(
                "non-finite loss {loss} or gradient norm {grad_norm} at step {step}"
            ));
        }
        Ok(TraceRow {
            step,
            seed,
            loss,
            grad_norm,
            step_time_ns: ns,
            backtracks,
        })
    };
    match record(&x, 0, 0, 0) {
        Ok(r) => out.rows.push(r),
        Err(e) => {
            out.failure = Some(e);
            return Ok(out);
        }
    }

    for t in 1..=cfg.steps {
        let start = cfg.timing.then(Instant::now);
        let stepped = (|| -> std::result::Result<u32, String> {
            let g = oracle
                .sample_gradient(x.view(), &mut rng, cfg.batch_size)
                .map_err(|e| e.to_string())?;
            let delta = opt.update(g.view()).map_err(|e| e.to_string())?;
            let mut scale = 1.0;
            let mut backtracks = 0;
            loop {
                let cand = &x - &(&delta * scale);
                if !all_finite(cand.view()) {
                    return Err(format!("non-finite iterate at step {t}"));
                }
                if oracle.is_feasible(cand.view()) {
                    x = cand;
                    return Ok(backtracks);
                }
                if backtracks == MAX_BACKTRACKS {
                    return Err(format!(
                        "step {t} still infeasible after {MAX_BACKTRACKS} halvings"
                    ));
                }
                scale *= 0.5;
                backtracks += 1;
            }
        })();
        let ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        let row = stepped.and_then(|b| record(&x, t, ns, b));
        match row {
            Ok(r) => out.rows.push(r),
            Err(e) => {
                out.failure = Some(e);
                break;
            }
        }
        if cfg.spectra_every > 0 && t % cfg.spectra_every == 0 {
            if let Some(p) = opt.preconditioner() {
                out.snapshots.push(capture(p, t, window));
            }
        }
    }
    Ok(out)
}

/// Runs every seed of a resolved config, in parallel when asked. Results are
/// in seed order either way and each seed owns its streams, so the two modes
/// produce identical outcomes.
pub fn execute(cfg: &ExperimentConfig, parallel: bool) -> Result<RunOutcome> {
    let seeds = cfg.seeds.indices();
    let outcomes: Result<Vec<SeedOutcome>> = if parallel {
        seeds.par_iter().map(|&s| run_seed(cfg, s)).collect()
    } else {
        seeds.iter().map(|&s| run_seed(cfg, s)).collect()
    };
    Ok(RunOutcome {
        config: cfg.clone(),
        seeds: outcomes?,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'a str,
    git_hash: &'a str,
    schema: u32,
    status: &'a str,
    seeds: Vec<SeedStatus>,
    config: &'a ExperimentConfig,
}

#[derive(Debug, Serialize)]
struct SeedStatus {
    seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    steps_completed: usize,
    final_loss: f64,
}

pub fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed:03}"))
}

/// Writes `trace.csv`, per-seed `spectra.csv`/`density.csv` and `manifest.toml`.
pub fn write_outcome(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    write_trace(&dir.join("trace.csv"), &outcome.rows())?;
    for s in &outcome.seeds {
        if s.snapshots.is_empty() {
            continue;
        }
        let sd = seed_dir(dir, s.seed);
        write_spectra(&sd.join("spectra.csv"), &s.snapshots)?;
        let (lo, hi) = log10_extent(&s.snapshots).unwrap_or((0.0, 1.0));
        let (lo, hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        let grid = density_histogram(&s.snapshots, outcome.config.density_bins, (lo, hi))?;
        write_density(&sd.join("density.csv"), &grid)?;
    }
    let manifest = Manifest {
        version: VERSION,
        git_hash: GIT_HASH,
        schema: 1,
        status: if outcome.failed() == 0 {
            "ok"
        } else {
            "failed"
        },
        seeds: outcome
            .seeds
            .iter()
            .map(|s| SeedStatus {
                seed: s.seed,
                status: if s.failure.is_some() { "failed" } else { "ok" },
                message: s.failure.clone(),
                steps_completed: s.rows.last().map_or(0, |r| r.step),
                final_loss: s.final_loss(),
            })
            .collect(),
        config: &outcome.config,
    };
    let text = toml::to_string(&manifest).expect("manifest is representable in TOML");
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(HarnessError::io(&path))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    pub out: Option<&'a Path>,
    pub master_seed: Option<u64>,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub points: Vec<(GridPoint, RunOutcome)>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.points.iter().map(|(_, o)| o.failed()).sum()
    }

    pub fn total(&self) -> usize {
        self.points.iter().map(|(_, o)| o.seeds.len()).sum()
    }

    /// Grid point with the lowest median final loss; the earliest wins ties.
    pub fn best(&self) -> Option<&(GridPoint, RunOutcome)> {
        self.points.iter().fold(None, |best, cur| match best {
            Some(b) if b.1.median_final_loss() <= cur.1.median_final_loss() => Some(b),
            _ if cur.1.median_final_loss().is_nan() => best,
            _ => Some(cur),
        })
    }
}

/// Validates, runs every grid point and writes outputs. A config without a grid
/// writes straight into the output directory; a grid writes one `grid-NNN`
/// subdirectory per point plus `grid.csv`. Nothing is written on config errors.
///
/// Returns the report even when some seeds diverged; see [`RunReport::failed`].
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    if let Some(m) = opts.master_seed {
        cfg.master_seed = m;
    }
    if let Some(o) = opts.out {
        cfg.output_dir = o.to_path_buf();
    }
    cfg.validate()?;
    let points = cfg.grid_points()?;
    let resolved: Vec<ExperimentConfig> = points
        .iter()
        .map(|p| cfg.resolve(p))
        .collect::<Result<_>>()?;

    // flatten (point, seed) pairs so the pool balances across the whole grid
    let jobs: Vec<(usize, u64)> = resolved
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.indices().into_iter().map(move |s| (i, s)))
        .collect();
    let run = |&(i, s): &(usize, u64)| run_seed(&resolved[i], s);
    let results: Vec<SeedOutcome> = if opts.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    let mut results = results.into_iter();
    let outcomes: Vec<(GridPoint, RunOutcome)> = points
        .iter()
        .zip(&resolved)
        .map(|(p, c)| {
            let seeds = results.by_ref().take(c.seeds.indices().len()).collect();
            (
                *p,
                RunOutcome {
                    config: c.clone(),
                    seeds,
                },
            )
        })
        .collect();

    let dir = cfg.output_dir.clone();
    if cfg.is_grid() {
        for (p, o) in &outcomes {
            write_outcome(o, &dir.join(format!("grid-{:03}", p.index)))?;
        }
        let rows = outcomes.iter().map(|(p, o)| GridRow {
            index: p.index,
            lr: p.lr,
            eps: p.eps,
            window: p.window,
            median_final_loss: o.median_final_loss(),
            failed_seeds: o.failed(),
        });
        write_csv(
            &dir.join("grid.csv"),
            &[
                "index",
                "lr",
                "eps",
                "window",
                "median_final_loss",
                "failed_seeds",
            ],
            rows,
        )?;
    } else {
        write_outcome(&outcomes[0].1, &dir)?;
    }
    Ok(RunReport {
        output_dir: dir,
        points: outcomes,
    })
}

#[derive(Serialize)]
struct GridRow {
    index: usize,
    lr: f64,
    eps: Option<f64>,
    window: Option<usize>,
    median_final_loss: f64,
    failed_seeds: usize,
}
