//! Synthetic problem generation, seeded trial execution and trace output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rgn_core::init::{completion_init, random_init, spectral_init_regression, spectral_init_svd};
use rgn_core::linalg::singular_values;
use rgn_core::measurement::{completion_sample, EnsembleKind, gaussian_ensemble, rank1_ensemble};
use rgn_core::random::{gaussian_tensor, orthonormal_frame, seeded, standard_normal, sub_seed};
use rgn_core::rgn::{iht_solve, rgn_solve, rgn_svd_solve, IterationTrace};
use rgn_core::{Error, MeasurementEnsemble, Result, Shape, TuckerTensor};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Init, Problem, Scaling, Solver};

pub const CSV_HEADER: &str = "trial,iter,rel_rmse,residual,wall_ms";

/// One synthetic instance: truth, design and responses.
#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub truth: TuckerTensor,
    pub ensemble: MeasurementEnsemble,
    pub y: DVector<f64>,
    /// Variance of the design entries; `A*(A(X))` is about `n` times this
    /// times `X`.
    pub design_variance: f64,
    /// Seed for random initialization.
    pub init_seed: u64,
}

/// Seed of trial `trial`.
pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.seed.wrapping_add(trial as u64)
}

/// Uniformly random orthonormal factors with an N(0, 1) core. For the svd
/// problem the core is rescaled so that the smallest `sigma_{r_k}(M_k(X))`
/// equals `lambda_min`.
fn generate_truth(cfg: &ExperimentConfig, seed: u64) -> Result<TuckerTensor> {
    let shape = cfg.shape()?;
    let rank = cfg.rank()?;
    let mut rng = seeded(seed);
    let factors: Vec<_> = shape
        .dims()
        .iter()
        .zip(rank.ranks())
        .map(|(&p, &r)| orthonormal_frame(p, r, &mut rng))
        .collect();
    let mut core = gaussian_tensor(&Shape::new(rank.ranks().to_vec())?, 1.0, &mut rng);
    if cfg.problem == Problem::Svd {
        let lambda = cfg
            .lambda_min
            .ok_or_else(|| Error::InvalidArgument("svd needs lambda_min".into()))?;
        let mut smallest = f64::INFINITY;
        for k in 0..core.order() {
            let sv = singular_values(&core.matricize(k)?)?;
            smallest = smallest.min(sv[rank.get(k) - 1]);
        }
        core = core.scaled(lambda / smallest);
    }
    TuckerTensor::new(core, factors)
}

/// Rank-one ensemble whose measurement tensors have entries of variance
/// `1/n`: the first-mode vectors are divided by `sqrt(n)`.
pub fn normalized_rank1_ensemble(n: usize, shape: &Shape, seed: u64) -> Result<MeasurementEnsemble> {
    let e = rank1_ensemble(n, shape, seed)?;
    let EnsembleKind::RankOne { vectors } = e.kind() else {
        unreachable!("rank-one generator")
    };
    let mut vectors = vectors.clone();
    vectors[0] /= (n as f64).sqrt();
    MeasurementEnsemble::rank_one(shape, vectors)
}

pub fn generate_problem(cfg: &ExperimentConfig, trial: usize) -> Result<GeneratedProblem> {
    cfg.validate()?;
    let seed = trial_seed(cfg, trial);
    let truth = generate_truth(cfg, sub_seed(seed, 0))?;
    let shape = cfg.shape()?;
    let n = cfg.sample_size()?;
    let design_seed = sub_seed(seed, 1);
    let paper41 = cfg.scaling == Scaling::Paper41;
    let (ensemble, design_variance, noise_sd) = match cfg.problem {
        Problem::Regression => {
            let var = if paper41 { 1.0 / n as f64 } else { 1.0 };
            let sd = if paper41 { cfg.sigma / (n as f64).sqrt() } else { cfg.sigma };
            (gaussian_ensemble(n, &shape, var, design_seed)?, var, sd)
        }
        Problem::Rank1 => {
            if paper41 {
                let sd = cfg.sigma / (n as f64).sqrt();
                (normalized_rank1_ensemble(n, &shape, design_seed)?, 1.0 / n as f64, sd)
            } else {
                (rank1_ensemble(n, &shape, design_seed)?, 1.0, cfg.sigma)
            }
        }
        Problem::Completion => (completion_sample(n, &shape, design_seed)?, 1.0, cfg.sigma),
        Problem::Svd => (MeasurementEnsemble::identity(&shape), 1.0, cfg.sigma),
    };
    let mut y = ensemble.apply(&truth.dense())?;
    if noise_sd > 0.0 {
        let mut rng = seeded(sub_seed(seed, 2));
        for yi in y.iter_mut() {
            *yi += noise_sd * standard_normal(&mut rng);
        }
    }
    Ok(GeneratedProblem {
        truth,
        ensemble,
        y,
        design_variance,
        init_seed: sub_seed(seed, 3),
    })
}

/// Starting point for a generated problem. Spectral starts for regression
/// designs are divided by `n * design_variance` so they estimate the signal
/// itself; the solvers do not depend on this scale.
pub fn initial_point(cfg: &ExperimentConfig, prob: &GeneratedProblem) -> Result<TuckerTensor> {
    let rank = cfg.rank()?;
    match (cfg.init, cfg.problem) {
        (Init::Random, _) => random_init(prob.ensemble.shape(), &rank, prob.init_seed),
        (Init::Spectral, Problem::Regression | Problem::Rank1) => {
            let x = spectral_init_regression(&prob.y, &prob.ensemble, &rank)?;
            Ok(x.scaled(1.0 / (prob.ensemble.n() as f64 * prob.design_variance)))
        }
        (Init::Spectral, Problem::Completion) => completion_init(&prob.ensemble, &prob.y, &rank),
        (Init::Spectral, Problem::Svd) => spectral_init_svd(&prob.ensemble.adjoint(&prob.y)?, &rank),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub rel_rmse: Option<f64>,
    pub residual: f64,
    pub ls_condition: Option<f64>,
    pub rank_deficient: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub stop: Option<String>,
    /// Solver failure, if any; the batch continues past failed trials.
    pub error: Option<String>,
    pub final_rel_rmse: Option<f64>,
    pub iterations: usize,
    /// Solver wall time, excluding problem generation.
    pub wall_ms: f64,
}

impl TrialOutcome {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rel_rmse).collect()
    }

    /// First iteration with relative error below `level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.rel_rmse.is_some_and(|e| e < level))
            .map(|r| r.iter)
    }
}

fn outcome_from_trace(trial: usize, seed: u64, trace: &IterationTrace, wall_ms: f64) -> TrialOutcome {
    let rows: Vec<TraceRow> = trace
        .records
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            rel_rmse: r.rel_rmse,
            residual: r.residual,
            ls_condition: r.ls_condition,
            rank_deficient: r.rank_deficient,
            wall_ms: r.wall_ms,
        })
        .collect();
    TrialOutcome {
        trial,
        seed,
        final_rel_rmse: trace.final_error(),
        iterations: trace.iterations(),
        rows,
        stop: Some(trace.stop.to_string()),
        error: None,
        wall_ms,
    }
}

/// Solves an already generated instance with the configured solver.
pub fn solve_problem(
    cfg: &ExperimentConfig,
    prob: &GeneratedProblem,
) -> Result<(TuckerTensor, IterationTrace)> {
    let rank = cfg.rank()?;
    let rgn = cfg.rgn_config()?;
    let x0 = initial_point(cfg, prob)?;
    let truth = prob.truth.dense();
    match (cfg.solver, cfg.problem) {
        (Solver::Rgn, Problem::Svd) => {
            let y = prob.ensemble.adjoint(&prob.y)?;
            rgn_svd_solve(&y, &rank, &x0, &rgn, Some(&truth))
        }
        (Solver::Rgn, _) => rgn_solve(&prob.y, &prob.ensemble, &rank, &x0, &rgn, Some(&truth)),
        (Solver::Iht, _) => {
            let step = cfg
                .step
                .unwrap_or(1.0 / (prob.ensemble.n() as f64 * prob.design_variance));
            iht_solve(&prob.y, &prob.ensemble, &rank, &x0, step, &rgn, Some(&truth))
        }
    }
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> TrialOutcome {
    let seed = trial_seed(cfg, trial);
    let failed = |e: Error| TrialOutcome {
        trial,
        seed,
        rows: Vec::new(),
        stop: None,
        error: Some(e.to_string()),
        final_rel_rmse: None,
        iterations: 0,
        wall_ms: 0.0,
    };
    let prob = match generate_problem(cfg, trial) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    let started = Instant::now();
    match solve_problem(cfg, &prob) {
        Ok((_, trace)) => {
            let ms = if cfg.record_timing {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            outcome_from_trace(trial, seed, &trace, ms)
        }
        Err(e) => failed(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median_final_rel_rmse: Option<f64>,
    pub median_iterations: Option<f64>,
    pub mean_wall_ms: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialOutcome>,
    pub summary: Summary,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    })
}

fn summarize(trials: &[TrialOutcome]) -> Summary {
    let ok: Vec<&TrialOutcome> = trials.iter().filter(|t| t.error.is_none()).collect();
    let finals: Vec<f64> = ok.iter().filter_map(|t| t.final_rel_rmse).collect();
    let iters: Vec<f64> = ok.iter().map(|t| t.iterations as f64).collect();
    let walls: Vec<f64> = ok.iter().map(|t| t.wall_ms).collect();
    Summary {
        median_final_rel_rmse: median(&finals),
        median_iterations: median(&iters),
        mean_wall_ms: (!walls.is_empty()).then(|| walls.iter().sum::<f64>() / walls.len() as f64),
        failures: trials.len() - ok.len(),
    }
}

/// Runs every trial, spreading them over `cfg.workers` threads. Results do
/// not depend on the worker count.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let workers = cfg.workers.min(cfg.trials);
    let mut trials: Vec<TrialOutcome> = if workers <= 1 {
        (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..cfg.trials)
                            .step_by(workers)
                            .map(|t| run_trial(cfg, t))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("trial worker panicked"))
                .collect()
        })
    };
    trials.sort_by_key(|t| t.trial);
    Ok(ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        summary: summarize(&trials),
        trials,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

/// One row per trial and iteration: `trial,iter,rel_rmse,residual,wall_ms`.
/// `rel_rmse` is empty when no truth was available.
pub fn to_csv(report: &ExperimentReport) -> String {
    to_csv_with(report, true)
}

/// CSV without the timing column, which is the part covered by the
/// determinism guarantee.
pub fn to_csv_untimed(report: &ExperimentReport) -> String {
    to_csv_with(report, false)
}

fn to_csv_with(report: &ExperimentReport, timing: bool) -> String {
    let mut s = String::new();
    if timing {
        s.push_str(CSV_HEADER);
    } else {
        s.push_str("trial,iter,rel_rmse,residual");
    }
    s.push('\n');
    for t in &report.trials {
        for r in &t.rows {
            let _ = write!(s, "{},{},{},{:e}", t.trial, r.iter, fmt_opt(r.rel_rmse), r.residual);
            if timing {
                let _ = write!(s, ",{:.3}", r.wall_ms);
            }
            s.push('\n');
        }
    }
    s
}

pub fn to_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))
}

pub fn from_json(text: &str) -> Result<ExperimentReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes the CSV to `path` and the JSON report next to it with a `.json`
/// extension. Returns the JSON path.
pub fn emit(report: &ExperimentReport, path: &Path) -> Result<PathBuf> {
    std::fs::write(path, to_csv(report))?;
    let json = path.with_extension("json");
    std::fs::write(&json, to_json(report)?)?;
    Ok(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(problem: Problem) -> ExperimentConfig {
        ExperimentConfig {
            problem,
            dims: vec![6, 6, 6],
            ranks: vec![2, 2, 2],
            n: Some(match problem {
                Problem::Completion => 120,
                Problem::Rank1 => 300,
                _ => 150,
            }),
            lambda_min: Some(20.0),
            max_iter: 8,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn noiseless_responses_are_exact() {
        let cfg = small(Problem::Regression);
        let p = generate_problem(&cfg, 0).unwrap();
        assert_eq!(p.y, p.ensemble.apply(&p.truth.dense()).unwrap());
    }

    #[test]
    fn svd_signal_strength_is_calibrated() {
        let mut cfg = small(Problem::Svd);
        cfg.sigma = 1.0;
        let p = generate_problem(&cfg, 0).unwrap();
        let x = p.truth.dense();
        let smallest = (0..3)
            .map(|k| singular_values(&x.matricize(k).unwrap()).unwrap()[1])
            .fold(f64::INFINITY, f64::min);
        assert!((smallest - 20.0).abs() < 1e-10 * 20.0);
    }

    #[test]
    fn generation_is_deterministic() {
        for problem in [Problem::Regression, Problem::Rank1, Problem::Completion, Problem::Svd] {
            let mut cfg = small(problem);
            cfg.sigma = 0.1;
            let a = generate_problem(&cfg, 2).unwrap();
            let b = generate_problem(&cfg, 2).unwrap();
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.ensemble, b.ensemble);
            assert_eq!(a.y, b.y);
            let c = generate_problem(&cfg, 3).unwrap();
            assert_ne!(a.y, c.y);
        }
    }

    #[test]
    fn every_problem_runs() {
        for problem in [Problem::Regression, Problem::Rank1, Problem::Completion, Problem::Svd] {
            let cfg = small(problem);
            let report = run(&cfg).unwrap();
            assert_eq!(report.trials.len(), 1);
            let t = &report.trials[0];
            assert!(t.error.is_none(), "{problem}: {:?}", t.error);
            assert!(t.final_rel_rmse.unwrap() < 1e-3, "{problem}: {:?}", t.final_rel_rmse);
        }
    }

    #[test]
    fn workers_do_not_change_results() {
        let mut cfg = small(Problem::Regression);
        cfg.trials = 3;
        cfg.record_timing = false;
        let a = run(&cfg).unwrap();
        cfg.workers = 2;
        let b = run(&cfg).unwrap();
        assert_eq!(to_csv(&a), to_csv(&b));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let mut cfg = small(Problem::Svd);
        cfg.max_iter = 2;
        let report = run(&cfg).unwrap();
        let csv = to_csv(&report);
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + report.trials[0].rows.len());
        let back = from_json(&to_json(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
