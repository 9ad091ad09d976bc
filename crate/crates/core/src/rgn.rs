//! Riemannian Gauss-Newton iterations, the closed-form tensor SVD variant,
//! and an iterative hard thresholding baseline.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{lstsq_cgls, lstsq_qr};
use crate::manifold::{contract, extend, retract, retract_dense, tangent_basis, TangentBasis, TangentVector};
use crate::measurement::{MeasurementEnsemble, SketchedCovariates};
use crate::tensor::DenseTensor;
use crate::tucker::{truncate, Truncation, TuckerRank, TuckerTensor};

/// Relative residual change below which an iteration counts as stagnant.
pub const STAGNATION_TOL: f64 = 1e-15;

/// Consecutive stagnant iterations that stop a run.
pub const STAGNATION_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LsSolver {
    /// Householder QR of the stacked design.
    #[default]
    Qr,
    /// Conjugate gradients on the normal equations.
    Cg,
}

impl FromStr for LsSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qr" => Ok(LsSolver::Qr),
            "cg" | "cgls" => Ok(LsSolver::Cg),
            other => Err(Error::InvalidArgument(format!("unknown least-squares solver {other:?}"))),
        }
    }
}

impl fmt::Display for LsSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LsSolver::Qr => "qr",
            LsSolver::Cg => "cg",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgnConfig {
    pub max_iter: usize,
    /// Stop once the relative error against a supplied truth drops below this.
    pub rel_rmse_tol: f64,
    pub retraction: Truncation,
    pub ls_solver: LsSolver,
    pub record_timing: bool,
}

impl Default for RgnConfig {
    fn default() -> Self {
        RgnConfig {
            max_iter: 300,
            rel_rmse_tol: 1e-14,
            retraction: Truncation::StHosvd,
            ls_solver: LsSolver::Qr,
            record_timing: true,
        }
    }
}

impl RgnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.rel_rmse_tol >= 0.0) {
            return Err(Error::InvalidArgument("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub rel_rmse: Option<f64>,
    /// `||y - A(X^t)||_2`.
    pub residual: f64,
    pub ls_condition: Option<f64>,
    pub rank_deficient: bool,
    /// Milliseconds spent on this iteration; zero when timing is off.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIter,
    Tolerance,
    Stagnation,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIter => "max-iter",
            StopReason::Tolerance => "tolerance",
            StopReason::Stagnation => "stagnation",
        })
    }
}

/// Per-iteration record, starting with the initial point at `iter = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl IterationTrace {
    /// Number of iterations performed (excluding the initial record).
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rel_rmse).collect()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.rel_rmse)
    }

    /// First iteration whose relative error is below `level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_rmse.is_some_and(|e| e < level))
            .map(|r| r.iter)
    }
}

/// `||x - truth|| / ||truth||`.
pub fn rel_rmse(x: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    let scale = truth.hs_norm();
    if scale == 0.0 {
        return Err(Error::InvalidArgument("relative error against a zero truth".into()));
    }
    Ok(x.sub(truth)?.hs_norm() / scale)
}

/// Slope of the least-squares line through `(log e_{t-1}, log e_t)` over the
/// iterations with `lo < e_t < hi`; steps that land below `lo` (typically on
/// the roundoff floor) are ignored. `None` with fewer than two such steps.
pub fn convergence_order(errors: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = errors
        .windows(2)
        .filter(|w| w[1] > lo && w[1] < hi && w[0] > 0.0)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Tangent-space least-squares solution with solver diagnostics.
#[derive(Debug, Clone)]
pub struct TangentLsSolution {
    pub vector: TangentVector,
    pub rank_deficient: bool,
    pub condition: f64,
}

/// `argmin_theta ||y - Phi theta||` over the stacked tangent coordinates.
/// Rank-deficient or underdetermined designs yield the minimum-norm
/// solution with `rank_deficient` set.
pub fn solve_tangent_ls(
    cov: &SketchedCovariates,
    y: &DVector<f64>,
    cfg: &RgnConfig,
) -> Result<TangentLsSolution> {
    let design = cov.design();
    let sol = match cfg.ls_solver {
        LsSolver::Qr => lstsq_qr(&design, y)?,
        LsSolver::Cg => lstsq_cgls(&design, y, 1e-14, 20 * design.ncols().max(50))?,
    };
    Ok(TangentLsSolution {
        vector: TangentVector::from_coords(&cov.basis, sol.x.as_slice())?,
        rank_deficient: sol.rank_deficient,
        condition: sol.condition,
    })
}

/// One Gauss-Newton step from `x`.
#[derive(Debug, Clone)]
pub struct RgnStep {
    pub basis: Arc<TangentBasis>,
    pub ls: TangentLsSolution,
    pub next: TuckerTensor,
}

impl RgnStep {
    /// The tangent-space least-squares point before retraction.
    pub fn half_point(&self) -> DenseTensor {
        extend(&self.ls.vector)
    }
}

/// Retracts, falling back to the dense truncation when the fast path sees a
/// candidate of deficient rank.
fn retract_any(v: &TangentVector, r: &TuckerRank, method: Truncation) -> Result<TuckerTensor> {
    match retract(v, r, method) {
        Err(Error::DegenerateTruncation { .. }) => retract_dense(v, r, method),
        other => other,
    }
}

pub fn rgn_step(
    x: &TuckerTensor,
    ensemble: &MeasurementEnsemble,
    y: &DVector<f64>,
    r: &TuckerRank,
    cfg: &RgnConfig,
) -> Result<RgnStep> {
    let basis = tangent_basis(x)?;
    let cov = ensemble.sketch_covariates(&basis)?;
    let ls = solve_tangent_ls(&cov, y, cfg)?;
    let next = retract_any(&ls.vector, r, cfg.retraction)?;
    Ok(RgnStep { basis, ls, next })
}

fn check_start(x0: &TuckerTensor, r: &TuckerRank, shape: &crate::tensor::Shape) -> Result<()> {
    if x0.rank() != *r || x0.shape() != *shape {
        return Err(Error::DimensionMismatch(format!(
            "initial point has rank {} at shape {}, expected rank {r} at shape {shape}",
            x0.rank(),
            x0.shape()
        )));
    }
    r.check(shape)
}

/// Shared iteration driver: `step` maps the current point to the next one
/// and reports LS diagnostics; `residual` evaluates the data misfit.
struct Driver<'a> {
    cfg: &'a RgnConfig,
    truth: Option<&'a DenseTensor>,
    records: Vec<IterationRecord>,
    stagnant: usize,
}

impl<'a> Driver<'a> {
    fn new(cfg: &'a RgnConfig, truth: Option<&'a DenseTensor>) -> Self {
        Driver {
            cfg,
            truth,
            records: Vec::new(),
            stagnant: 0,
        }
    }

    fn error(&self, x: &DenseTensor) -> Result<Option<f64>> {
        self.truth.map(|t| rel_rmse(x, t)).transpose()
    }

    /// Records an iterate; returns the stop reason if the run should end.
    fn record(
        &mut self,
        iter: usize,
        x: &DenseTensor,
        residual: f64,
        ls: Option<(f64, bool)>,
        started: Instant,
    ) -> Result<Option<StopReason>> {
        if !x.is_finite() || !residual.is_finite() {
            return Err(Error::NonFinite { iteration: iter });
        }
        let rel = self.error(x)?;
        let wall_ms = if self.cfg.record_timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        if let Some(prev) = self.records.last() {
            if (residual - prev.residual).abs() <= STAGNATION_TOL * prev.residual {
                self.stagnant += 1;
            } else {
                self.stagnant = 0;
            }
        }
        self.records.push(IterationRecord {
            iter,
            rel_rmse: rel,
            residual,
            ls_condition: ls.map(|l| l.0),
            rank_deficient: ls.is_some_and(|l| l.1),
            wall_ms,
        });
        if iter == 0 {
            return Ok(None);
        }
        if rel.is_some_and(|e| e < self.cfg.rel_rmse_tol) {
            Ok(Some(StopReason::Tolerance))
        } else if self.stagnant >= STAGNATION_WINDOW {
            Ok(Some(StopReason::Stagnation))
        } else if iter >= self.cfg.max_iter {
            Ok(Some(StopReason::MaxIter))
        } else {
            Ok(None)
        }
    }

    fn finish(self, stop: StopReason) -> IterationTrace {
        IterationTrace {
            records: self.records,
            stop,
        }
    }
}

/// Riemannian Gauss-Newton for `y ≈ A(X)` with `X` of Tucker rank `r`.
pub fn rgn_solve(
    y: &DVector<f64>,
    ensemble: &MeasurementEnsemble,
    r: &TuckerRank,
    x0: &TuckerTensor,
    cfg: &RgnConfig,
    truth: Option<&DenseTensor>,
) -> Result<(TuckerTensor, IterationTrace)> {
    cfg.validate()?;
    check_start(x0, r, ensemble.shape())?;
    if y.len() != ensemble.n() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} measurements",
            y.len(),
            ensemble.n()
        )));
    }
    let mut driver = Driver::new(cfg, truth);
    let mut x = x0.clone();
    let dense = x.dense();
    let res = (ensemble.apply(&dense)? - y).norm();
    driver.record(0, &dense, res, None, Instant::now())?;
    for iter in 1..=cfg.max_iter {
        let started = Instant::now();
        let step = rgn_step(&x, ensemble, y, r, cfg).map_err(|e| e.at_iteration(iter))?;
        x = step.next;
        let dense = x.dense();
        let res = (ensemble.apply(&dense)? - y).norm();
        let ls = Some((step.ls.condition, step.ls.rank_deficient));
        if let Some(stop) = driver.record(iter, &dense, res, ls, started)? {
            return Ok((x, driver.finish(stop)));
        }
    }
    Ok((x, driver.finish(StopReason::MaxIter)))
}

/// Riemannian Gauss-Newton for tensor SVD (`A` the identity): each step
/// retracts the projection of `Y` onto the current tangent space, whose
/// coordinates are `L*(Y)` in closed form.
pub fn rgn_svd_solve(
    y: &DenseTensor,
    r: &TuckerRank,
    x0: &TuckerTensor,
    cfg: &RgnConfig,
    truth: Option<&DenseTensor>,
) -> Result<(TuckerTensor, IterationTrace)> {
    cfg.validate()?;
    check_start(x0, r, y.shape())?;
    let mut driver = Driver::new(cfg, truth);
    let mut x = x0.clone();
    let dense = x.dense();
    driver.record(0, &dense, dense.sub(y)?.hs_norm(), None, Instant::now())?;
    for iter in 1..=cfg.max_iter {
        let started = Instant::now();
        let next = tangent_basis(&x)
            .and_then(|basis| contract(&basis, y))
            .and_then(|v| retract_any(&v, r, cfg.retraction))
            .map_err(|e| e.at_iteration(iter))?;
        x = next;
        let dense = x.dense();
        let res = dense.sub(y)?.hs_norm();
        if let Some(stop) = driver.record(iter, &dense, res, Some((1.0, false)), started)? {
            return Ok((x, driver.finish(stop)));
        }
    }
    Ok((x, driver.finish(StopReason::MaxIter)))
}

/// Iterative hard thresholding: `X <- H_r(X - step * A*(A(X) - y))`.
///
/// Aborts with [`Error::Diverged`] once the error (against the truth when
/// supplied, otherwise the residual) exceeds ten times its initial value.
pub fn iht_solve(
    y: &DVector<f64>,
    ensemble: &MeasurementEnsemble,
    r: &TuckerRank,
    x0: &TuckerTensor,
    step: f64,
    cfg: &RgnConfig,
    truth: Option<&DenseTensor>,
) -> Result<(TuckerTensor, IterationTrace)> {
    cfg.validate()?;
    check_start(x0, r, ensemble.shape())?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step size must be positive".into()));
    }
    let mut driver = Driver::new(cfg, truth);
    let mut x = x0.clone();
    let mut dense = x.dense();
    let mut resid = ensemble.apply(&dense)? - y;
    driver.record(0, &dense, resid.norm(), None, Instant::now())?;
    let initial = driver.records[0].rel_rmse.unwrap_or(driver.records[0].residual);
    for iter in 1..=cfg.max_iter {
        let started = Instant::now();
        let mut z = dense.clone();
        z.axpy(-step, &ensemble.adjoint(&resid)?)?;
        if !z.is_finite() {
            return Err(Error::NonFinite { iteration: iter });
        }
        let mut next = truncate(&z, r, cfg.retraction).map_err(|e| e.at_iteration(iter))?;
        next.normalize_signs();
        x = next;
        dense = x.dense();
        resid = ensemble.apply(&dense)? - y;
        let stop = driver.record(iter, &dense, resid.norm(), None, started)?;
        let last = driver.records.last().expect("just recorded");
        if last.rel_rmse.unwrap_or(last.residual) > 10.0 * initial {
            return Err(Error::Diverged { iteration: iter });
        }
        if let Some(stop) = stop {
            return Ok((x, driver.finish(stop)));
        }
    }
    Ok((x, driver.finish(StopReason::MaxIter)))
}
