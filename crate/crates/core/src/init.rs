//! Starting points for the solvers.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_leading_eigvecs, Matrix};
use crate::measurement::MeasurementEnsemble;
use crate::random::{gaussian_tensor, seeded};
use crate::tensor::{DenseTensor, Shape};
use crate::tucker::{t_hosvd, TuckerRank, TuckerTensor};

/// `t_hosvd(A*(y), r)`. The result's scale follows the ensemble's variance:
/// with i.i.d. N(0, s^2) measurement entries it is about `n s^2` times the
/// signal. A zero response gives a zero core, which is not a manifold point.
pub fn spectral_init_regression(
    y: &DVector<f64>,
    ensemble: &MeasurementEnsemble,
    r: &TuckerRank,
) -> Result<TuckerTensor> {
    t_hosvd(&ensemble.adjoint(y)?, r)
}

pub fn spectral_init_svd(y: &DenseTensor, r: &TuckerRank) -> Result<TuckerTensor> {
    t_hosvd(y, r)
}

/// Spectral initialization from observed entries: each `U_k` holds the
/// leading eigenvectors of `M_k(Y_Ω) M_k(Y_Ω)^T` with its diagonal zeroed,
/// and the point is `(Y_Ω / rho) x_k P_{U_k}` with `rho = |Ω| / prod p_k`.
pub fn completion_init(
    ensemble: &MeasurementEnsemble,
    values: &DVector<f64>,
    r: &TuckerRank,
) -> Result<TuckerTensor> {
    if ensemble.completion_indices().is_none() {
        return Err(Error::InvalidArgument(format!(
            "completion initialization needs observed entries, got a {} ensemble",
            ensemble.kind_name()
        )));
    }
    r.check(ensemble.shape())?;
    let rho = ensemble.n() as f64 / ensemble.shape().size() as f64;
    let observed = ensemble.adjoint(values)?.scaled(1.0 / rho);
    let factors = (0..observed.order())
        .map(|k| {
            let m = observed.matricize(k)?;
            let mut g: Matrix = &m * m.transpose();
            g.fill_diagonal(0.0);
            symmetric_leading_eigvecs(&g, r.get(k)).map_err(|e| match e {
                Error::RankOutOfRange { rank, limit, .. } => Error::RankOutOfRange { mode: k, rank, limit },
                e => e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let core = observed.project_onto(&factors, None)?;
    TuckerTensor::new(core, factors)
}

/// Rank-r truncation (T-HOSVD) of a tensor with i.i.d. N(0, 1) entries.
pub fn random_init(shape: &Shape, r: &TuckerRank, seed: u64) -> Result<TuckerTensor> {
    let g = gaussian_tensor(shape, 1.0, &mut seeded(seed));
    t_hosvd(&g, r)
}
