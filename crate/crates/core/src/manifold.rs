//! Geometry of the manifold of fixed Tucker rank tensors: tangent frames,
//! the coordinate extension `L` and its adjoint contraction `L*`, the
//! tangent projector, and the HOSVD retraction.
//!
//! A tangent vector at `X = S x_1 U_1 ... x_d U_d` has coordinates
//! `(B, D_1, ..., D_d)` and represents
//! `B x_1 U_1 ... x_d U_d + sum_k T_k(U_k_perp D_k W_k^T)`, where
//! `W_k = (U_d ⊗ ... ⊗ U_{k+1} ⊗ U_{k-1} ⊗ ... ⊗ U_1) V_k` and `V_k` is an
//! orthonormal basis of the row space of `M_k(S)`.

use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_complement, qr_q, singular_values, thin_qr, Matrix};
use crate::measurement::MeasurementEnsemble;
use crate::tensor::{DenseTensor, Shape};
use crate::tucker::{truncate, Truncation, TuckerRank, TuckerTensor};

/// Relative threshold on `sigma_{r_k}(M_k(S))` below which the core is
/// treated as rank deficient.
pub const CORE_RANK_TOL: f64 = 1e-12;

/// Relative threshold on the candidate's `r_k`-th singular value below
/// which the fast retraction reports a degenerate truncation.
pub const TRUNCATION_RANK_TOL: f64 = 1e-13;

/// Frames spanning the tangent space at a rank-r point.
#[derive(Debug)]
pub struct TangentBasis {
    base: TuckerTensor,
    u_perp: Vec<Matrix>,
    v: Vec<Matrix>,
    w: Vec<Matrix>,
}

impl TangentBasis {
    pub fn base(&self) -> &TuckerTensor {
        &self.base
    }

    pub fn factors(&self) -> &[Matrix] {
        self.base.factors()
    }

    pub fn u_perp(&self) -> &[Matrix] {
        &self.u_perp
    }

    /// `V_k`, an `r_{-k} x r_k` orthonormal basis of the row space of `M_k(S)`.
    pub fn v(&self) -> &[Matrix] {
        &self.v
    }

    /// `W_k`, a `p_{-k} x r_k` orthonormal basis of the row space of `M_k(X)`.
    pub fn w(&self) -> &[Matrix] {
        &self.w
    }

    pub fn order(&self) -> usize {
        self.u_perp.len()
    }

    pub fn shape(&self) -> Shape {
        self.base.shape()
    }

    pub fn rank(&self) -> TuckerRank {
        self.base.rank()
    }

    pub fn core_shape(&self) -> &Shape {
        self.base.core().shape()
    }

    /// Number of tangent coordinates, `prod r_k + sum r_k (p_k - r_k)`.
    pub fn dim(&self) -> usize {
        self.rank().manifold_dim(&self.shape())
    }

    /// Column counts of the coordinate blocks: `prod r_k`, then
    /// `(p_k - r_k) r_k` per mode.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.core_shape().size()];
        sizes.extend((0..self.order()).map(|k| self.u_perp[k].ncols() * self.v[k].ncols()));
        sizes
    }
}

/// Tangent frames at `x`. Fails with [`Error::DegenerateCore`] when some
/// unfolding of the core has rank below `r_k`.
pub fn tangent_basis(x: &TuckerTensor) -> Result<Arc<TangentBasis>> {
    let core = x.core();
    let factors = x.factors();
    let d = x.order();
    let mut u_perp = Vec::with_capacity(d);
    let mut v = Vec::with_capacity(d);
    let mut w = Vec::with_capacity(d);
    for k in 0..d {
        let mk = core.matricize(k)?;
        let r = mk.nrows();
        if mk.ncols() < r {
            return Err(Error::DegenerateCore { mode: k });
        }
        let sv = singular_values(&mk)?;
        let top = sv.first().copied().unwrap_or(0.0);
        if !(top > 0.0 && sv[r - 1] > CORE_RANK_TOL * top) {
            return Err(Error::DegenerateCore { mode: k });
        }
        let vk = qr_q(&mk.transpose()).map_err(|_| Error::DegenerateCore { mode: k })?;
        // W_k^T = M_k(T_k(V_k^T) x_{j != k} U_j)
        let wt = DenseTensor::tensorize(&vk.transpose(), k, core.shape())?
            .expand_by(factors, Some(k))?
            .matricize(k)?;
        u_perp.push(orthonormal_complement(&factors[k]));
        v.push(vk);
        w.push(wt.transpose());
    }
    Ok(Arc::new(TangentBasis {
        base: x.clone(),
        u_perp,
        v,
        w,
    }))
}

/// Coordinates `(B, D_1, ..., D_d)` of a tangent vector, tied to the basis
/// they were expressed in.
#[derive(Debug, Clone)]
pub struct TangentVector {
    b: DenseTensor,
    d: Vec<Matrix>,
    basis: Arc<TangentBasis>,
}

impl TangentVector {
    pub fn new(basis: &Arc<TangentBasis>, b: DenseTensor, d: Vec<Matrix>) -> Result<Self> {
        if b.shape() != basis.core_shape() {
            return Err(Error::DimensionMismatch(format!(
                "B has shape {}, the core has shape {}",
                b.shape(),
                basis.core_shape()
            )));
        }
        if d.len() != basis.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} D blocks for an order-{} basis",
                d.len(),
                basis.order()
            )));
        }
        for (k, dk) in d.iter().enumerate() {
            let (rows, cols) = (basis.u_perp[k].ncols(), basis.v[k].ncols());
            if dk.nrows() != rows || dk.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "D_{k} is {}x{}, expected {rows}x{cols}",
                    dk.nrows(),
                    dk.ncols()
                )));
            }
        }
        Ok(TangentVector {
            b,
            d,
            basis: Arc::clone(basis),
        })
    }

    pub fn zeros(basis: &Arc<TangentBasis>) -> Self {
        let d = (0..basis.order())
            .map(|k| Matrix::zeros(basis.u_perp[k].ncols(), basis.v[k].ncols()))
            .collect();
        TangentVector {
            b: DenseTensor::zeros(basis.core_shape().clone()),
            d,
            basis: Arc::clone(basis),
        }
    }

    /// Inverse of [`TangentVector::coords`].
    pub fn from_coords(basis: &Arc<TangentBasis>, coords: &[f64]) -> Result<Self> {
        if coords.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for a {}-dimensional tangent space",
                coords.len(),
                basis.dim()
            )));
        }
        let nb = basis.core_shape().size();
        let b = DenseTensor::new(basis.core_shape().clone(), coords[..nb].to_vec())?;
        let mut offset = nb;
        let mut d = Vec::with_capacity(basis.order());
        for k in 0..basis.order() {
            let (rows, cols) = (basis.u_perp[k].ncols(), basis.v[k].ncols());
            d.push(Matrix::from_column_slice(rows, cols, &coords[offset..offset + rows * cols]));
            offset += rows * cols;
        }
        Ok(TangentVector {
            b,
            d,
            basis: Arc::clone(basis),
        })
    }

    /// Stacked coordinates `(vec B, vec D_1, ..., vec D_d)`, column-major.
    pub fn coords(&self) -> Vec<f64> {
        let mut out = self.b.data().to_vec();
        for dk in &self.d {
            out.extend_from_slice(dk.as_slice());
        }
        out
    }

    pub fn b(&self) -> &DenseTensor {
        &self.b
    }

    pub fn d(&self) -> &[Matrix] {
        &self.d
    }

    pub fn basis(&self) -> &Arc<TangentBasis> {
        &self.basis
    }

    fn check_basis(&self, other: &TangentVector) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// Coordinate inner product; equals the ambient inner product of the
    /// extended tensors.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        self.check_basis(other)?;
        let mut acc = self.b.inner(&other.b)?;
        for (a, b) in self.d.iter().zip(&other.d) {
            acc += a.dot(b);
        }
        Ok(acc)
    }

    pub fn norm(&self) -> f64 {
        let mut acc = self.b.hs_norm().powi(2);
        for dk in &self.d {
            acc += dk.norm_squared();
        }
        acc.sqrt()
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &TangentVector) -> Result<TangentVector> {
        self.check_basis(other)?;
        let mut b = self.b.clone();
        b.axpy(alpha, &other.b)?;
        let d = self.d.iter().zip(&other.d).map(|(x, y)| x + y * alpha).collect();
        Ok(TangentVector {
            b,
            d,
            basis: Arc::clone(&self.basis),
        })
    }

    pub fn scaled(&self, alpha: f64) -> TangentVector {
        TangentVector {
            b: self.b.scaled(alpha),
            d: self.d.iter().map(|x| x * alpha).collect(),
            basis: Arc::clone(&self.basis),
        }
    }
}

/// Products `t x_{j != k} mats[j]` for every `k < mats.len()`, sharing
/// intermediate results by splitting the mode range in halves. Modes of `t`
/// beyond `mats.len()` are left untouched.
pub(crate) fn all_but_one(t: &DenseTensor, mats: &[Matrix]) -> Result<Vec<DenseTensor>> {
    fn rec(
        t: DenseTensor,
        mats: &[Matrix],
        lo: usize,
        hi: usize,
        out: &mut Vec<DenseTensor>,
    ) -> Result<()> {
        if hi - lo == 1 {
            out.push(t);
            return Ok(());
        }
        let mid = (lo + hi) / 2;
        let mut left = t.clone();
        for j in mid..hi {
            left = left.mode_product(j, &mats[j])?;
        }
        rec(left, mats, lo, mid, out)?;
        let mut right = t;
        for j in lo..mid {
            right = right.mode_product(j, &mats[j])?;
        }
        rec(right, mats, mid, hi, out)
    }
    let mut out = Vec::with_capacity(mats.len());
    rec(t.clone(), mats, 0, mats.len(), &mut out)?;
    Ok(out)
}

/// The extension map `L`: coordinates to the ambient tensor.
pub fn extend(v: &TangentVector) -> DenseTensor {
    let basis = &v.basis;
    let factors = basis.factors();
    let mut out = v.b.expand_by(factors, None).expect("B conforms to the basis");
    for k in 0..basis.order() {
        // T_k(U_perp D_k W_k^T) = T_k(U_perp D_k V_k^T) x_{j != k} U_j
        let mk = &basis.u_perp[k] * (&v.d[k] * basis.v[k].transpose());
        let shape = basis.core_shape().with_dim(k, mk.nrows());
        let term = DenseTensor::tensorize(&mk, k, &shape)
            .and_then(|t| t.expand_by(factors, Some(k)))
            .expect("D blocks conform to the basis");
        out.axpy(1.0, &term).expect("same shape");
    }
    out
}

/// The contraction map `L*`: `B = z x_k U_k^T`, `D_k = U_k_perp^T M_k(z) W_k`.
pub fn contract(basis: &Arc<TangentBasis>, z: &DenseTensor) -> Result<TangentVector> {
    if *z.shape() != basis.shape() {
        return Err(Error::DimensionMismatch(format!(
            "tensor has shape {}, tangent space is at shape {}",
            z.shape(),
            basis.shape()
        )));
    }
    let uts: Vec<Matrix> = basis.factors().iter().map(|u| u.transpose()).collect();
    let partial = all_but_one(z, &uts)?;
    let b = partial[0].mode_product(0, &uts[0])?;
    let d = partial
        .iter()
        .enumerate()
        .map(|(k, t)| Ok(basis.u_perp[k].transpose() * (t.matricize(k)? * &basis.v[k])))
        .collect::<Result<Vec<_>>>()?;
    TangentVector::new(basis, b, d)
}

/// Orthogonal projection onto the tangent space, `L L*`.
pub fn project_tangent(basis: &Arc<TangentBasis>, z: &DenseTensor) -> Result<DenseTensor> {
    Ok(extend(&contract(basis, z)?))
}

/// Riemannian gradient of `f(X) = ||A(X) - y||^2 / 2` at `x`, in tangent
/// coordinates.
pub fn riemannian_gradient(
    basis: &Arc<TangentBasis>,
    ensemble: &MeasurementEnsemble,
    y: &DVector<f64>,
    x: &DenseTensor,
) -> Result<TangentVector> {
    let resid = ensemble.apply(x)? - y;
    contract(basis, &ensemble.adjoint(&resid)?)
}

/// `||P_T A*(A(x_half) - y)||`, which vanishes when `x_half` solves the
/// Gauss-Newton equation on the tangent space.
pub fn gauss_newton_residual_check(
    basis: &Arc<TangentBasis>,
    ensemble: &MeasurementEnsemble,
    y: &DVector<f64>,
    x_half: &DenseTensor,
) -> Result<f64> {
    Ok(riemannian_gradient(basis, ensemble, y, x_half)?.norm())
}

/// Rank-r truncation of the tangent-space point `extend(v)`.
///
/// The candidate has multilinear rank at most `2r` with mode-k column space
/// inside `[U_k, U_k_perp Q_k]` where `D_k = Q_k R_k`, so the truncation runs
/// on a core of side at most `2 r_k` and never forms the dense candidate.
pub fn retract(
    v: &TangentVector,
    r: &TuckerRank,
    method: Truncation,
) -> Result<TuckerTensor> {
    let basis = &v.basis;
    let d = basis.order();
    r.check(&basis.shape())?;
    let mut frames = Vec::with_capacity(d);
    let mut blocks = Vec::with_capacity(d);
    for k in 0..d {
        let (q, rr) = thin_qr(&v.d[k]);
        let u = &basis.factors()[k];
        let extra = &basis.u_perp[k] * &q;
        let mut f = Matrix::zeros(u.nrows(), u.ncols() + extra.ncols());
        f.columns_mut(0, u.ncols()).copy_from(u);
        f.columns_mut(u.ncols(), extra.ncols()).copy_from(&extra);
        frames.push(f);
        blocks.push(rr * basis.v[k].transpose());
    }
    let small_dims: Vec<usize> = frames.iter().map(|f| f.ncols()).collect();
    let small = Shape::new(small_dims)?;
    let rank = basis.rank();
    let mut core = DenseTensor::zeros(small.clone());
    let place = |core: &mut DenseTensor, block: &DenseTensor, offset_mode: Option<usize>| {
        let bs = block.shape();
        let mut idx = vec![0usize; d];
        for lin in 0..bs.size() {
            let mut rem = lin;
            for j in 0..d {
                idx[j] = rem % bs.dim(j);
                rem /= bs.dim(j);
            }
            if let Some(k) = offset_mode {
                idx[k] += rank.get(k);
            }
            core.set(&idx, block.data()[lin]);
        }
    };
    place(&mut core, &v.b, None);
    for (k, block) in blocks.iter().enumerate() {
        let shape = basis.core_shape().with_dim(k, block.nrows());
        if block.nrows() > 0 {
            let t = DenseTensor::tensorize(block, k, &shape)?;
            place(&mut core, &t, Some(k));
        }
    }
    for k in 0..d {
        let sv = singular_values(&core.matricize(k)?)?;
        let top = sv.first().copied().unwrap_or(0.0);
        let rk = r.get(k);
        if rk > sv.len() || !(top > 0.0 && sv[rk - 1] > TRUNCATION_RANK_TOL * top) {
            return Err(Error::DegenerateTruncation { mode: k });
        }
    }
    let (small_core, small_factors) = truncate(&core, r, method)?.into_parts();
    let factors = frames.iter().zip(&small_factors).map(|(f, g)| f * g).collect();
    let mut out = TuckerTensor::from_parts(small_core, factors);
    out.normalize_signs();
    Ok(out)
}

/// Reference retraction: truncates the dense candidate directly.
pub fn retract_dense(
    v: &TangentVector,
    r: &TuckerRank,
    method: Truncation,
) -> Result<TuckerTensor> {
    let mut out = truncate(&extend(v), r, method)?;
    out.normalize_signs();
    Ok(out)
}
