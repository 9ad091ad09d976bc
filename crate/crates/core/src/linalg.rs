//! Dense matrix kernels: leading singular subspaces, QR with a fixed sign
//! convention, orthonormal complements and least-squares solvers.
//!
//! Matrices are `nalgebra` column-major `DMatrix<f64>`. SVDs, symmetric
//! eigendecompositions and the tall least-squares QR go through `faer`.

use faer::linalg::solvers::SolveLstsq;
use faer::{MatRef, Side};
use nalgebra::DVector;

use crate::error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;

/// Relative threshold on `|R_ii|` below which [`qr_q`] reports rank loss.
pub const QR_RANK_TOL: f64 = 1e-12;

fn as_faer(m: &Matrix) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn from_faer(m: MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `(U, sigma)` with singular values in nonincreasing order.
fn thin_svd_left(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok((Matrix::zeros(m.nrows(), 0), Vec::new()));
    }
    if m.ncols() > 2 * m.nrows() {
        // Wide unfolding: factor m^T = Q R, then m = R^T Q^T shares its left
        // singular pairs with the small square R^T.
        let qr = as_faer(&m.transpose()).qr();
        let r = from_faer(qr.thin_R());
        return thin_svd_left(&r.transpose());
    }
    let svd = as_faer(m)
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let sigma = (0..s.nrows()).map(|i| s[i]).collect();
    Ok((from_faer(svd.U()), sigma))
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let small = if m.ncols() > 2 * m.nrows() {
        from_faer(as_faer(&m.transpose()).qr().thin_R())
    } else if m.nrows() > 2 * m.ncols() {
        from_faer(as_faer(m).qr().thin_R())
    } else {
        m.clone()
    };
    let sv = as_faer(&small)
        .singular_values()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
    Ok(sv)
}

/// Flips column signs so the entry of largest magnitude in each column is
/// positive (ties go to the lowest row index). Returns the applied signs.
pub fn normalize_column_signs(m: &mut Matrix) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| {
            let mut best = 0;
            let mut best_abs = -1.0;
            for (i, x) in m.column(j).iter().enumerate() {
                if x.abs() > best_abs {
                    best_abs = x.abs();
                    best = i;
                }
            }
            if m[(best, j)] < 0.0 {
                m.column_mut(j).neg_mut();
                -1.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Leading `r` left singular vectors of `m`, sign-normalized.
pub fn svd_leading(m: &Matrix, r: usize) -> Result<Matrix> {
    let limit = m.nrows().min(m.ncols());
    if r > limit {
        return Err(Error::RankOutOfRange {
            mode: 0,
            rank: r,
            limit,
        });
    }
    let (u, _) = thin_svd_left(m)?;
    let mut lead = u.columns(0, r).into_owned();
    normalize_column_signs(&mut lead);
    Ok(lead)
}

/// Leading `r` left singular vectors together with all singular values.
pub fn svd_leading_with_values(m: &Matrix, r: usize) -> Result<(Matrix, Vec<f64>)> {
    let limit = m.nrows().min(m.ncols());
    if r > limit {
        return Err(Error::RankOutOfRange {
            mode: 0,
            rank: r,
            limit,
        });
    }
    let (u, sigma) = thin_svd_left(m)?;
    let mut lead = u.columns(0, r).into_owned();
    normalize_column_signs(&mut lead);
    Ok((lead, sigma))
}

/// Householder QR returning `(Q, R)` with `R` having a nonnegative diagonal.
fn householder_qr(m: &Matrix) -> (Matrix, Matrix) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
            r.row_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Orthonormal basis for the column span of a full-column-rank `m`, with
/// `R` normalized to a positive diagonal.
pub fn qr_q(m: &Matrix) -> Result<Matrix> {
    if m.nrows() < m.ncols() {
        return Err(Error::RankDeficient(format!(
            "{}x{} matrix has more columns than rows",
            m.nrows(),
            m.ncols()
        )));
    }
    let (q, r) = householder_qr(m);
    let scale = m.norm();
    for i in 0..m.ncols() {
        if !(r[(i, i)].abs() >= QR_RANK_TOL * scale) || scale == 0.0 {
            return Err(Error::RankDeficient(format!(
                "|R[{i},{i}]| = {:e} against |m|_F = {scale:e}",
                r[(i, i)].abs()
            )));
        }
    }
    Ok(q)
}

/// Householder `(Q, R)` of any matrix with at least as many rows as columns.
/// `Q` is orthonormal even when `m` is rank deficient.
pub fn thin_qr(m: &Matrix) -> (Matrix, Matrix) {
    householder_qr(m)
}

/// Orthonormal basis of the complement of span(u) for `u` with orthonormal
/// columns. Deterministic: the QR of `[u | I]` with a positive `R` diagonal.
pub fn orthonormal_complement(u: &Matrix) -> Matrix {
    let (p, r) = (u.nrows(), u.ncols());
    let mut stacked = Matrix::zeros(p, r + p);
    stacked.columns_mut(0, r).copy_from(u);
    stacked.columns_mut(r, p).fill_with_identity();
    let (q, _) = householder_qr(&stacked);
    q.columns(r, p - r).into_owned()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Largest deviation of `m^T m` from the identity.
pub fn orthonormality_defect(m: &Matrix) -> f64 {
    let g = m.transpose() * m;
    (g - Matrix::identity(m.ncols(), m.ncols())).amax()
}

/// Spectral-norm distance between the orthogonal projectors onto span(a)
/// and span(b), both with orthonormal columns.
pub fn projector_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    let d = a * a.transpose() - b * b.transpose();
    Ok(singular_values(&d)?.first().copied().unwrap_or(0.0))
}

/// Eigenvectors of a symmetric matrix for its `r` largest eigenvalues,
/// sign-normalized.
pub fn symmetric_leading_eigvecs(g: &Matrix, r: usize) -> Result<Matrix> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            g.ncols()
        )));
    }
    if r > n {
        return Err(Error::RankOutOfRange {
            mode: 0,
            rank: r,
            limit: n,
        });
    }
    let evd = as_faer(g)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the deterministic order on ties
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut out = Matrix::zeros(n, r);
    for (c, &j) in order.iter().take(r).enumerate() {
        for i in 0..n {
            out[(i, c)] = vecs[(i, j)];
        }
    }
    normalize_column_signs(&mut out);
    Ok(out)
}

/// Outcome of a linear least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    /// Set when the design was numerically rank deficient and the
    /// minimum-norm solution was returned instead.
    pub rank_deficient: bool,
    /// Cheap conditioning estimate: `max |R_ii| / min |R_ii|` for QR, the
    /// singular value ratio for the minimum-norm fallback.
    pub condition: f64,
    /// CG iterations, zero for direct solves.
    pub iterations: usize,
}

/// Relative threshold below which a least-squares design counts as rank
/// deficient.
pub const LSTSQ_RANK_TOL: f64 = 1e-12;

/// `argmin ||y - A x||` by Householder QR, falling back to the SVD
/// minimum-norm solution when `A` is numerically rank deficient or
/// underdetermined.
pub fn lstsq_qr(a: &Matrix, y: &DVector<f64>) -> Result<LstsqSolution> {
    check_lstsq(a, y)?;
    let (n, m) = (a.nrows(), a.ncols());
    if m == 0 {
        return Ok(LstsqSolution {
            x: DVector::zeros(0),
            rank_deficient: false,
            condition: 1.0,
            iterations: 0,
        });
    }
    if n >= m {
        let qr = as_faer(a).qr();
        let r = qr.thin_R();
        let diag: Vec<f64> = (0..m).map(|i| r[(i, i)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if max > 0.0 && min > LSTSQ_RANK_TOL * max {
            let rhs = MatRef::from_column_major_slice(y.as_slice(), n, 1);
            let x = qr.solve_lstsq(rhs);
            return Ok(LstsqSolution {
                x: DVector::from_fn(m, |i, _| x[(i, 0)]),
                rank_deficient: false,
                condition: max / min,
                iterations: 0,
            });
        }
    }
    lstsq_min_norm(a, y)
}

/// Minimum-norm least-squares solution through the thin SVD.
pub fn lstsq_min_norm(a: &Matrix, y: &DVector<f64>) -> Result<LstsqSolution> {
    check_lstsq(a, y)?;
    let svd = as_faer(a)
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
    let (u, v) = (from_faer(svd.U()), from_faer(svd.V()));
    let s = svd.S().column_vector();
    let k = s.nrows();
    let smax = if k > 0 { s[0] } else { 0.0 };
    let uty = u.transpose() * y;
    let mut coef = DVector::zeros(k);
    let mut smin_kept = smax;
    let mut dropped = a.ncols() > k;
    for i in 0..k {
        if smax > 0.0 && s[i] > LSTSQ_RANK_TOL * smax {
            coef[i] = uty[i] / s[i];
            smin_kept = s[i];
        } else {
            dropped = true;
        }
    }
    Ok(LstsqSolution {
        x: v * coef,
        rank_deficient: dropped,
        condition: if smin_kept > 0.0 { smax / smin_kept } else { f64::INFINITY },
        iterations: 0,
    })
}

/// Conjugate gradients on the normal equations (CGLS). Never forms `A^T A`.
pub fn lstsq_cgls(
    a: &Matrix,
    y: &DVector<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<LstsqSolution> {
    check_lstsq(a, y)?;
    let m = a.ncols();
    let mut x = DVector::zeros(m);
    let mut r = y.clone();
    let mut s = a.tr_mul(&r);
    let mut p = s.clone();
    let s0 = s.norm();
    let mut gamma = s.norm_squared();
    let mut it = 0;
    while it < max_iter && gamma.sqrt() > rel_tol * s0 && s0 > 0.0 {
        let q = a * &p;
        let qq = q.norm_squared();
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &q, 1.0);
        s = a.tr_mul(&r);
        let gamma_next = s.norm_squared();
        p = &s + (gamma_next / gamma) * &p;
        gamma = gamma_next;
        it += 1;
    }
    Ok(LstsqSolution {
        x,
        rank_deficient: false,
        condition: f64::NAN,
        iterations: it,
    })
}

fn check_lstsq(a: &Matrix, y: &DVector<f64>) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but the response has length {}",
            a.nrows(),
            y.len()
        )));
    }
    Ok(())
}
