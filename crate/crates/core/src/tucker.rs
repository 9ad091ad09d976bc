//! Tucker-format tensors and the higher-order SVD truncations.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{
    normalize_column_signs, orthonormality_defect, singular_values, svd_leading, Matrix,
};
use crate::tensor::{write_scalars, DenseTensor, Shape};

/// Default relative threshold used by [`tucker_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const ORTHONORMAL_TOL: f64 = 1e-10;

/// Multilinear rank `(r_1, ..., r_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TuckerRank(Vec<usize>);

impl TuckerRank {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() || ranks.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "Tucker ranks must be positive, got {ranks:?}"
            )));
        }
        Ok(TuckerRank(ranks))
    }

    pub fn uniform(r: usize, order: usize) -> Result<Self> {
        TuckerRank::new(vec![r; order])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, mode: usize) -> usize {
        self.0[mode]
    }

    /// Element-wise multiple, e.g. `2r`.
    pub fn times(&self, factor: usize) -> TuckerRank {
        TuckerRank(self.0.iter().map(|r| r * factor).collect())
    }

    pub fn product(&self) -> usize {
        self.0.iter().product()
    }

    /// Fails unless `r_k <= p_k` in every mode of `shape`.
    pub fn check(&self, shape: &Shape) -> Result<()> {
        if self.order() != shape.order() {
            return Err(Error::DimensionMismatch(format!(
                "rank {self} has order {}, shape {shape} has order {}",
                self.order(),
                shape.order()
            )));
        }
        for (mode, (&rank, &limit)) in self.0.iter().zip(shape.dims()).enumerate() {
            if rank > limit {
                return Err(Error::RankOutOfRange { mode, rank, limit });
            }
        }
        Ok(())
    }

    /// Dimension of the manifold of tensors of this rank in `shape`:
    /// `prod r_k + sum r_k (p_k - r_k)`.
    pub fn manifold_dim(&self, shape: &Shape) -> usize {
        self.product()
            + self
                .0
                .iter()
                .zip(shape.dims())
                .map(|(r, p)| r * (p - r))
                .sum::<usize>()
    }
}

impl fmt::Display for TuckerRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `core x_1 U_1 ... x_d U_d` with orthonormal factors `U_k` (`p_k x r_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerTensor {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerTensor {
    /// Validates conformity and factor orthonormality.
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for an order-{} core",
                factors.len(),
                core.order()
            )));
        }
        for (k, u) in factors.iter().enumerate() {
            if u.ncols() != core.shape().dim(k) || u.nrows() < u.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "factor {k} is {}x{} but the core has {} columns in that mode",
                    u.nrows(),
                    u.ncols(),
                    core.shape().dim(k)
                )));
            }
            let defect = orthonormality_defect(u);
            if !(defect <= ORTHONORMAL_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "factor {k} is not orthonormal (defect {defect:e})"
                )));
            }
        }
        Ok(TuckerTensor { core, factors })
    }

    pub(crate) fn from_parts(core: DenseTensor, factors: Vec<Matrix>) -> Self {
        debug_assert_eq!(core.order(), factors.len());
        TuckerTensor { core, factors }
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode]
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> TuckerRank {
        TuckerRank(self.factors.iter().map(|u| u.ncols()).collect())
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|u| u.nrows()).collect())
            .expect("factor row counts are positive")
    }

    pub fn into_parts(self) -> (DenseTensor, Vec<Matrix>) {
        (self.core, self.factors)
    }

    /// Full tensor `core x_1 U_1 ... x_d U_d`.
    pub fn dense(&self) -> DenseTensor {
        self.core
            .expand_by(&self.factors, None)
            .expect("factors conform to the core")
    }

    pub fn scaled(&self, alpha: f64) -> TuckerTensor {
        TuckerTensor {
            core: self.core.scaled(alpha),
            factors: self.factors.clone(),
        }
    }

    /// Applies the global sign convention to every factor column and flips
    /// the matching core slices, leaving the represented tensor unchanged.
    pub fn normalize_signs(&mut self) {
        for k in 0..self.order() {
            let signs = normalize_column_signs(&mut self.factors[k]);
            if signs.iter().any(|&s| s < 0.0) {
                let flip = Matrix::from_diagonal(&DVector::from_vec(signs));
                self.core = self.core.mode_product(k, &flip).expect("square sign matrix");
            }
        }
    }

    /// Text format: a `core:` section holding the core tensor, then one
    /// `factor k:` section per mode holding the factor as a `p_k x r_k`
    /// tensor, all in the tensor text format.
    pub fn to_text(&self) -> String {
        let mut s = String::from("core:\n");
        s.push_str(&self.core.to_text());
        for (k, u) in self.factors.iter().enumerate() {
            s.push_str(&format!("factor {k}:\ndims: {} {}\n", u.nrows(), u.ncols()));
            write_scalars(&mut s, u.as_slice());
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed == "core:" || (trimmed.starts_with("factor ") && trimmed.ends_with(':')) {
                sections.push((trimmed.to_string(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !trimmed.is_empty() {
                return Err(Error::Parse(format!("text before the `core:` section: {line:?}")));
            }
        }
        let mut iter = sections.into_iter();
        let core = match iter.next() {
            Some((h, body)) if h == "core:" => DenseTensor::parse_text(&body)?,
            _ => return Err(Error::Parse("missing `core:` section".into())),
        };
        let mut factors = Vec::new();
        for (k, (header, body)) in iter.enumerate() {
            if header != format!("factor {k}:") {
                return Err(Error::Parse(format!("expected `factor {k}:`, found {header:?}")));
            }
            let t = DenseTensor::parse_text(&body)?;
            if t.order() != 2 {
                return Err(Error::Parse(format!("factor {k} is not a matrix")));
            }
            let (p, r) = (t.shape().dim(0), t.shape().dim(1));
            factors.push(Matrix::from_vec(p, r, t.into_data()));
        }
        TuckerTensor::new(core, factors)
    }
}

/// Which higher-order SVD to use as the rank-r truncation `H_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Independent per-mode truncation.
    THosvd,
    /// Sequential truncation in mode order.
    #[default]
    StHosvd,
}

impl FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "t-hosvd" | "thosvd" => Ok(Truncation::THosvd),
            "st-hosvd" | "sthosvd" => Ok(Truncation::StHosvd),
            other => Err(Error::InvalidArgument(format!("unknown truncation {other:?}"))),
        }
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truncation::THosvd => "t-hosvd",
            Truncation::StHosvd => "st-hosvd",
        })
    }
}

pub fn truncate(t: &DenseTensor, r: &TuckerRank, method: Truncation) -> Result<TuckerTensor> {
    match method {
        Truncation::THosvd => t_hosvd(t, r),
        Truncation::StHosvd => st_hosvd(t, r),
    }
}

fn leading_factor(t: &DenseTensor, mode: usize, rank: usize) -> Result<Matrix> {
    svd_leading(&t.matricize(mode)?, rank).map_err(|e| match e {
        Error::RankOutOfRange { rank, limit, .. } => Error::RankOutOfRange { mode, rank, limit },
        e => e,
    })
}

/// Truncated HOSVD: each `U_k` is the leading subspace of `M_k(t)`.
pub fn t_hosvd(t: &DenseTensor, r: &TuckerRank) -> Result<TuckerTensor> {
    r.check(t.shape())?;
    let factors = (0..t.order())
        .map(|k| leading_factor(t, k, r.get(k)))
        .collect::<Result<Vec<_>>>()?;
    let core = t.project_onto(&factors, None)?;
    Ok(TuckerTensor::from_parts(core, factors))
}

/// Sequentially truncated HOSVD in mode order `0, 1, ..., d-1`.
///
/// Projecting the already-truncated modes onto their orthonormal factors
/// does not change the left singular vectors of later unfoldings, so each
/// step works on the compressed tensor.
pub fn st_hosvd(t: &DenseTensor, r: &TuckerRank) -> Result<TuckerTensor> {
    r.check(t.shape())?;
    let mut core = t.clone();
    let mut factors = Vec::with_capacity(t.order());
    for k in 0..t.order() {
        let u = leading_factor(&core, k, r.get(k))?;
        core = core.mode_product(k, &u.transpose())?;
        factors.push(u);
    }
    Ok(TuckerTensor::from_parts(core, factors))
}

/// Higher-order orthogonal iteration started from [`st_hosvd`]. Used as a
/// near-optimal rank-r witness in tests, not as a solver.
///
/// Runs at most `sweeps` (capped at 50) sweeps and stops once the residual
/// improves by less than `1e-13` relative. Returns the final point and the
/// residual `||t - X||` after initialization and after every sweep.
pub fn hooi(t: &DenseTensor, r: &TuckerRank, sweeps: usize) -> Result<(TuckerTensor, Vec<f64>)> {
    let mut x = st_hosvd(t, r)?;
    let residual = |x: &TuckerTensor| x.dense().sub(t).map(|d| d.hs_norm());
    let mut history = vec![residual(&x)?];
    for _ in 0..sweeps.clamp(1, 50) {
        let mut factors = x.factors.clone();
        for k in 0..t.order() {
            let partial = t.project_onto(&factors, Some(k))?;
            factors[k] = leading_factor(&partial, k, r.get(k))?;
        }
        let core = t.project_onto(&factors, None)?;
        x = TuckerTensor::from_parts(core, factors);
        let res = residual(&x)?;
        let prev = *history.last().expect("non-empty");
        history.push(res);
        if prev - res <= 1e-13 * prev {
            break;
        }
    }
    Ok((x, history))
}

/// Number of singular values of each unfolding above `tol * sigma_1`
/// (zero in every mode for the zero tensor).
pub fn tucker_rank(t: &DenseTensor, tol: f64) -> Result<TuckerRank> {
    let ranks = (0..t.order())
        .map(|k| {
            let sv = singular_values(&t.matricize(k)?)?;
            let top = sv.first().copied().unwrap_or(0.0);
            Ok(sv.iter().filter(|&&s| top > 0.0 && s > tol * top).count())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TuckerRank(ranks))
}
