//! Linear measurement maps `A: R^{p_1 x ... x p_d} -> R^n` with
//! `A(X)_i = <A_i, X>`, their adjoints, and the per-iteration covariate
//! sketches that turn the tangent-space least-squares problem into an
//! ordinary `n x dim` regression.

use std::sync::Arc;

use nalgebra::{DMatrixView, DVector};
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{all_but_one, TangentBasis};
use crate::random::{gaussian_matrix, gaussian_tensor, orthonormal_frame, seeded, standard_normal};
use crate::tensor::{dot, parse_dims, write_scalars, DenseTensor, Shape};
use crate::tucker::{TuckerRank, TuckerTensor};

/// Default bound on the number of scalars a dense design or a sketch may
/// hold (2^27 doubles, 1 GiB).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 27;

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    /// Arbitrary measurement tensors, stored as one order-(d+1) tensor whose
    /// last mode indexes the measurement.
    GeneralDense { tensors: DenseTensor },
    /// `A_i = a_1^(i) ∘ ... ∘ a_d^(i)`; `vectors[k]` is `p_k x n` with column
    /// `i` holding `a_k^(i)`.
    RankOne { vectors: Vec<Matrix> },
    /// Observed entries, as sorted distinct linear indices.
    Completion { indices: Vec<usize> },
    /// Every entry observed in storage order (`n = prod p_k`).
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    shape: Shape,
    n: usize,
    kind: EnsembleKind,
}

fn check_cap(requested: usize, cap: usize) -> Result<()> {
    if requested > cap {
        Err(Error::MemoryCap { requested, cap })
    } else {
        Ok(())
    }
}

impl MeasurementEnsemble {
    pub fn general_dense(shape: &Shape, tensors: &[DenseTensor], cap: usize) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::InvalidArgument("no measurement tensors".into()));
        }
        check_cap(tensors.len().saturating_mul(shape.size()), cap)?;
        let mut data = Vec::with_capacity(tensors.len() * shape.size());
        for (i, a) in tensors.iter().enumerate() {
            if a.shape() != shape {
                return Err(Error::DimensionMismatch(format!(
                    "measurement {i} has shape {}, expected {shape}",
                    a.shape()
                )));
            }
            data.extend_from_slice(a.data());
        }
        MeasurementEnsemble::general_dense_stacked(shape, tensors.len(), data)
    }

    /// General ensemble from the concatenated entries of `A_1, ..., A_n`.
    pub fn general_dense_stacked(shape: &Shape, n: usize, data: Vec<f64>) -> Result<Self> {
        let mut dims = shape.dims().to_vec();
        dims.push(n);
        let tensors = DenseTensor::new(Shape::new(dims)?, data)?;
        Ok(MeasurementEnsemble {
            shape: shape.clone(),
            n,
            kind: EnsembleKind::GeneralDense { tensors },
        })
    }

    pub fn rank_one(shape: &Shape, vectors: Vec<Matrix>) -> Result<Self> {
        if vectors.len() != shape.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} vector blocks for an order-{} shape",
                vectors.len(),
                shape.order()
            )));
        }
        let n = vectors[0].ncols();
        if n == 0 {
            return Err(Error::InvalidArgument("no measurements".into()));
        }
        for (k, a) in vectors.iter().enumerate() {
            if a.nrows() != shape.dim(k) || a.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "mode-{k} vectors are {}x{}, expected {}x{n}",
                    a.nrows(),
                    a.ncols(),
                    shape.dim(k)
                )));
            }
        }
        Ok(MeasurementEnsemble {
            shape: shape.clone(),
            n,
            kind: EnsembleKind::RankOne { vectors },
        })
    }

    /// Completion ensemble from zero-based multi-indices. Indices are sorted;
    /// duplicates and out-of-range entries are rejected.
    pub fn completion(shape: &Shape, omega: &[Vec<usize>]) -> Result<Self> {
        let mut lin = Vec::with_capacity(omega.len());
        for idx in omega {
            if idx.len() != shape.order() || idx.iter().zip(shape.dims()).any(|(i, p)| i >= p) {
                return Err(Error::InvalidSample(format!("index {idx:?} outside {shape}")));
            }
            lin.push(shape.linear_index(idx));
        }
        MeasurementEnsemble::completion_linear(shape, lin)
    }

    pub fn completion_linear(shape: &Shape, mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSample("empty observation set".into()));
        }
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSample(format!(
                "entry {:?} observed twice",
                shape.multi_index(w[0])
            )));
        }
        if *indices.last().expect("non-empty") >= shape.size() {
            return Err(Error::InvalidSample("linear index out of range".into()));
        }
        Ok(MeasurementEnsemble {
            shape: shape.clone(),
            n: indices.len(),
            kind: EnsembleKind::Completion { indices },
        })
    }

    pub fn identity(shape: &Shape) -> Self {
        MeasurementEnsemble {
            shape: shape.clone(),
            n: shape.size(),
            kind: EnsembleKind::Identity,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EnsembleKind::GeneralDense { .. } => "general-dense",
            EnsembleKind::RankOne { .. } => "rank-one",
            EnsembleKind::Completion { .. } => "completion",
            EnsembleKind::Identity => "identity",
        }
    }

    /// Observed linear indices of a completion ensemble.
    pub fn completion_indices(&self) -> Option<&[usize]> {
        match &self.kind {
            EnsembleKind::Completion { indices } => Some(indices),
            _ => None,
        }
    }

    /// The `i`-th measurement tensor `A_i`.
    pub fn measurement_tensor(&self, i: usize) -> DenseTensor {
        let size = self.shape.size();
        match &self.kind {
            EnsembleKind::GeneralDense { tensors } => {
                DenseTensor::new(self.shape.clone(), tensors.data()[i * size..(i + 1) * size].to_vec())
                    .expect("slab matches shape")
            }
            EnsembleKind::RankOne { vectors } => {
                let cols: Vec<Vec<f64>> =
                    vectors.iter().map(|a| a.column(i).iter().cloned().collect()).collect();
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                DenseTensor::outer(&refs).expect("non-empty")
            }
            EnsembleKind::Completion { indices } => one_hot(&self.shape, indices[i]),
            EnsembleKind::Identity => one_hot(&self.shape, i),
        }
    }

    /// Equivalent general ensemble holding every `A_i` densely.
    pub fn densify(&self, cap: usize) -> Result<MeasurementEnsemble> {
        check_cap(self.n.saturating_mul(self.shape.size()), cap)?;
        let mut data = Vec::with_capacity(self.n * self.shape.size());
        for i in 0..self.n {
            data.extend_from_slice(self.measurement_tensor(i).data());
        }
        MeasurementEnsemble::general_dense_stacked(&self.shape, self.n, data)
    }

    fn check_shape(&self, x: &DenseTensor) -> Result<()> {
        if *x.shape() != self.shape {
            return Err(Error::DimensionMismatch(format!(
                "tensor has shape {}, ensemble expects {}",
                x.shape(),
                self.shape
            )));
        }
        Ok(())
    }

    /// `y_i = <A_i, x>`.
    pub fn apply(&self, x: &DenseTensor) -> Result<DVector<f64>> {
        self.check_shape(x)?;
        let size = self.shape.size();
        Ok(match &self.kind {
            EnsembleKind::GeneralDense { tensors } => DVector::from_iterator(
                self.n,
                tensors.data().chunks_exact(size).map(|a| dot(a, x.data())),
            ),
            EnsembleKind::RankOne { vectors } => {
                // y_i = a_1^T M_1(x) (a_d ⊗ ... ⊗ a_2)
                let g = x.matricize(0)?.transpose() * &vectors[0];
                let mut kr = vec![0.0; self.shape.others(0)];
                DVector::from_fn(self.n, |i, _| {
                    khatri_rao_column(vectors, 0, i, &mut kr);
                    dot(g.column(i).as_slice(), &kr)
                })
            }
            EnsembleKind::Completion { indices } => {
                DVector::from_iterator(self.n, indices.iter().map(|&l| x.data()[l]))
            }
            EnsembleKind::Identity => DVector::from_column_slice(x.data()),
        })
    }

    /// `sum_i v_i A_i`.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<DenseTensor> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {}, ensemble has {} measurements",
                v.len(),
                self.n
            )));
        }
        let size = self.shape.size();
        Ok(match &self.kind {
            EnsembleKind::GeneralDense { tensors } => {
                let mut out = vec![0.0; size];
                for (a, &vi) in tensors.data().chunks_exact(size).zip(v.iter()) {
                    for (o, x) in out.iter_mut().zip(a) {
                        *o += vi * x;
                    }
                }
                DenseTensor::new(self.shape.clone(), out)?
            }
            EnsembleKind::RankOne { vectors } => {
                // M_1 = A_1 diag(v) KR^T, accumulated over column chunks
                let others = self.shape.others(0);
                let mut m1 = Matrix::zeros(self.shape.dim(0), others);
                let chunk = 512;
                let mut kr = vec![0.0; others];
                for start in (0..self.n).step_by(chunk) {
                    let len = chunk.min(self.n - start);
                    let mut krt = Matrix::zeros(len, others);
                    let mut scaled = vectors[0].columns(start, len).into_owned();
                    for c in 0..len {
                        khatri_rao_column(vectors, 0, start + c, &mut kr);
                        for (j, x) in kr.iter().enumerate() {
                            krt[(c, j)] = *x;
                        }
                        scaled.column_mut(c).scale_mut(v[start + c]);
                    }
                    m1.gemm(1.0, &scaled, &krt, 1.0);
                }
                DenseTensor::tensorize(&m1, 0, &self.shape)?
            }
            EnsembleKind::Completion { indices } => {
                let mut out = vec![0.0; size];
                for (&l, &vi) in indices.iter().zip(v.iter()) {
                    out[l] = vi;
                }
                DenseTensor::new(self.shape.clone(), out)?
            }
            EnsembleKind::Identity => DenseTensor::new(self.shape.clone(), v.as_slice().to_vec())?,
        })
    }

    /// Covariates of the tangent-space regression at `basis`, using the
    /// default memory cap.
    pub fn sketch_covariates(&self, basis: &Arc<TangentBasis>) -> Result<SketchedCovariates> {
        self.sketch_covariates_capped(basis, DEFAULT_MEMORY_CAP)
    }

    /// Row `i` of the sketch is the coordinate vector of `L*(A_i)`:
    /// `vec(A_i x_k U_k^T)` followed by `vec(U_k_perp^T M_k(A_i) W_k)` for
    /// every mode. Rank-one, completion and identity designs use closed
    /// forms that never build `A_i`.
    pub fn sketch_covariates_capped(
        &self,
        basis: &Arc<TangentBasis>,
        cap: usize,
    ) -> Result<SketchedCovariates> {
        if basis.shape() != self.shape {
            return Err(Error::DimensionMismatch(format!(
                "tangent space at shape {}, ensemble shape {}",
                basis.shape(),
                self.shape
            )));
        }
        check_cap(self.n.saturating_mul(basis.dim()), cap)?;
        match &self.kind {
            EnsembleKind::GeneralDense { tensors } => self.sketch_general(basis, tensors),
            EnsembleKind::RankOne { vectors } => {
                let u = basis.factors();
                let p: Vec<Matrix> = (0..u.len()).map(|k| u[k].transpose() * &vectors[k]).collect();
                let q: Vec<Matrix> = (0..u.len())
                    .map(|k| basis.u_perp()[k].transpose() * &vectors[k])
                    .collect();
                Ok(self.sketch_separable(basis, &p, &q))
            }
            EnsembleKind::Completion { indices } => Ok(self.sketch_entries(basis, indices)),
            EnsembleKind::Identity => {
                let all: Vec<usize> = (0..self.n).collect();
                Ok(self.sketch_entries(basis, &all))
            }
        }
    }

    fn sketch_general(
        &self,
        basis: &Arc<TangentBasis>,
        tensors: &DenseTensor,
    ) -> Result<SketchedCovariates> {
        let n = self.n;
        let uts: Vec<Matrix> = basis.factors().iter().map(|u| u.transpose()).collect();
        let partial = all_but_one(tensors, &uts)?;
        let nb = basis.core_shape().size();
        let b = partial[0].mode_product(0, &uts[0])?;
        let phi_b = Matrix::from_column_slice(nb, n, b.data()).transpose();
        let mut phi_d = Vec::with_capacity(basis.order());
        for (k, t) in partial.iter().enumerate() {
            let reduced = t.mode_product(k, &basis.u_perp()[k].transpose())?;
            let m = reduced.matricize(k)?;
            let vk = &basis.v()[k];
            let (rows, others) = (m.nrows(), vk.nrows());
            let mut out = Matrix::zeros(n, rows * vk.ncols());
            for i in 0..n {
                let block = m.columns(i * others, others) * vk;
                for (c, x) in block.iter().enumerate() {
                    out[(i, c)] = *x;
                }
            }
            phi_d.push(out);
        }
        Ok(SketchedCovariates {
            phi_b,
            phi_d,
            basis: Arc::clone(basis),
        })
    }

    fn sketch_entries(&self, basis: &Arc<TangentBasis>, indices: &[usize]) -> SketchedCovariates {
        let d = basis.order();
        let mut rows: Vec<Vec<usize>> = vec![Vec::with_capacity(indices.len()); d];
        for &l in indices {
            for (k, i) in self.shape.multi_index(l).into_iter().enumerate() {
                rows[k].push(i);
            }
        }
        let pick = |m: &Matrix, k: usize| {
            Matrix::from_fn(m.ncols(), indices.len(), |a, i| m[(rows[k][i], a)])
        };
        let p: Vec<Matrix> = (0..d).map(|k| pick(&basis.factors()[k], k)).collect();
        let q: Vec<Matrix> = (0..d).map(|k| pick(&basis.u_perp()[k], k)).collect();
        self.sketch_separable(basis, &p, &q)
    }

    /// Sketch for rank-one measurements given `p[k] = U_k^T A_k` and
    /// `q[k] = U_k_perp^T A_k` (columns indexed by measurement).
    fn sketch_separable(
        &self,
        basis: &Arc<TangentBasis>,
        p: &[Matrix],
        q: &[Matrix],
    ) -> SketchedCovariates {
        let n = p[0].ncols();
        let d = basis.order();
        let nb = basis.core_shape().size();
        let mut phi_b = Matrix::zeros(n, nb);
        let mut phi_d: Vec<Matrix> = (0..d)
            .map(|k| Matrix::zeros(n, q[k].nrows() * basis.v()[k].ncols()))
            .collect();
        let mut full = vec![0.0; nb];
        let mut kr = Vec::new();
        for i in 0..n {
            khatri_rao_column(p, usize::MAX, i, &mut full);
            for (c, x) in full.iter().enumerate() {
                phi_b[(i, c)] = *x;
            }
            for k in 0..d {
                kr.resize(basis.v()[k].nrows(), 0.0);
                khatri_rao_column(p, k, i, &mut kr);
                let w = basis.v()[k].tr_mul(&DMatrixView::from_slice(&kr, kr.len(), 1));
                let qk = q[k].column(i);
                let rows = qk.len();
                for (b, wb) in w.iter().enumerate() {
                    for (a, qa) in qk.iter().enumerate() {
                        phi_d[k][(i, a + rows * b)] = qa * wb;
                    }
                }
            }
        }
        SketchedCovariates {
            phi_b,
            phi_d,
            basis: Arc::clone(basis),
        }
    }

    /// Empirical range of `||A(Z)||^2` over `trials` random unit-norm
    /// tensors of Tucker rank `r`.
    pub fn trip_probe(&self, r: &TuckerRank, trials: usize, seed: u64) -> Result<(f64, f64)> {
        r.check(&self.shape)?;
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let mut rng = seeded(seed);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..trials {
            let z = random_unit_tucker(&self.shape, r, &mut rng).dense();
            let ratio = self.apply(&z)?.norm_squared();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        Ok((lo, hi))
    }

    /// Text serialization; see [`MeasurementEnsemble::parse_text`].
    pub fn to_text(&self) -> String {
        let mut s = format!("kind: {}\ndims:", self.kind_name());
        for p in self.shape.dims() {
            s.push_str(&format!(" {p}"));
        }
        s.push_str(&format!("\nn: {}\n", self.n));
        match &self.kind {
            EnsembleKind::GeneralDense { tensors } => {
                let size = self.shape.size();
                for (i, a) in tensors.data().chunks_exact(size).enumerate() {
                    s.push_str(&format!("measurement {i}:\n"));
                    write_scalars(&mut s, a);
                }
            }
            EnsembleKind::RankOne { vectors } => {
                for (k, a) in vectors.iter().enumerate() {
                    s.push_str(&format!("mode {k}:\n"));
                    write_scalars(&mut s, a.as_slice());
                }
            }
            EnsembleKind::Completion { indices } => {
                for &l in indices {
                    let idx: Vec<String> =
                        self.shape.multi_index(l).iter().map(|i| i.to_string()).collect();
                    s.push_str(&idx.join(" "));
                    s.push('\n');
                }
            }
            EnsembleKind::Identity => {}
        }
        s
    }

    /// Parses the text format: `kind:`, `dims:` and `n:` header lines, then
    /// one zero-based index tuple per line (completion), `mode k:` sections
    /// holding each `p_k x n` vector block column-major (rank-one), or
    /// `measurement i:` sections holding each tensor (general-dense).
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing `{key}` line")))?;
            line.trim()
                .strip_prefix(key)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected `{key}`, found {line:?}")))
        };
        let kind = header("kind:")?;
        let shape = parse_dims(&format!("dims: {}", header("dims:")?))?;
        let n: usize = header("n:")?
            .parse()
            .map_err(|e| Error::Parse(format!("bad measurement count: {e}")))?;
        let rest: Vec<&str> = lines.collect();
        let sections = |label: &str, count: usize| -> Result<Vec<Vec<f64>>> {
            let mut out: Vec<Vec<f64>> = Vec::new();
            for line in &rest {
                let t = line.trim();
                if t.starts_with(label) && t.ends_with(':') {
                    if t != format!("{label} {}:", out.len()) {
                        return Err(Error::Parse(format!("unexpected section header {t:?}")));
                    }
                    out.push(Vec::new());
                } else {
                    let cur = out
                        .last_mut()
                        .ok_or_else(|| Error::Parse(format!("data before the first `{label}`")))?;
                    for tok in t.split_whitespace() {
                        cur.push(tok.parse().map_err(|e| Error::Parse(format!("bad scalar {tok:?}: {e}")))?);
                    }
                }
            }
            if out.len() != count {
                return Err(Error::Parse(format!("expected {count} `{label}` sections, found {}", out.len())));
            }
            Ok(out)
        };
        let ensemble = match kind.as_str() {
            "identity" => MeasurementEnsemble::identity(&shape),
            "completion" => {
                let omega = rest
                    .iter()
                    .map(|l| {
                        l.split_whitespace()
                            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("bad index {t:?}: {e}"))))
                            .collect::<Result<Vec<usize>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                MeasurementEnsemble::completion(&shape, &omega)?
            }
            "rank-one" => {
                let blocks = sections("mode", shape.order())?;
                let vectors = blocks
                    .into_iter()
                    .enumerate()
                    .map(|(k, b)| {
                        if b.len() != shape.dim(k) * n {
                            return Err(Error::Parse(format!("mode {k} block has {} scalars", b.len())));
                        }
                        Ok(Matrix::from_vec(shape.dim(k), n, b))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MeasurementEnsemble::rank_one(&shape, vectors)?
            }
            "general-dense" => {
                let blocks = sections("measurement", n)?;
                let mut data = Vec::with_capacity(n * shape.size());
                for (i, b) in blocks.into_iter().enumerate() {
                    if b.len() != shape.size() {
                        return Err(Error::Parse(format!("measurement {i} has {} scalars", b.len())));
                    }
                    data.extend(b);
                }
                MeasurementEnsemble::general_dense_stacked(&shape, n, data)?
            }
            other => return Err(Error::Parse(format!("unknown ensemble kind {other:?}"))),
        };
        if ensemble.n != n {
            return Err(Error::Parse(format!("header says n = {n}, found {}", ensemble.n)));
        }
        Ok(ensemble)
    }
}

fn one_hot(shape: &Shape, lin: usize) -> DenseTensor {
    let mut t = DenseTensor::zeros(shape.clone());
    t.data_mut()[lin] = 1.0;
    t
}

/// Writes `cols[d-1][:, i] ⊗ ... ⊗ cols[0][:, i]` with mode `skip` left out,
/// i.e. the colexicographic vectorization of the outer product.
fn khatri_rao_column(cols: &[Matrix], skip: usize, i: usize, out: &mut [f64]) {
    let mut len = 1;
    out[0] = 1.0;
    for (k, m) in cols.iter().enumerate() {
        if k == skip {
            continue;
        }
        let rows = m.nrows();
        // the new mode varies slowest: block a holds x_a times the old vector
        for a in (0..rows).rev() {
            let x = m[(a, i)];
            for j in 0..len {
                out[a * len + j] = x * out[j];
            }
        }
        len *= rows;
    }
    debug_assert_eq!(len, out.len());
}

/// Per-measurement tangent coordinates of `A_i`.
#[derive(Debug, Clone)]
pub struct SketchedCovariates {
    /// `n x prod r_k`.
    pub phi_b: Matrix,
    /// Per mode, `n x (p_k - r_k) r_k`.
    pub phi_d: Vec<Matrix>,
    pub basis: Arc<TangentBasis>,
}

impl SketchedCovariates {
    pub fn n(&self) -> usize {
        self.phi_b.nrows()
    }

    /// The stacked design `[phi_b | phi_d[0] | ... | phi_d[d-1]]`.
    pub fn design(&self) -> Matrix {
        let n = self.n();
        let cols = self.phi_b.ncols() + self.phi_d.iter().map(|m| m.ncols()).sum::<usize>();
        let mut out = Matrix::zeros(n, cols);
        out.columns_mut(0, self.phi_b.ncols()).copy_from(&self.phi_b);
        let mut offset = self.phi_b.ncols();
        for m in &self.phi_d {
            out.columns_mut(offset, m.ncols()).copy_from(m);
            offset += m.ncols();
        }
        out
    }
}

/// Random unit-norm tensor of Tucker rank `r`: uniform orthonormal factors
/// and a Gaussian core.
pub fn random_unit_tucker(shape: &Shape, r: &TuckerRank, rng: &mut crate::random::Rng) -> TuckerTensor {
    let core = gaussian_tensor(&Shape::new(r.ranks().to_vec()).expect("positive ranks"), 1.0, rng);
    let core = core.scaled(1.0 / core.hs_norm());
    let factors = shape
        .dims()
        .iter()
        .zip(r.ranks())
        .map(|(&p, &rk)| orthonormal_frame(p, rk, rng))
        .collect();
    TuckerTensor::from_parts(core, factors)
}

/// `n` measurement tensors with i.i.d. N(0, variance) entries.
pub fn gaussian_ensemble(n: usize, shape: &Shape, variance: f64, seed: u64) -> Result<MeasurementEnsemble> {
    gaussian_ensemble_capped(n, shape, variance, seed, DEFAULT_MEMORY_CAP)
}

pub fn gaussian_ensemble_capped(
    n: usize,
    shape: &Shape,
    variance: f64,
    seed: u64,
    cap: usize,
) -> Result<MeasurementEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument("no measurements".into()));
    }
    check_cap(n.saturating_mul(shape.size()), cap)?;
    let mut rng = seeded(seed);
    let sd = variance.sqrt();
    let data = (0..n * shape.size()).map(|_| sd * standard_normal(&mut rng)).collect();
    MeasurementEnsemble::general_dense_stacked(shape, n, data)
}

/// `n` rank-one measurements with i.i.d. N(0, 1) vector entries.
pub fn rank1_ensemble(n: usize, shape: &Shape, seed: u64) -> Result<MeasurementEnsemble> {
    let mut rng = seeded(seed);
    let vectors = shape.dims().iter().map(|&p| gaussian_matrix(p, n, &mut rng)).collect();
    MeasurementEnsemble::rank_one(shape, vectors)
}

/// `count` distinct entries drawn uniformly without replacement.
pub fn completion_sample(count: usize, shape: &Shape, seed: u64) -> Result<MeasurementEnsemble> {
    if count > shape.size() {
        return Err(Error::InvalidSample(format!(
            "cannot sample {count} distinct entries of a {shape} tensor"
        )));
    }
    let mut rng = seeded(seed);
    let indices = sample(&mut rng, shape.size(), count).into_vec();
    MeasurementEnsemble::completion_linear(shape, indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use crate::manifold::{contract, tangent_basis};

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    fn all_variants(sh: &Shape, seed: u64) -> Vec<MeasurementEnsemble> {
        vec![
            gaussian_ensemble(7, sh, 1.0, seed).unwrap(),
            rank1_ensemble(9, sh, seed).unwrap(),
            completion_sample(sh.size() / 2, sh, seed).unwrap(),
            MeasurementEnsemble::identity(sh),
        ]
    }

    #[test]
    fn identity_applies_vectorization() {
        let sh = shape(&[3, 2, 4]);
        let x = gaussian_tensor(&sh, 1.0, &mut seeded(1));
        let e = MeasurementEnsemble::identity(&sh);
        let y = e.apply(&x).unwrap();
        assert_eq!(y.as_slice(), x.data());
        assert_eq!(e.adjoint(&y).unwrap(), x);
    }

    #[test]
    fn one_hot_rank_one_equals_completion() {
        let sh = shape(&[3, 4, 2]);
        let x = gaussian_tensor(&sh, 1.0, &mut seeded(2));
        let idx = [2, 1, 1];
        let vectors = sh
            .dims()
            .iter()
            .zip(idx)
            .map(|(&p, i)| Matrix::from_fn(p, 1, |a, _| if a == i { 1.0 } else { 0.0 }))
            .collect();
        let r1 = MeasurementEnsemble::rank_one(&sh, vectors).unwrap();
        let comp = MeasurementEnsemble::completion(&sh, &[idx.to_vec()]).unwrap();
        assert_eq!(r1.apply(&x).unwrap(), comp.apply(&x).unwrap());
    }

    #[test]
    fn variants_agree_with_densified_form() {
        let sh = shape(&[3, 4, 5]);
        let x = gaussian_tensor(&sh, 1.0, &mut seeded(3));
        let v = DVector::from_fn(9, |i, _| (i as f64).cos());
        for e in all_variants(&sh, 4) {
            let dense = e.densify(DEFAULT_MEMORY_CAP).unwrap();
            let y = e.apply(&x).unwrap();
            assert!((&y - dense.apply(&x).unwrap()).amax() < 1e-12, "{}", e.kind_name());
            let v = DVector::from_fn(e.n(), |i, _| v[i % 9]);
            let a = e.adjoint(&v).unwrap();
            let b = dense.adjoint(&v).unwrap();
            assert!(a.sub(&b).unwrap().hs_norm() < 1e-12, "{}", e.kind_name());
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let sh = shape(&[4, 3, 5]);
        let mut rng = seeded(5);
        for e in all_variants(&sh, 6) {
            let x = gaussian_tensor(&sh, 1.0, &mut rng);
            let v = DVector::from_vec(gaussian_matrix(e.n(), 1, &mut rng).as_slice().to_vec());
            let lhs = e.apply(&x).unwrap().dot(&v);
            let rhs = x.inner(&e.adjoint(&v).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{}", e.kind_name());
        }
    }

    #[test]
    fn completion_adjoint_of_ones_is_indicator() {
        let sh = shape(&[3, 3]);
        let e = MeasurementEnsemble::completion(&sh, &[vec![0, 1], vec![2, 2]]).unwrap();
        let t = e.adjoint(&DVector::from_element(2, 1.0)).unwrap();
        let mut expected = DenseTensor::zeros(sh.clone());
        expected.set(&[0, 1], 1.0);
        expected.set(&[2, 2], 1.0);
        assert_eq!(t, expected);
    }

    #[test]
    fn completion_validation() {
        let sh = shape(&[3, 3]);
        assert!(MeasurementEnsemble::completion(&sh, &[vec![0, 1], vec![0, 1]]).is_err());
        assert!(MeasurementEnsemble::completion(&sh, &[vec![3, 0]]).is_err());
        assert!(MeasurementEnsemble::completion(&sh, &[]).is_err());
        assert!(completion_sample(10, &sh, 0).is_err());
        let all = completion_sample(9, &sh, 0).unwrap();
        assert_eq!(all.completion_indices().unwrap(), &(0..9).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn memory_cap_is_enforced() {
        let sh = shape(&[10, 10, 10]);
        assert!(matches!(
            gaussian_ensemble_capped(100, &sh, 1.0, 0, 50_000),
            Err(Error::MemoryCap { requested: 100_000, cap: 50_000 })
        ));
    }

    #[test]
    fn generators_are_deterministic() {
        let sh = shape(&[3, 4, 2]);
        assert_eq!(gaussian_ensemble(5, &sh, 1.0, 9).unwrap(), gaussian_ensemble(5, &sh, 1.0, 9).unwrap());
        assert_eq!(rank1_ensemble(5, &sh, 9).unwrap(), rank1_ensemble(5, &sh, 9).unwrap());
        assert_eq!(completion_sample(5, &sh, 9).unwrap(), completion_sample(5, &sh, 9).unwrap());
        assert_ne!(completion_sample(5, &sh, 9).unwrap(), completion_sample(5, &sh, 10).unwrap());
    }

    #[test]
    fn gaussian_moments() {
        let sh = shape(&[10, 10]);
        let e = gaussian_ensemble(1000, &sh, 0.25, 17).unwrap();
        let EnsembleKind::GeneralDense { tensors } = e.kind() else { unreachable!() };
        let n = tensors.data().len() as f64;
        let mean = tensors.data().iter().sum::<f64>() / n;
        let var = tensors.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * (0.25 / n).sqrt());
        // the sample variance has standard deviation sqrt(2/n) * variance
        assert!((var - 0.25).abs() < 3.0 * (2.0 / n).sqrt() * 0.25);
    }

    #[test]
    fn fast_sketches_match_general_path() {
        let sh = shape(&[6, 6, 6]);
        let mut rng = seeded(21);
        let x = random_unit_tucker(&sh, &TuckerRank::uniform(2, 3).unwrap(), &mut rng);
        let basis = tangent_basis(&x).unwrap();
        for e in [
            rank1_ensemble(20, &sh, 3).unwrap(),
            completion_sample(40, &sh, 3).unwrap(),
        ] {
            let fast = e.sketch_covariates(&basis).unwrap().design();
            let slow = e.densify(DEFAULT_MEMORY_CAP).unwrap().sketch_covariates(&basis).unwrap().design();
            assert!((fast - slow).amax() <= 1e-12, "{}", e.kind_name());
        }
    }

    #[test]
    fn general_sketch_rows_are_contractions() {
        let sh = shape(&[4, 5, 3]);
        let mut rng = seeded(22);
        let x = random_unit_tucker(&sh, &TuckerRank::new(vec![2, 2, 2]).unwrap(), &mut rng);
        let basis = tangent_basis(&x).unwrap();
        let e = gaussian_ensemble(6, &sh, 1.0, 4).unwrap();
        let design = e.sketch_covariates(&basis).unwrap().design();
        for i in 0..6 {
            let c = contract(&basis, &e.measurement_tensor(i)).unwrap().coords();
            for (j, x) in c.iter().enumerate() {
                assert!((design[(i, j)] - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_sketch_is_orthonormal() {
        let sh = shape(&[4, 5, 3]);
        let mut rng = seeded(23);
        let x = random_unit_tucker(&sh, &TuckerRank::new(vec![2, 2, 2]).unwrap(), &mut rng);
        let basis = tangent_basis(&x).unwrap();
        let design = MeasurementEnsemble::identity(&sh).sketch_covariates(&basis).unwrap().design();
        assert!(orthonormality_defect(&design) < 1e-10);
    }

    #[test]
    fn trip_probe_cases() {
        let sh = shape(&[8, 8, 8]);
        let r = TuckerRank::uniform(1, 3).unwrap();
        let (lo, hi) = MeasurementEnsemble::identity(&sh).trip_probe(&r, 5, 1).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let e = gaussian_ensemble(2000, &sh, 1.0 / 2000.0, 2).unwrap();
        let (lo, hi) = e.trip_probe(&r, 20, 3).unwrap();
        assert!(lo > 0.5 && hi < 1.5, "({lo}, {hi})");
        let e = gaussian_ensemble(10, &sh, 0.1, 2).unwrap();
        let (lo, hi) = e.trip_probe(&r, 20, 3).unwrap();
        assert!(lo < 0.5 || hi > 1.5, "({lo}, {hi})");
    }

    #[test]
    fn text_round_trips() {
        let sh = shape(&[3, 2, 2]);
        for e in all_variants(&sh, 30) {
            let back = MeasurementEnsemble::parse_text(&e.to_text()).unwrap();
            assert_eq!(back, e, "{}", e.kind_name());
        }
        assert!(MeasurementEnsemble::parse_text("kind: completion\ndims: 2 2\nn: 2\n0 0\n").is_err());
    }
}
