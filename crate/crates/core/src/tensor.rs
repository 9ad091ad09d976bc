//! Dense order-d tensors.
//!
//! Entries are stored colexicographically: the zero-based multi-index
//! `(i_1, ..., i_d)` lives at `i_1 + p_1 * (i_2 + p_2 * (i_3 + ...))`, so the
//! first index varies fastest. With this layout the mode-1 unfolding is the
//! storage buffer itself read as a column-major `p_1 x p_{-1}` matrix, and the
//! column index of every other unfolding is the colexicographic rank of the
//! remaining indices.
//!
//! Modes are zero-based throughout the API.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrixView, DMatrixViewMut};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dimensions `p_1, ..., p_d` of an order-d tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("a tensor needs at least one mode".into()));
        }
        if let Some(k) = dims.iter().position(|&p| p == 0) {
            return Err(Error::InvalidShape(format!("mode {k} has zero length")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &p| acc.checked_mul(p))
            .ok_or_else(|| Error::InvalidShape(format!("{dims:?} overflows the index type")))?;
        Ok(Shape(dims))
    }

    /// Cubical shape `p x p x ... x p` of the given order.
    pub fn cube(p: usize, order: usize) -> Result<Self> {
        Shape::new(vec![p; order])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.0[mode]
    }

    /// Total number of entries.
    pub fn size(&self) -> usize {
        self.0.iter().product()
    }

    /// `p_{-k}`: the product of all dimensions except `mode`.
    pub fn others(&self, mode: usize) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != mode)
            .map(|(_, &p)| p)
            .product()
    }

    /// Same shape with mode `mode` resized to `len`.
    pub fn with_dim(&self, mode: usize, len: usize) -> Shape {
        let mut dims = self.0.clone();
        dims[mode] = len;
        Shape(dims)
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.order() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        }
    }

    /// Colexicographic linear index of a zero-based multi-index.
    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order());
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &p) in index.iter().zip(&self.0) {
            debug_assert!(i < p);
            lin += i * stride;
            stride *= p;
        }
        lin
    }

    /// Inverse of [`Shape::linear_index`].
    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        self.0
            .iter()
            .map(|&p| {
                let i = lin % p;
                lin /= p;
                i
            })
            .collect()
    }

    /// `(left, len, right)` block sizes around `mode`: the products of the
    /// dimensions before and after it.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.0[..mode].iter().product();
        let right = self.0[mode + 1..].iter().product();
        (left, self.0[mode], right)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Real dense tensor in colexicographic storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.size() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape} needs {} entries, got {}",
                shape.size(),
                data.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.size()];
        DenseTensor { shape, data }
    }

    /// Builds a tensor by evaluating `f` at every zero-based multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let data = (0..shape.size())
            .map(|lin| f(&shape.multi_index(lin)))
            .collect();
        DenseTensor { shape, data }
    }

    /// Outer product `v_1 ∘ v_2 ∘ ... ∘ v_d`.
    pub fn outer(vectors: &[&[f64]]) -> Result<Self> {
        let shape = Shape::new(vectors.iter().map(|v| v.len()).collect())?;
        let mut data = vec![1.0];
        for v in vectors {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for &x in v.iter() {
                next.extend(data.iter().map(|&a| a * x));
            }
            data = next;
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.linear_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let lin = self.shape.linear_index(index);
        self.data[lin] = value;
    }

    /// Mode-k unfolding `M_k(t)`, a `p_k x p_{-k}` matrix whose column index
    /// is the colexicographic rank of the remaining indices.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let (left, len, right) = self.shape.split(mode);
        if mode == 0 {
            return Ok(Matrix::from_column_slice(len, right, &self.data));
        }
        let mut out = vec![0.0; self.data.len()];
        for r in 0..right {
            let block = &self.data[r * left * len..(r + 1) * left * len];
            for i in 0..len {
                let src = &block[i * left..(i + 1) * left];
                for (l, &x) in src.iter().enumerate() {
                    out[i + len * (l + left * r)] = x;
                }
            }
        }
        Ok(Matrix::from_vec(len, left * right, out))
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn tensorize(m: &Matrix, mode: usize, shape: &Shape) -> Result<Self> {
        shape.check_mode(mode)?;
        let (left, len, right) = shape.split(mode);
        if m.nrows() != len || m.ncols() != left * right {
            return Err(Error::DimensionMismatch(format!(
                "a {}x{} matrix cannot fold along mode {mode} into {shape}",
                m.nrows(),
                m.ncols()
            )));
        }
        let src = m.as_slice();
        if mode == 0 {
            return DenseTensor::new(shape.clone(), src.to_vec());
        }
        let mut data = vec![0.0; src.len()];
        for r in 0..right {
            for i in 0..len {
                let dst = &mut data[r * left * len + i * left..r * left * len + (i + 1) * left];
                for (l, x) in dst.iter_mut().enumerate() {
                    *x = src[i + len * (l + left * r)];
                }
            }
        }
        DenseTensor::new(shape.clone(), data)
    }

    /// Mode-k product `t x_k B`, replacing `p_k` by `B.nrows()`.
    pub fn mode_product(&self, mode: usize, b: &Matrix) -> Result<Self> {
        self.shape.check_mode(mode)?;
        let (left, len, right) = self.shape.split(mode);
        if b.ncols() != len {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} product needs {len} columns, matrix is {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let rows = b.nrows();
        let shape = self.shape.with_dim(mode, rows);
        let mut data = vec![0.0; left * rows * right];
        if mode == 0 {
            // M_1(result) = B M_1(t), both stored in place.
            let src = DMatrixView::from_slice(&self.data, len, right);
            let mut dst = DMatrixViewMut::from_slice(&mut data, rows, right);
            dst.gemm(1.0, b, &src, 0.0);
        } else {
            // Each slab over the trailing modes is a left x len matrix.
            let bt = b.transpose();
            for r in 0..right {
                let src = DMatrixView::from_slice(&self.data[r * left * len..], left, len);
                let mut dst =
                    DMatrixViewMut::from_slice(&mut data[r * left * rows..], left, rows);
                dst.gemm(1.0, &src, &bt, 0.0);
            }
        }
        Ok(DenseTensor { shape, data })
    }

    /// Applies `mats[k]` along every mode `k` where it is given, in
    /// ascending mode order.
    pub fn multi_mode_product(&self, mats: &[Option<&Matrix>]) -> Result<Self> {
        if mats.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices supplied for an order-{} tensor",
                mats.len(),
                self.order()
            )));
        }
        let mut out: Option<DenseTensor> = None;
        for (k, m) in mats.iter().enumerate() {
            if let Some(m) = m {
                out = Some(out.as_ref().unwrap_or(self).mode_product(k, m)?);
            }
        }
        Ok(out.unwrap_or_else(|| self.clone()))
    }

    /// `t x_1 U_1^T ... x_d U_d^T`, skipping `skip` if given.
    pub fn project_onto(&self, factors: &[Matrix], skip: Option<usize>) -> Result<Self> {
        let ts: Vec<Matrix> = factors.iter().map(|u| u.transpose()).collect();
        let mats: Vec<Option<&Matrix>> = ts
            .iter()
            .enumerate()
            .map(|(k, m)| if Some(k) == skip { None } else { Some(m) })
            .collect();
        self.multi_mode_product(&mats)
    }

    /// `t x_1 U_1 ... x_d U_d`, skipping `skip` if given.
    pub fn expand_by(&self, factors: &[Matrix], skip: Option<usize>) -> Result<Self> {
        let mats: Vec<Option<&Matrix>> = factors
            .iter()
            .enumerate()
            .map(|(k, m)| if Some(k) == skip { None } else { Some(m) })
            .collect();
        self.multi_mode_product(&mats)
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Reorders modes: mode `j` of the result is mode `perm[j]` of `self`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let d = self.order();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&k| k >= d || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let shape = Shape(perm.iter().map(|&k| self.shape.dim(k)).collect());
        let mut src_index = vec![0; d];
        Ok(DenseTensor::from_fn(shape, |idx| {
            for (j, &k) in perm.iter().enumerate() {
                src_index[k] = idx[j];
            }
            self.get(&src_index)
        }))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "shapes {} and {} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// Writes the text format: a `dims:` line, then the entries in storage
    /// order, whitespace separated.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("dims:");
        for p in self.shape.dims() {
            let _ = write!(s, " {p}");
        }
        s.push('\n');
        write_scalars(&mut s, &self.data);
        s
    }

    pub fn read_text<R: BufRead>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        DenseTensor::parse_text(&text)
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().skip_while(|l| l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tensor text".into()))?;
        let shape = parse_dims(header)?;
        let data = lines
            .flat_map(|l| l.split_whitespace())
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad scalar {tok:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if data.len() != shape.size() {
            return Err(Error::Parse(format!(
                "dims {shape} need {} scalars, found {}",
                shape.size(),
                data.len()
            )));
        }
        DenseTensor::new(shape, data)
    }
}

pub(crate) fn parse_dims(line: &str) -> Result<Shape> {
    let rest = line
        .trim()
        .strip_prefix("dims:")
        .ok_or_else(|| Error::Parse(format!("expected a `dims:` line, found {line:?}")))?;
    let dims = rest
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad dimension {tok:?}: {e}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Shape::new(dims)
}

pub(crate) fn write_scalars(s: &mut String, values: &[f64]) {
    for chunk in values.chunks(8) {
        let line: Vec<String> = chunk.iter().map(|x| format!("{x:e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
}

/// Sequential dot product; the fixed summation order keeps results
/// reproducible bit for bit.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}
