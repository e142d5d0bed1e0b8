//! Dense matrix container and the decompositions built on it.
//!
//! Storage is column-major (the nalgebra layout), so extracting a column is a
//! contiguous slice copy. Every constructor rejects empty shapes and
//! non-finite entries.

use std::ops::Index;

use dyn_stack::{MemBuffer, MemStack};
use faer::diag::Diag;
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::svd::{self, ComputeSvdVectors, SvdParams};
use faer::{Auto, Mat, MatRef, Par};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Entrywise tolerance for orthonormality, symmetry and idempotence checks.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

const ZERO_SPECTRUM_FLOOR: f64 = 1e-12;

/// Real-valued `rows x cols` dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    data: DMatrix<f64>,
}

impl DenseMatrix {
    /// Wraps an nalgebra matrix, checking the shape and finiteness invariants.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = data.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos % rows,
                col: pos / rows,
            });
        }
        Ok(Self { data })
    }

    pub fn from_column_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_count(rows, cols, entries.len())?;
        Self::new(DMatrix::from_column_slice(rows, cols, entries))
    }

    pub fn from_row_slice(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_count(rows, cols, entries.len())?;
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "columns have different lengths".into(),
            ));
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::from_column_slice(rows, cols, &flat)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            data: DMatrix::zeros(rows, cols),
        }
    }

    /// # Panics
    /// If `n` is zero.
    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "zero-sized matrix");
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    /// The standard basis vector `e_i` of length `n` as a single column.
    pub fn basis_vector(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "basis index {i} out of range for dimension {n}"
            )));
        }
        let mut m = Self::zeros(n, 1);
        m.data[(i, 0)] = 1.0;
        Ok(m)
    }

    /// Results of arithmetic on finite inputs; finiteness is only debug-checked.
    pub(crate) fn from_computed(data: DMatrix<f64>) -> Self {
        debug_assert!(data.nrows() > 0 && data.ncols() > 0);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { data }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.data.get((row, col)).copied()
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.rows();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    /// All entries in column-major order.
    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_computed(self.data.transpose())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self::from_computed(&self.data * &rhs.data))
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self::from_computed(&self.data - &rhs.data))
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        Ok(Self::from_computed(&self.data + &rhs.data))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_computed(&self.data * factor)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `max |self_ij - rhs_ij|`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.check_same_shape(rhs)?;
        Ok(self
            .data
            .iter()
            .zip(rhs.data.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// Copies the listed columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        let n = self.rows();
        let mut flat = Vec::with_capacity(n * indices.len());
        for &j in indices {
            if j >= self.cols() {
                return Err(Error::InvalidArgument(format!(
                    "column index {j} out of range for {} columns",
                    self.cols()
                )));
            }
            flat.extend_from_slice(self.column(j));
        }
        Self::from_column_slice(n, indices.len(), &flat)
    }

    /// Leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.cols() {
            return Err(Error::InvalidArgument(format!(
                "cannot take {k} leading columns of a {}-column matrix",
                self.cols()
            )));
        }
        Ok(Self::from_computed(self.data.columns(0, k).into_owned()))
    }

    /// The block at the given row and column indices.
    pub fn select_block(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if let Some(&i) = rows.iter().find(|&&i| i >= self.rows()) {
            return Err(Error::InvalidArgument(format!(
                "row index {i} out of range"
            )));
        }
        if let Some(&j) = cols.iter().find(|&&j| j >= self.cols()) {
            return Err(Error::InvalidArgument(format!(
                "column index {j} out of range"
            )));
        }
        Self::from_fn(rows.len(), cols.len(), |a, b| self.data[(rows[a], cols[b])])
    }

    /// `[self rhs]`.
    pub fn hstack(&self, rhs: &Self) -> Result<Self> {
        if self.rows() != rhs.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} rows next to {} rows",
                self.rows(),
                rhs.rows()
            )));
        }
        let mut flat = Vec::with_capacity(self.rows() * (self.cols() + rhs.cols()));
        flat.extend_from_slice(self.as_slice());
        flat.extend_from_slice(rhs.as_slice());
        Self::from_column_slice(self.rows(), self.cols() + rhs.cols(), &flat)
    }

    /// Square and `|A_ij - A_ji| <= tol` everywhere.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows() == self.cols() && self.symmetry_defect() <= tol
    }

    /// `max |A_ij - A_ji|` for square matrices, infinity otherwise.
    pub fn symmetry_defect(&self) -> f64 {
        if self.rows() != self.cols() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in (j + 1)..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)]).abs());
            }
        }
        worst
    }

    /// Squared Euclidean norm of each row.
    pub fn row_norms_squared(&self) -> Vec<f64> {
        let mut norms = vec![0.0; self.rows()];
        for j in 0..self.cols() {
            for (acc, v) in norms.iter_mut().zip(self.column(j)) {
                *acc += v * v;
            }
        }
        norms
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch(format!(
                "shapes {:?} and {:?} differ",
                self.shape(),
                rhs.shape()
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.data[idx]
    }
}

fn check_count(rows: usize, cols: usize, found: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if rows * cols != found {
        return Err(Error::EntryCount {
            expected: rows * cols,
            found,
        });
    }
    Ok(())
}

/// How the cutoff separating numerically nonzero singular values is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankThreshold {
    /// `max(n, m) * sigma_1 * f64::EPSILON`, or `1e-12` when `sigma_1 == 0`.
    Scaled { max_dim: usize },
    /// A fixed cutoff.
    Absolute(f64),
}

impl RankThreshold {
    /// The default policy for a matrix of the given shape.
    pub fn for_shape(rows: usize, cols: usize) -> Self {
        Self::Scaled {
            max_dim: rows.max(cols),
        }
    }

    /// Cutoff for a descending spectrum.
    pub fn cutoff(&self, singular_values: &[f64]) -> f64 {
        match *self {
            Self::Absolute(tau) => tau,
            Self::Scaled { max_dim } => {
                let top = singular_values.first().copied().unwrap_or(0.0);
                if top > 0.0 {
                    max_dim as f64 * top * f64::EPSILON
                } else {
                    ZERO_SPECTRUM_FLOOR
                }
            }
        }
    }
}

/// Number of singular values strictly above the policy cutoff.
pub fn numerical_rank(singular_values: &[f64], policy: RankThreshold) -> usize {
    let tau = policy.cutoff(singular_values);
    singular_values.iter().filter(|&&s| s > tau).count()
}

/// Thin SVD `X = U diag(sigma) V^T` with `q = min(n, m)` columns in each factor.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    /// `n x q`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `m x q`, orthonormal columns.
    pub v: DenseMatrix,
    pub numerical_rank: usize,
}

impl ThinSvd {
    /// The left singular vectors paired with the `k` largest singular values,
    /// or `None` when `k == 0`.
    pub fn leading_left(&self, k: usize) -> Option<DenseMatrix> {
        (k > 0).then(|| {
            self.u
                .leading_columns(k.min(self.u.cols()))
                .expect("k is within range")
        })
    }

    /// The right singular vectors paired with the `k` largest singular values.
    pub fn leading_right(&self, k: usize) -> Option<DenseMatrix> {
        (k > 0).then(|| {
            self.v
                .leading_columns(k.min(self.v.cols()))
                .expect("k is within range")
        })
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.as_dmatrix().clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        DenseMatrix::from_computed(us * self.v.as_dmatrix().transpose())
    }
}

pub fn thin_svd(x: &DenseMatrix) -> Result<ThinSvd> {
    let (singular_values, factors) = decompose(x, true)?;
    let (u, v) = factors.expect("vectors requested");
    let numerical_rank = numerical_rank(
        &singular_values,
        RankThreshold::for_shape(x.rows(), x.cols()),
    );
    Ok(ThinSvd {
        u,
        singular_values,
        v,
        numerical_rank,
    })
}

/// Singular values only, in non-increasing order.
pub fn singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(decompose(x, false)?.0)
}

/// Left and right singular vectors.
type Factors = (DenseMatrix, DenseMatrix);

/// Recursion thresholds tried in turn. faer's QR iteration (used below the
/// threshold) occasionally stalls on well-conditioned input that its divide
/// and conquer path handles, so failures retry with a lower threshold.
const SVD_RECURSION_THRESHOLDS: [usize; 3] = [128, 24, 4];

/// Runs faer's SVD sequentially so results do not depend on thread count.
fn decompose(x: &DenseMatrix, vectors: bool) -> Result<(Vec<f64>, Option<Factors>)> {
    let (n, m) = x.shape();
    let q = n.min(m);
    let a = MatRef::from_column_major_slice(x.as_slice(), n, m);
    let compute = if vectors {
        ComputeSvdVectors::Thin
    } else {
        ComputeSvdVectors::No
    };
    let mut s = Diag::<f64>::zeros(q);
    let mut u = Mat::<f64>::zeros(n, if vectors { q } else { 0 });
    let mut v = Mat::<f64>::zeros(m, if vectors { q } else { 0 });
    let mut converged = false;
    for threshold in SVD_RECURSION_THRESHOLDS {
        let mut params: SvdParams = Auto::<f64>::auto();
        params.recursion_threshold = threshold;
        let mut buf = MemBuffer::new(svd::svd_scratch::<f64>(
            n,
            m,
            compute,
            compute,
            Par::Seq,
            params.into(),
        ));
        if svd::svd(
            a,
            s.as_mut(),
            vectors.then(|| u.as_mut()),
            vectors.then(|| v.as_mut()),
            Par::Seq,
            MemStack::new(&mut buf),
            params.into(),
        )
        .is_ok()
        {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::DecompositionFailed);
    }

    let sv: Vec<f64> = s.column_vector().iter().copied().collect();
    if sv.iter().any(|v| !v.is_finite()) {
        return Err(Error::DecompositionFailed);
    }
    if !vectors {
        return Ok((sv, None));
    }
    let u = DMatrix::from_fn(n, q, |i, j| u[(i, j)]);
    let v = DMatrix::from_fn(m, q, |i, j| v[(i, j)]);
    if u.iter().chain(v.iter()).any(|e| !e.is_finite()) {
        return Err(Error::DecompositionFailed);
    }
    Ok((
        sv,
        Some((DenseMatrix::from_computed(u), DenseMatrix::from_computed(v))),
    ))
}

/// Eigenvalues of a symmetric matrix, ascending. Only the lower triangle is
/// read.
pub fn symmetric_eigenvalues(x: &DenseMatrix) -> Result<Vec<f64>> {
    let n = x.rows();
    if x.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {n} x {}",
            x.cols()
        )));
    }
    let a = MatRef::from_column_major_slice(x.as_slice(), n, n);
    let mut s = Diag::<f64>::zeros(n);
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::No,
        Par::Seq,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        a,
        s.as_mut(),
        None,
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|_| Error::DecompositionFailed)?;
    let mut eig: Vec<f64> = s.column_vector().iter().copied().collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::DecompositionFailed);
    }
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Largest singular value.
pub fn spectral_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(x)?.first().copied().unwrap_or(0.0))
}

/// Moore-Penrose pseudoinverse `V diag(sigma^+) U^T`; singular values at or
/// below the rank cutoff are inverted to exactly zero.
pub fn pseudoinverse(x: &DenseMatrix) -> Result<DenseMatrix> {
    let svd = thin_svd(x)?;
    let k = svd.numerical_rank;
    if k == 0 {
        return Ok(DenseMatrix::zeros(x.cols(), x.rows()));
    }
    let u = svd.u.as_dmatrix().columns(0, k);
    let mut v = svd.v.as_dmatrix().columns(0, k).into_owned();
    for (j, s) in svd.singular_values[..k].iter().enumerate() {
        v.column_mut(j).scale_mut(1.0 / s);
    }
    Ok(DenseMatrix::from_computed(v * u.transpose()))
}

/// `max |U^T U - I|`.
pub fn orthonormality_defect(u: &DenseMatrix) -> f64 {
    let gram = u.as_dmatrix().tr_mul(u.as_dmatrix());
    let q = gram.nrows();
    let mut worst = 0.0f64;
    for j in 0..q {
        for i in 0..q {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

pub(crate) fn require_orthonormal(u: &DenseMatrix) -> Result<()> {
    let defect = orthonormality_defect(u);
    if defect > ORTHONORMALITY_TOL {
        return Err(Error::ContractViolation(format!(
            "columns are not orthonormal (max |U^T U - I| = {defect:.3e})"
        )));
    }
    Ok(())
}

/// Orthogonal projector `U U^T` onto the span of orthonormal columns.
pub fn projector(u: &DenseMatrix) -> Result<DenseMatrix> {
    require_orthonormal(u)?;
    let d = u.as_dmatrix();
    Ok(DenseMatrix::from_computed(d * d.transpose()))
}

/// Orthonormal basis of the span of `[a b]` where `a` already has
/// orthonormal columns; the first `a.cols()` output columns equal `a` exactly.
pub(crate) fn extend_orthonormal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = a.shape();
    let mut stacked = DMatrix::zeros(n, k + b.ncols());
    stacked.columns_mut(0, k).copy_from(a);
    stacked.columns_mut(k, b.ncols()).copy_from(b);
    let mut q = stacked.qr().q();
    q.columns_mut(0, k).copy_from(a);
    q
}
