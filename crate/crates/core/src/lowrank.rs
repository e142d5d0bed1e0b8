//! Column-sampling approximations: matrix projection `U_1 U_1^T X` and the
//! Nyström reconstruction `K_1 W^+ K_1^T`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{pseudoinverse, singular_values, thin_svd, DenseMatrix};
use crate::sampling::ColumnSample;

/// Entrywise tolerance for the symmetry precondition of [`nystrom`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ColumnProjection,
    Nystrom,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ColumnProjection => "column_projection",
            Method::Nystrom => "nystrom",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "column_projection" | "projection" => Ok(Method::ColumnProjection),
            "nystrom" => Ok(Method::Nystrom),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    pub frobenius: f64,
    pub spectral: f64,
    /// `frobenius / ||X||_F`, with `0 / 0 = 0`.
    pub normalized: f64,
}

#[derive(Clone, Debug)]
pub struct ApproximationResult {
    pub approx: DenseMatrix,
    pub method: Method,
    pub l: usize,
    pub frobenius_error: f64,
    pub spectral_error: f64,
    pub normalized_error: f64,
}

impl ApproximationResult {
    fn new(x: &DenseMatrix, approx: DenseMatrix, method: Method, l: usize) -> Result<Self> {
        let m = error_metrics(x, &approx)?;
        Ok(Self {
            approx,
            method,
            l,
            frobenius_error: m.frobenius,
            spectral_error: m.spectral,
            normalized_error: m.normalized,
        })
    }
}

pub fn error_metrics(x: &DenseMatrix, approx: &DenseMatrix) -> Result<ErrorMetrics> {
    let diff = x.sub(approx)?;
    let frobenius = diff.frobenius_norm();
    let spectral = singular_values(&diff)?.first().copied().unwrap_or(0.0);
    let scale = x.frobenius_norm();
    let normalized = if frobenius == 0.0 {
        0.0
    } else {
        frobenius / scale
    };
    Ok(ErrorMetrics {
        frobenius,
        spectral,
        normalized,
    })
}

fn check_sample(x: &DenseMatrix, sample: &ColumnSample) -> Result<()> {
    let (n, l) = sample.submatrix.shape();
    if n != x.rows() || l != sample.indices.len() {
        return Err(Error::DimensionMismatch(format!(
            "sample is {n} x {l} with {} indices, source has {} rows",
            sample.indices.len(),
            x.rows()
        )));
    }
    if let Some(&j) = sample.indices.iter().find(|&&j| j >= x.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "sampled column {j} out of range for {} columns",
            x.cols()
        )));
    }
    Ok(())
}

/// Orthogonal projection of `x` onto the span of the sampled columns.
pub fn column_projection(x: &DenseMatrix, sample: &ColumnSample) -> Result<ApproximationResult> {
    check_sample(x, sample)?;
    let svd = thin_svd(&sample.submatrix)?;
    let approx = match svd.leading_left(svd.numerical_rank) {
        Some(u) => u.matmul(&u.transpose().matmul(x)?)?,
        None => DenseMatrix::zeros(x.rows(), x.cols()),
    };
    ApproximationResult::new(x, approx, Method::ColumnProjection, sample.len())
}

/// `K_1 W^+ K_1^T` where `K_1 = K[:, idx]` and `W = K[idx, idx]`.
pub fn nystrom(k: &DenseMatrix, sample: &ColumnSample) -> Result<ApproximationResult> {
    if k.rows() != k.cols() {
        return Err(Error::DimensionMismatch(format!(
            "Nyström needs a square matrix, got {} x {}",
            k.rows(),
            k.cols()
        )));
    }
    check_sample(k, sample)?;
    let defect = k.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::ContractViolation(format!(
            "Nyström input is not symmetric (max |K - K^T| = {defect:.3e})"
        )));
    }
    let k1 = &sample.submatrix;
    let w = k.select_block(&sample.indices, &sample.indices)?;
    let core = k1.matmul(&pseudoinverse(&w)?)?.matmul(&k1.transpose())?;
    let approx = core.add(&core.transpose())?.scale(0.5);
    ApproximationResult::new(k, approx, Method::Nystrom, sample.len())
}

/// Dispatches on `method`.
pub fn approximate(
    x: &DenseMatrix,
    sample: &ColumnSample,
    method: Method,
) -> Result<ApproximationResult> {
    match method {
        Method::ColumnProjection => column_projection(x, sample),
        Method::Nystrom => nystrom(x, sample),
    }
}
