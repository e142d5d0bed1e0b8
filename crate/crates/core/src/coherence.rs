//! Coherence measures of orthonormal bases and their sample-based estimate.
//!
//! For `U` with `q` orthonormal columns in dimension `n`:
//!
//! * `gamma(U) = max_i ||U_(i)||^2`, the largest squared row norm, which is
//!   also `max_i ||P_U e_i||^2`;
//! * `mu0(U) = (n / q) * gamma(U)`;
//! * `mu(U) = sqrt(n) * max_ij |U_ij|`;
//! * `mu1(X) = sqrt(n m / q) * max_ij |T_ij|` with `T = U V^T`.
//!
//! The estimator takes the left singular vectors of an `n x l` column sample,
//! keeps the top `min(rank, r)` of them and reports their coherence. Row norms
//! are used throughout; the `n x n` projector is never formed.

use crate::error::{Error, Result};
use crate::matrix::{require_orthonormal, thin_svd, DenseMatrix};

/// Relative size below which a residual counts as lying in the current span.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Coherence values of one orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceReport {
    /// In `[0, 1]`.
    pub gamma: f64,
    /// At least 1 whenever `rank_used >= 1`.
    pub mu: f64,
    pub mu0: f64,
    /// Present only when right singular vectors were available.
    pub mu1: Option<f64>,
    /// Number of basis columns the values were computed from.
    pub rank_used: usize,
    /// Ambient dimension (rows of the basis).
    pub n: usize,
}

impl CoherenceReport {
    /// Report for a rank-zero basis: every measure is zero.
    pub fn empty(n: usize) -> Self {
        Self {
            gamma: 0.0,
            mu: 0.0,
            mu0: 0.0,
            mu1: None,
            rank_used: 0,
            n,
        }
    }

    /// Builds the report from orthonormal left (and optionally right) factors.
    pub fn from_factors(u: &DenseMatrix, v: Option<&DenseMatrix>) -> Result<Self> {
        require_orthonormal(u)?;
        if let Some(v) = v {
            require_orthonormal(v)?;
            check_paired(u, v)?;
        }
        Ok(Self::from_factors_unchecked(u, v))
    }

    fn from_factors_unchecked(u: &DenseMatrix, v: Option<&DenseMatrix>) -> Self {
        let (n, q) = u.shape();
        let mu0 = mu0_from_gamma(max_row_norm_sq(u), n, q);
        Self {
            gamma: Self::gamma_from_mu0(mu0, q, n),
            mu: mu_unchecked(u),
            mu0,
            mu1: v.map(|v| mu1_unchecked(u, v)),
            rank_used: q,
            n,
        }
    }

    /// `(rank / n) * mu0`, clamped to 1; the single arithmetic path used for
    /// the `gamma` field.
    pub fn gamma_from_mu0(mu0: f64, rank: usize, n: usize) -> f64 {
        if rank == 0 {
            return 0.0;
        }
        ((rank as f64 / n as f64) * mu0).min(1.0)
    }
}

fn check_paired(u: &DenseMatrix, v: &DenseMatrix) -> Result<()> {
    if u.cols() != v.cols() {
        return Err(Error::DimensionMismatch(format!(
            "left factor has {} columns, right factor has {}",
            u.cols(),
            v.cols()
        )));
    }
    Ok(())
}

fn max_row_norm_sq(u: &DenseMatrix) -> f64 {
    u.row_norms_squared()
        .into_iter()
        .fold(0.0f64, f64::max)
        .min(1.0)
}

fn mu0_from_gamma(gamma: f64, n: usize, q: usize) -> f64 {
    (n as f64 / q as f64) * gamma
}

fn mu_unchecked(u: &DenseMatrix) -> f64 {
    (u.rows() as f64).sqrt() * u.max_abs()
}

fn mu1_unchecked(u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    let (n, q) = u.shape();
    let m = v.rows();
    let t = u.as_dmatrix() * v.as_dmatrix().transpose();
    let peak = t.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    ((n * m) as f64 / q as f64).sqrt() * peak
}

/// `max_i ||U_(i)||^2`.
pub fn gamma(u: &DenseMatrix) -> Result<f64> {
    require_orthonormal(u)?;
    Ok(max_row_norm_sq(u))
}

/// Gamma of the span of a single unit vector: `max_i z_i^2`.
pub fn gamma_of_unit_vector(z: &[f64]) -> f64 {
    z.iter().fold(0.0f64, |acc, v| acc.max(v * v)).min(1.0)
}

pub fn compute_mu(u: &DenseMatrix) -> Result<f64> {
    require_orthonormal(u)?;
    Ok(mu_unchecked(u))
}

pub fn compute_mu0(u: &DenseMatrix) -> Result<f64> {
    let g = gamma(u)?;
    Ok(mu0_from_gamma(g, u.rows(), u.cols()))
}

pub fn compute_mu1(u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    check_paired(u, v)?;
    require_orthonormal(u)?;
    require_orthonormal(v)?;
    Ok(mu1_unchecked(u, v))
}

/// Coherence of the full matrix from its top `min(rank, r)` singular vectors
/// (all numerically nonzero ones when `r` is `None`).
pub fn exact_coherence(x: &DenseMatrix, r: Option<usize>) -> Result<CoherenceReport> {
    if r == Some(0) {
        return Err(Error::InvalidArgument(
            "rank parameter must be positive".into(),
        ));
    }
    let svd = thin_svd(x)?;
    let q = r.map_or(svd.numerical_rank, |r| r.min(svd.numerical_rank));
    match (svd.leading_left(q), svd.leading_right(q)) {
        (Some(u), Some(v)) => Ok(CoherenceReport::from_factors_unchecked(&u, Some(&v))),
        _ => Ok(CoherenceReport::empty(x.rows())),
    }
}

/// Estimates the coherence of a matrix from `x1`, an `n x l` block of its
/// columns, using the top `min(rank(x1), r)` left singular vectors of `x1`.
///
/// Pass `r >= l` for exactly low-rank inputs so no truncation happens. An
/// all-zero sample yields the empty report rather than an error.
pub fn estimate_coherence(x1: &DenseMatrix, r: usize) -> Result<CoherenceReport> {
    if r == 0 {
        return Err(Error::InvalidArgument(
            "rank parameter must be positive".into(),
        ));
    }
    let svd = thin_svd(x1)?;
    let q = svd.numerical_rank.min(r);
    Ok(match svd.leading_left(q) {
        Some(u) => CoherenceReport::from_factors_unchecked(&u, None),
        None => CoherenceReport::empty(x1.rows()),
    })
}

/// Result of appending one column to a sample, in projector form.
#[derive(Clone, Debug)]
pub struct ProjectorUpdate {
    /// Projector onto the span of the enlarged sample.
    pub projector: DenseMatrix,
    /// Cap on the gamma increment: `gamma(z)`, or 0 when the column was
    /// already in the span.
    pub increment_bound: f64,
    /// `||(I - P) x||`.
    pub residual_norm: f64,
    /// Normalised residual `z`, absent when the column was in the span.
    pub direction: Option<Vec<f64>>,
}

/// Rank-one update of an orthogonal projector after appending column `x`:
/// `P + z z^T` with `z` the normalised residual, or `P` unchanged when the
/// residual is at most `RESIDUAL_TOL * max(1, ||x||)`.
///
/// Only symmetry of `p` is verified; idempotence is the caller's contract.
pub fn projector_update(p: &DenseMatrix, x: &[f64]) -> Result<ProjectorUpdate> {
    let n = p.rows();
    if p.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "projector must be square, got {}x{}",
            n,
            p.cols()
        )));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "column has length {}, projector acts on dimension {n}",
            x.len()
        )));
    }
    let defect = p.symmetry_defect();
    if defect > crate::matrix::ORTHONORMALITY_TOL {
        return Err(Error::ContractViolation(format!(
            "projector is not symmetric (defect {defect:.3e})"
        )));
    }

    let xv = nalgebra::DVector::from_column_slice(x);
    let residual = &xv - p.as_dmatrix() * &xv;
    let s = residual.norm();
    if s <= RESIDUAL_TOL * xv.norm().max(1.0) {
        return Ok(ProjectorUpdate {
            projector: p.clone(),
            increment_bound: 0.0,
            residual_norm: s,
            direction: None,
        });
    }
    let z = residual / s;
    let updated = p.as_dmatrix() + &z * z.transpose();
    let z: Vec<f64> = z.iter().copied().collect();
    Ok(ProjectorUpdate {
        projector: DenseMatrix::from_computed(updated),
        increment_bound: gamma_of_unit_vector(&z),
        residual_norm: s,
        direction: Some(z),
    })
}

/// `r^2 mu0 max(c1 log r, c2 log(3 / delta))` before rounding up, with
/// `log r` taken as 1 when `r == 1`.
pub fn sample_size_requirement(r: usize, mu0: f64, delta: f64, c1: f64, c2: f64) -> Result<f64> {
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    if !(mu0.is_finite() && mu0 >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mu0 must be >= 1, got {mu0}"
        )));
    }
    if !(delta.is_finite() && delta > 0.0 && delta < 3.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 3) so that log(3 / delta) > 0, got {delta}"
        )));
    }
    for (name, c) in [("c1", c1), ("c2", c2)] {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be positive, got {c}"
            )));
        }
    }
    let log_r = if r == 1 { 1.0 } else { (r as f64).ln() };
    let r = r as f64;
    Ok(r * r * mu0 * (c1 * log_r).max(c2 * (3.0 / delta).ln()))
}

/// Number of uniformly sampled columns sufficient for the sample to reach
/// full rank with probability `1 - delta`, given the constants `c1`, `c2`.
pub fn sample_size_bound(r: usize, mu0: f64, delta: f64, c1: f64, c2: f64) -> Result<u64> {
    Ok(sample_size_requirement(r, mu0, delta, c1, c2)?.ceil() as u64)
}
