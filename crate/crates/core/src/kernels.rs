//! Point datasets, SPSD kernel matrices and the spectral-energy rank rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{singular_values, DenseMatrix};
use crate::sampling::shuffled_prefix;

/// Points used when estimating the default RBF width.
pub const WIDTH_SUBSAMPLE: usize = 1000;
pub const DEFAULT_POLY_DEGREE: u32 = 2;
pub const DEFAULT_POLY_OFFSET: f64 = 1.0;

/// `n` points (rows) with `d` features (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct PointDataset {
    pub points: DenseMatrix,
    pub name: String,
}

impl PointDataset {
    pub fn new(points: DenseMatrix, name: impl Into<String>) -> Self {
        Self {
            points,
            name: name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|k| self.points[(i, k)]).collect()
    }

    /// Centres every feature and scales it to unit (population) standard
    /// deviation; constant features become zero.
    pub fn standardize(&self) -> Self {
        let (n, d) = self.points.shape();
        let mut cols = Vec::with_capacity(d);
        for k in 0..d {
            let col = self.points.column(k);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            cols.push(
                col.iter()
                    .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
                    .collect(),
            );
        }
        let points = DenseMatrix::from_columns(&cols).expect("standardized features are finite");
        Self::new(points, self.name.clone())
    }

    /// The dataset with its points reordered: row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let cols: Vec<usize> = (0..self.dim()).collect();
        Ok(Self::new(
            self.points.select_block(order, &cols)?,
            self.name.clone(),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { width: f64 },
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    /// RBF kernel with the median-distance width of `data`.
    pub fn rbf_default(data: &PointDataset) -> Result<Self> {
        Ok(KernelSpec::Rbf {
            width: median_pairwise_distance(data, 0)?,
        })
    }

    pub fn polynomial_default() -> Self {
        KernelSpec::Polynomial {
            degree: DEFAULT_POLY_DEGREE,
            offset: DEFAULT_POLY_OFFSET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { width } if width.is_finite() && width > 0.0 => Ok(()),
            KernelSpec::Rbf { width } => Err(Error::InvalidArgument(format!(
                "RBF width must be positive and finite, got {width}"
            ))),
            KernelSpec::Polynomial { degree, offset } if degree >= 1 && offset.is_finite() => {
                Ok(())
            }
            KernelSpec::Polynomial { degree, offset } => Err(Error::InvalidArgument(format!(
                "polynomial kernel needs degree >= 1 and finite offset, got {degree}, {offset}"
            ))),
        }
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { width } => (-squared_distance(x, y) / (2.0 * width * width)).exp(),
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { width } => write!(f, "rbf(width={width})"),
            KernelSpec::Polynomial { degree, offset } => {
                write!(f, "polynomial(degree={degree}, offset={offset})")
            }
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `K_ij = k(x_i, x_j)`. Each entry is evaluated once and mirrored, so the
/// result is exactly symmetric.
pub fn build_kernel(data: &PointDataset, spec: &KernelSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = data.len();
    let points: Vec<Vec<f64>> = (0..n).map(|i| data.point(i)).collect();
    let mut entries = vec![0.0; n * n];
    for j in 0..n {
        for i in j..n {
            let v = spec.eval(&points[i], &points[j]);
            entries[i + j * n] = v;
            entries[j + i * n] = v;
        }
    }
    DenseMatrix::from_column_slice(n, n, &entries)
}

/// Median Euclidean distance over distinct pairs of at most
/// [`WIDTH_SUBSAMPLE`] points, drawn with `seed` when the dataset is larger.
pub fn median_pairwise_distance(data: &PointDataset, seed: u64) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "median distance needs at least two points".into(),
        ));
    }
    let chosen = if n > WIDTH_SUBSAMPLE {
        shuffled_prefix((0..n).collect(), WIDTH_SUBSAMPLE, seed)
    } else {
        (0..n).collect()
    };
    let points: Vec<Vec<f64>> = chosen.iter().map(|&i| data.point(i)).collect();
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (a, x) in points.iter().enumerate() {
        for y in &points[a + 1..] {
            dists.push(squared_distance(x, y).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if median <= 0.0 {
        return Err(Error::InvalidArgument(
            "median pairwise distance is zero; choose an explicit width".into(),
        ));
    }
    Ok(median)
}

/// Smallest `r` whose leading squared singular values hold `fraction` of
/// the total; 0 for the zero matrix.
pub fn energy_rank(k: &DenseMatrix, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let energy: Vec<f64> = singular_values(k)?.iter().map(|s| s * s).collect();
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return Ok(0);
    }
    // relative slack so equal energies hit exact fractions like 0.99 n
    let target = fraction * total * (1.0 - 1e-12);
    let mut cumulative = 0.0;
    for (i, e) in energy.iter().enumerate() {
        cumulative += e;
        if cumulative >= target {
            return Ok(i + 1);
        }
    }
    Ok(energy.len())
}
