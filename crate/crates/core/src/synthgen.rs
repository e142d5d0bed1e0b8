//! Reproducible synthetic matrices.
//!
//! * Exactly low-rank matrices `U diag(sigma) V^T` with `sigma_i = exp(-i eta)`
//!   and one hand-built singular vector per factor that sets the coherence.
//! * Noisy versions whose trailing singular values are a fraction of `sigma_r`.
//! * The basis-aligned matrix `[e_1 .. e_r 0 .. 0]`.
//! * A random SPSD matrix with one hugely inflated diagonal entry.
//!
//! Everything is driven by a `u64` seed through [`rng_from_seed`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{extend_orthonormal, DenseMatrix};
use crate::sampling::{rng_from_seed, SeededRng};

/// Default ratio between the inflated diagonal entry and the largest
/// original diagonal entry of the worst-case matrix.
pub const DEFAULT_INFLATION: f64 = 1e3;

/// Stream used for the basis completion of noisy matrices, so adding noise
/// never perturbs the draws that built the low-rank factors.
const NOISE_STREAM: u64 = 1;

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let entries: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DenseMatrix::from_column_slice(rows, cols, &entries).expect("finite gaussian entries")
}

fn gaussian_dmatrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Singular value decay rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    Slow,
    Medium,
    Fast,
}

impl Decay {
    pub const ALL: [Decay; 3] = [Decay::Slow, Decay::Medium, Decay::Fast];

    pub fn eta(self) -> f64 {
        match self {
            Decay::Slow => 0.01,
            Decay::Medium => 0.1,
            Decay::Fast => 0.5,
        }
    }
}

/// How strongly the hand-built singular vector is peaked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceLevel {
    Low,
    Mid,
    High,
}

impl CoherenceLevel {
    pub const ALL: [CoherenceLevel; 3] = [
        CoherenceLevel::Low,
        CoherenceLevel::Mid,
        CoherenceLevel::High,
    ];

    /// Peak entry as a multiple of the flat value `1 / sqrt(n)`.
    pub fn multiplier(self) -> f64 {
        match self {
            CoherenceLevel::Low => 1.0,
            CoherenceLevel::Mid => 3.0,
            CoherenceLevel::High => 8.0,
        }
    }
}

macro_rules! name_enum {
    ($ty:ty { $($variant:ident => $name:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$variant => $name),* })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok(Self::$variant),)*
                    other => Err(Error::InvalidArgument(format!(
                        "unknown {} '{other}'", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

name_enum!(Decay { Slow => "slow", Medium => "medium", Fast => "fast" });
name_enum!(CoherenceLevel { Low => "low", Mid => "mid", High => "high" });

/// Parameters of a synthetic low-rank (optionally noisy) matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub decay: Decay,
    pub coherence: CoherenceLevel,
    /// Trailing singular values as a fraction of `sigma_r`; `None` for an
    /// exactly low-rank matrix.
    pub noise: Option<f64>,
    pub seed: u64,
}

impl SynthSpec {
    /// Desk-scale defaults: 400 x 400, rank 20, medium decay, low coherence.
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 400,
            m: 400,
            r: 20,
            decay: Decay::Medium,
            coherence: CoherenceLevel::Low,
            noise: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        if self.r == 0 || self.r > self.n.min(self.m) {
            return Err(Error::InvalidArgument(format!(
                "rank {} must lie in [1, {}]",
                self.r,
                self.n.min(self.m)
            )));
        }
        let mult = self.coherence.multiplier();
        let dim = self.n.min(self.m) as f64;
        if mult * mult > dim {
            return Err(Error::InvalidArgument(format!(
                "coherence multiplier {mult} exceeds sqrt({dim}); peak entry would exceed 1"
            )));
        }
        if let Some(f) = self.noise {
            validate_noise(f)?;
        }
        Ok(())
    }
}

fn validate_noise(f: f64) -> Result<()> {
    if !(f.is_finite() && (0.0..1.0).contains(&f)) {
        return Err(Error::InvalidArgument(format!(
            "noise fraction must lie in [0, 1), got {f}"
        )));
    }
    Ok(())
}

/// A generated low-rank matrix together with its exact factors.
#[derive(Clone, Debug)]
pub struct SyntheticMatrix {
    pub matrix: DenseMatrix,
    /// `n x r` orthonormal.
    pub u: DenseMatrix,
    /// `m x r` orthonormal.
    pub v: DenseMatrix,
    /// Non-increasing, length `r`.
    pub singular_values: Vec<f64>,
    pub spec: SynthSpec,
}

/// `exp(-i eta)` for `i = 1..=r`.
pub fn spectrum(decay: Decay, r: usize) -> Vec<f64> {
    (1..=r).map(|i| (-(i as f64) * decay.eta()).exp()).collect()
}

/// Unit vector with entry `peak` equal to `multiplier / sqrt(n)` and all
/// other entries equal.
pub fn coherence_inducing_vector(n: usize, multiplier: f64, peak: usize) -> Result<Vec<f64>> {
    let top = multiplier / (n as f64).sqrt();
    if !(top.is_finite() && top > 0.0 && top <= 1.0) || peak >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot place peak {top} at index {peak} of a unit vector in dimension {n}"
        )));
    }
    let rest = if n > 1 {
        ((1.0 - top * top).max(0.0) / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut v = vec![rest; n];
    v[peak] = top;
    Ok(v)
}

/// Position of the coherence-inducing column: the `ceil(r/2)`-th largest
/// singular value, zero-based.
pub fn inducing_position(r: usize) -> usize {
    r.div_ceil(2) - 1
}

/// `r` orthonormal columns of length `n`, one of which (at
/// [`inducing_position`]) is the coherence-inducing vector; the others come
/// from QR of a Gaussian matrix.
///
/// The peak sits on the row carrying the most weight in the random
/// completion, so raising the multiplier never lowers the basis coherence.
fn coherent_basis(
    n: usize,
    r: usize,
    multiplier: f64,
    rng: &mut SeededRng,
) -> Result<DMatrix<f64>> {
    let completion = gaussian_dmatrix(n, r - 1, rng);
    let peak = if r > 1 {
        let q0 = completion.clone().qr().q();
        let norms = DenseMatrix::from_computed(q0).row_norms_squared();
        argmax(&norms)
    } else {
        0
    };
    let u = DMatrix::from_vec(n, 1, coherence_inducing_vector(n, multiplier, peak)?);
    let q = extend_orthonormal(&u, &completion);

    let pos = inducing_position(r);
    let mut order: Vec<usize> = (1..r).collect();
    order.insert(pos, 0);
    Ok(q.select_columns(&order))
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

fn product(u: &DMatrix<f64>, sigma: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut us = u.clone();
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    us * v.transpose()
}

/// The exactly low-rank matrix described by `spec` (its `noise` is ignored).
pub fn make_low_rank(spec: &SynthSpec) -> Result<SyntheticMatrix> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mult = spec.coherence.multiplier();
    let u = coherent_basis(spec.n, spec.r, mult, &mut rng)?;
    let v = coherent_basis(spec.m, spec.r, mult, &mut rng)?;
    let singular_values = spectrum(spec.decay, spec.r);
    let matrix = DenseMatrix::new(product(&u, &singular_values, &v))?;
    Ok(SyntheticMatrix {
        matrix,
        u: DenseMatrix::from_computed(u),
        v: DenseMatrix::from_computed(v),
        singular_values,
        spec: spec.clone(),
    })
}

/// Full-rank perturbation of `base`: both factors are completed to full
/// orthogonal bases and every trailing singular value is `fraction * sigma_r`.
pub fn add_noise(base: &SyntheticMatrix, fraction: f64) -> Result<DenseMatrix> {
    validate_noise(fraction)?;
    let (n, r) = base.u.shape();
    let m = base.v.rows();
    let k = n.min(m);
    let mut rng = rng_from_seed(base.spec.seed);
    rng.set_stream(NOISE_STREAM);

    let u_full = extend_orthonormal(base.u.as_dmatrix(), &gaussian_dmatrix(n, n - r, &mut rng));
    let v_full = extend_orthonormal(base.v.as_dmatrix(), &gaussian_dmatrix(m, m - r, &mut rng));
    let floor = fraction * base.singular_values[r - 1];
    let mut sigma = base.singular_values.clone();
    sigma.resize(k, floor);
    DenseMatrix::new(product(
        &u_full.columns(0, k).into_owned(),
        &sigma,
        &v_full.columns(0, k).into_owned(),
    ))
}

/// `make_low_rank`, followed by `add_noise` when the spec asks for noise.
pub fn make_synthetic(spec: &SynthSpec) -> Result<DenseMatrix> {
    let base = make_low_rank(spec)?;
    match spec.noise {
        Some(f) => add_noise(&base, f),
        None => Ok(base.matrix),
    }
}

/// `[e_1 .. e_r 0 .. 0]`, an `n x m` rank-`r` matrix of maximal coherence.
pub fn make_pathological(n: usize, m: usize, r: usize) -> Result<DenseMatrix> {
    if r == 0 || r > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in [1, {}]",
            n.min(m)
        )));
    }
    DenseMatrix::from_fn(n, m, |i, j| if i == j && j < r { 1.0 } else { 0.0 })
}

/// Random SPSD matrix `G^T G` (`G` is `inner_dim x n` with uniform `[0, 1)`
/// entries) whose `(0, 0)` entry is then replaced by `inflation` times the
/// largest diagonal entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseSpec {
    pub n: usize,
    pub inner_dim: usize,
    pub inflation: f64,
    pub seed: u64,
}

impl WorstCaseSpec {
    pub fn new(n: usize, inner_dim: usize, seed: u64) -> Self {
        Self {
            n,
            inner_dim,
            inflation: DEFAULT_INFLATION,
            seed,
        }
    }
}

pub fn make_worstcase_spsd(spec: &WorstCaseSpec) -> Result<DenseMatrix> {
    if spec.n < 2 || spec.inner_dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "worst-case matrix needs n >= 2 and inner_dim >= 1, got n = {}, inner_dim = {}",
            spec.n, spec.inner_dim
        )));
    }
    if !(spec.inflation.is_finite() && spec.inflation >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inflation must be >= 1, got {}",
            spec.inflation
        )));
    }
    let mut rng = rng_from_seed(spec.seed);
    let g = DMatrix::from_fn(spec.inner_dim, spec.n, |_, _| rng.random::<f64>());
    let mut k = g.tr_mul(&g);
    // G^T G is symmetric in exact arithmetic; mirror to make it so bitwise.
    for j in 0..spec.n {
        for i in (j + 1)..spec.n {
            k[(j, i)] = k[(i, j)];
        }
    }
    let top = k.diagonal().max();
    k[(0, 0)] = spec.inflation * top;
    DenseMatrix::new(k)
}
