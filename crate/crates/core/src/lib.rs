//! Sampling-based estimation of matrix coherence and the low-rank
//! approximations whose accuracy it predicts.
//!
//! * [`matrix`]: dense storage, thin SVD, pseudoinverse, projectors, numerical rank.
//! * [`coherence`]: the gamma statistic and the mu, mu0, mu1 coherences, the
//!   column-sample coherence estimator and the one-column projector update.
//! * [`sampling`]: seeded uniform and exclusion column samplers.
//! * [`lowrank`]: column-sampling projection and Nystrom reconstruction.
//! * [`synthgen`]: reproducible synthetic matrix families.
//! * [`kernels`] and [`io`]: point datasets, kernel Gram matrices, file formats.
//! * [`experiment`]: config-driven trial runner and CSV aggregation.

pub mod coherence;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kernels;
pub mod lowrank;
pub mod matrix;
pub mod sampling;
pub mod synthgen;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, ThinSvd};

#[cfg(test)]
pub(crate) mod test_util {
    use crate::matrix::DenseMatrix;
    use crate::synthgen::gaussian_matrix;

    pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        gaussian_matrix(rows, cols, &mut crate::sampling::rng_from_seed(seed))
    }
}
