//! Channel estimators: impulse pilots with LS, OMP and 3D structured OMP.

pub mod impulse;
pub mod ls;
pub mod metrics;
pub mod omp;
pub mod somp;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use impulse::{impulse_ls, impulse_mimo_layout, ImpulseLayout};
pub use ls::{solve_ls, LsSolution};
pub use metrics::{nmse_dd, nmse_dda, nmse_per_antenna};
pub use omp::omp;
pub use somp::{build_lifting_matrix, burst_start, lifting_index, somp3d, SompParams, TruncDims};

/// Output of a greedy sparse estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// Vectorized truncated channel estimate, zero off `support`.
    pub h_hat: Vec<Complex64>,
    /// Sorted, duplicate-free column indices of `Ψ`.
    pub support: Vec<usize>,
    /// `‖y - Ψ ĥ‖` after every iteration.
    pub residual_norms: Vec<f64>,
    /// Conditions met during the run, e.g. `regularized` or `support_overflow`.
    pub flags: Vec<String>,
}

impl EstimateRecord {
    pub(crate) fn flag(&mut self, f: &str) {
        if !self.flags.iter().any(|x| x == f) {
            self.flags.push(f.to_string());
        }
    }
}
