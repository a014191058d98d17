//! Exact grid simulation of the Gaussian ingredients.

mod circulant;
mod fbm;
mod grid;
mod process;
mod rng;
mod stationary;

pub use circulant::{SamplingMethod, EIGEN_CLIP_TOL, MAX_CHOLESKY_DIM};
pub use fbm::{fgn_autocovariance, simulate_fbm_two_sided, simulate_fgn, FgnSample};
pub use grid::PathGrid;
pub use process::{Covariance, PathSampler, ProcessSpec, ScalarFn, VarianceFn};
pub use rng::{RngStream, StreamRng};
pub use stationary::{simulate_stationary_gaussian, simulate_stationary_increments_gaussian};
