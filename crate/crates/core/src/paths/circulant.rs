//! Exact sampling of Gaussian vectors: circulant embedding for stationary
//! (Toeplitz) covariances, Cholesky for everything else.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::StreamRng;
use crate::error::{Error, Result};

/// Eigenvalues at or above `-EIGEN_CLIP_TOL * max` are clipped to zero;
/// anything more negative sends the sampler to Cholesky.
pub const EIGEN_CLIP_TOL: f64 = 1e-8;

/// Jitter multipliers (relative to the largest diagonal entry).
const JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-12, 1e-11, 1e-10];

/// Largest Toeplitz system the Cholesky fallback will factor.
pub const MAX_CHOLESKY_DIM: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    CirculantEmbedding,
    Cholesky,
    Independent,
    Analytic,
}

const CACHE_LIMIT: usize = 256;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static SPECTRA: RefCell<HashMap<(u64, usize), Option<Arc<Vec<f64>>>>> =
        RefCell::new(HashMap::new());
}

/// Scaled square roots of the circulant eigenvalues, or `None` when the
/// embedding is not non-negative within tolerance.
fn spectrum(n: usize, autocov: &dyn Fn(usize) -> f64) -> Option<Arc<Vec<f64>>> {
    let m = (2 * (n - 1)).next_power_of_two().max(2);
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| Complex::new(autocov(j.min(m - j)), 0.0))
        .collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m).process(&mut row));
    let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
    let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min < -EIGEN_CLIP_TOL * max {
        return None;
    }
    Some(Arc::new(row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect()))
}

fn cached_spectrum(
    key: Option<u64>,
    n: usize,
    autocov: &dyn Fn(usize) -> f64,
) -> Option<Arc<Vec<f64>>> {
    let Some(key) = key else {
        return spectrum(n, autocov);
    };
    SPECTRA.with(|cache| {
        let mut cache = cache.borrow_mut();
        if let Some(hit) = cache.get(&(key, n)) {
            return hit.clone();
        }
        let s = spectrum(n, autocov);
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert((key, n), s.clone());
        s
    })
}

/// Draws `n` consecutive values of a centered stationary Gaussian sequence
/// with autocovariance `autocov(k)`.
///
/// `cache_key` identifies the covariance (not the length) so repeated calls
/// reuse the embedding spectrum; pass `None` for ad hoc covariances.
pub(crate) fn sample_stationary_sequence(
    n: usize,
    autocov: &dyn Fn(usize) -> f64,
    cache_key: Option<u64>,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, SamplingMethod)> {
    match n {
        0 => return Ok((Vec::new(), SamplingMethod::Analytic)),
        1 => {
            let z: f64 = rng.sample(StandardNormal);
            return Ok((vec![autocov(0).max(0.0).sqrt() * z], SamplingMethod::Analytic));
        }
        _ => {}
    }
    if let Some(sqrt_eig) = cached_spectrum(cache_key, n, autocov) {
        let m = sqrt_eig.len();
        let mut buf: Vec<Complex<f64>> = sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m).process(&mut buf));
        return Ok((buf[..n].iter().map(|c| c.re).collect(), SamplingMethod::CirculantEmbedding));
    }

    if n > MAX_CHOLESKY_DIM {
        return Err(Error::Unsupported(format!(
            "circulant embedding failed and {n} nodes exceed the Cholesky limit {MAX_CHOLESKY_DIM}"
        )));
    }
    let lags: Vec<f64> = (0..n).map(autocov).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| lags[i.abs_diff(j)]);
    Ok((sample_gram(cov, rng)?, SamplingMethod::Cholesky))
}

/// Draws `N(0, cov)` through a Cholesky factor, adding diagonal jitter on
/// the bounded schedule when the factorisation fails.
pub(crate) fn sample_gram(cov: DMatrix<f64>, rng: &mut StreamRng) -> Result<Vec<f64>> {
    let n = cov.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let max_diag = cov.diagonal().iter().copied().fold(0.0, f64::max);
    if max_diag <= 0.0 {
        if cov.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; n]);
        }
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eigenvalue(&cov) });
    }
    for jitter in JITTER_SCHEDULE {
        let mut a = cov.clone();
        for i in 0..n {
            a[(i, i)] += jitter * max_diag;
        }
        if let Some(chol) = a.cholesky() {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            return Ok((chol.l() * z).iter().copied().collect());
        }
    }
    Err(Error::NotPositiveDefinite { min_eigenvalue: min_eigenvalue(&cov) })
}

fn min_eigenvalue(cov: &DMatrix<f64>) -> f64 {
    cov.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::RngStream;

    #[test]
    fn exponential_covariance_uses_embedding() {
        let mut rng = RngStream::new(1, 0).rng();
        let cov = |k: usize| (-(k as f64) * 0.1).exp();
        let (v, method) = sample_stationary_sequence(100, &cov, None, &mut rng).unwrap();
        assert_eq!(v.len(), 100);
        assert_eq!(method, SamplingMethod::CirculantEmbedding);
    }

    #[test]
    fn non_psd_sequence_reports_eigenvalue() {
        // |r(1)| > r(0) cannot be a covariance
        let cov = |k: usize| match k {
            0 => 1.0,
            1 => 1.5,
            _ => 0.0,
        };
        let mut rng = RngStream::new(1, 0).rng();
        match sample_stationary_sequence(8, &cov, None, &mut rng) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => assert!(min_eigenvalue < -0.5),
            other => panic!("expected PSD failure, got {other:?}"),
        }
    }

    #[test]
    fn embedding_failure_falls_back_to_cholesky() {
        // positive definite Toeplitz matrix whose minimal embedding has a
        // negative eigenvalue (1 - 1.8 + 0.75)
        let cov = |k: usize| [1.0, 0.9, 0.75][k];
        assert!(spectrum(3, &cov).is_none());
        let mut rng = RngStream::new(2, 0).rng();
        let (v, method) = sample_stationary_sequence(3, &cov, None, &mut rng).unwrap();
        assert_eq!(method, SamplingMethod::Cholesky);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn zero_matrix_gives_zero_path() {
        let mut rng = RngStream::new(3, 0).rng();
        let v = sample_gram(DMatrix::zeros(4, 4), &mut rng).unwrap();
        assert_eq!(v, vec![0.0; 4]);
    }
}
