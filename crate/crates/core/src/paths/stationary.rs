//! Stationary Gaussian paths from a correlation function, and
//! stationary-increments paths from a variance function.

use nalgebra::DMatrix;

use super::circulant::{sample_gram, sample_stationary_sequence, SamplingMethod};
use super::{PathGrid, StreamRng};
use crate::error::{domain, Result};

/// Number of steps of the uniform grid `0, δ, ..., nδ` with `nδ ≥ horizon`.
pub(crate) fn steps_for(horizon: f64, mesh: f64) -> usize {
    ((horizon / mesh) - 1e-9).ceil().max(0.0) as usize
}

pub(crate) fn stationary_nodes(
    r: &dyn Fn(f64) -> f64,
    n: usize,
    mesh: f64,
    cache_key: Option<u64>,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, SamplingMethod)> {
    let r0 = r(0.0);
    if (r0 - 1.0).abs() > 1e-12 {
        return Err(domain(format!("correlation must satisfy r(0) = 1, got {r0}")));
    }
    let cov = |k: usize| r(k as f64 * mesh);
    sample_stationary_sequence(n, &cov, cache_key, rng)
}

/// Centered stationary Gaussian path with correlation `r` on the grid
/// `0, mesh, ...` covering `[0, horizon]`.
pub fn simulate_stationary_gaussian(
    r: &dyn Fn(f64) -> f64,
    horizon: f64,
    mesh: f64,
    rng: &mut StreamRng,
) -> Result<PathGrid> {
    if !(horizon > 0.0) || !(mesh > 0.0) || !horizon.is_finite() || !mesh.is_finite() {
        return Err(domain(format!("need positive horizon and mesh, got {horizon}, {mesh}")));
    }
    let n = steps_for(horizon, mesh);
    let (values, _) = stationary_nodes(r, n + 1, mesh, None, rng)?;
    Ok(PathGrid::uniform(0, mesh, values, None))
}

/// Gaussian path with stationary increments, variance `sigma2` and
/// `X(0) = 0`, drawn jointly at `times` by Cholesky.
pub fn simulate_stationary_increments_gaussian(
    sigma2: &dyn Fn(f64) -> f64,
    times: &[f64],
    rng: &mut StreamRng,
) -> Result<PathGrid> {
    if times.is_empty() {
        return Err(domain("grid must contain at least one time"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("grid times must be strictly increasing"));
    }
    let anchor = times.iter().position(|&t| t == 0.0);
    let free: Vec<f64> = times.iter().copied().filter(|&t| t != 0.0).collect();
    let var: Vec<f64> = free.iter().map(|t| sigma2(t.abs())).collect();
    let gram = DMatrix::from_fn(free.len(), free.len(), |i, j| {
        0.5 * (var[i] + var[j] - sigma2((free[i] - free[j]).abs()))
    });
    let mut draws = sample_gram(gram, rng)?.into_iter();
    let values = times
        .iter()
        .map(|&t| if t == 0.0 { 0.0 } else { draws.next().unwrap_or(0.0) })
        .collect();
    PathGrid::new(times.to_vec(), values, anchor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::RngStream;

    #[test]
    fn constant_correlation_gives_constant_path() {
        let mut rng = RngStream::new(4, 0).rng();
        let p = simulate_stationary_gaussian(&|_| 1.0, 2.0, 0.25, &mut rng).unwrap();
        assert_eq!(p.len(), 9);
        assert!(p.values.iter().all(|v| (v - p.values[0]).abs() < 1e-12));
    }

    #[test]
    fn rejects_unnormalised_correlation() {
        let mut rng = RngStream::new(4, 0).rng();
        assert!(simulate_stationary_gaussian(&|t: f64| 2.0 * (-t).exp(), 1.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn single_zero_node_is_anchored() {
        let mut rng = RngStream::new(4, 0).rng();
        let p = simulate_stationary_increments_gaussian(&|t| t, &[0.0], &mut rng).unwrap();
        assert_eq!(p.values, vec![0.0]);
        assert_eq!(p.anchor_index, Some(0));
    }

    #[test]
    fn zero_variance_stub() {
        let mut rng = RngStream::new(4, 0).rng();
        let p = simulate_stationary_increments_gaussian(&|_| 0.0, &[0.0, 0.5, 1.0], &mut rng).unwrap();
        assert_eq!(p.values, vec![0.0; 3]);
    }

    #[test]
    fn brownian_variance_at_one() {
        let n = 20_000;
        let mut acc = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = RngStream::new(9, i as u64).rng();
            let p = simulate_stationary_increments_gaussian(&|t| t, &[0.0, 0.5, 1.0], &mut rng).unwrap();
            acc.push(p.values[2] * p.values[2]);
        }
        let mean = acc.iter().sum::<f64>() / n as f64;
        // Var of a chi-square(1) sample mean is 2/n
        assert!((mean - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{mean}");
    }
}
