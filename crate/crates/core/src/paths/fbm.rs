//! Fractional Gaussian noise and two-sided fractional Brownian motion.

use rand::Rng;
use rand_distr::StandardNormal;

use super::circulant::{sample_stationary_sequence, SamplingMethod};
use super::{PathGrid, StreamRng};
use crate::error::{domain, Result};

/// Increments of fBm on a uniform grid.
#[derive(Debug, Clone)]
pub struct FgnSample {
    pub increments: Vec<f64>,
    pub method: SamplingMethod,
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("Hurst index must lie in (0, 1], got {h}")))
    }
}

/// Autocovariance of fGn with step `dt` at lag `k`.
pub fn fgn_autocovariance(h: f64, dt: f64, k: usize) -> f64 {
    let two_h = 2.0 * h;
    let k = k as f64;
    0.5 * dt.powf(two_h)
        * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

pub(crate) fn param_key(parts: &[f64]) -> u64 {
    parts.iter().fold(0xcbf2_9ce4_8422_2325u64, |acc, p| {
        (acc ^ p.to_bits()).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(17)
    })
}

/// `n` increments of fBm with Hurst index `h` on a grid of step `dt`.
///
/// `h = 1/2` gives independent increments and `h = 1` the random-slope line
/// `B(t) = t N`; everything else goes through circulant embedding, falling
/// back to Cholesky only if the embedding spectrum is negative.
pub fn simulate_fgn(h: f64, n: usize, dt: f64, rng: &mut StreamRng) -> Result<FgnSample> {
    check_hurst(h)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(domain(format!("step must be positive, got {dt}")));
    }
    if n == 0 {
        return Err(domain("need at least one increment"));
    }
    if h == 1.0 {
        let slope: f64 = rng.sample(StandardNormal);
        return Ok(FgnSample { increments: vec![dt * slope; n], method: SamplingMethod::Analytic });
    }
    if h == 0.5 {
        let sd = dt.sqrt();
        let increments = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        return Ok(FgnSample { increments, method: SamplingMethod::Independent });
    }
    let cov = move |k: usize| fgn_autocovariance(h, dt, k);
    let key = param_key(&[1.0, h, dt]);
    let (increments, method) = sample_stationary_sequence(n, &cov, Some(key), rng)?;
    Ok(FgnSample { increments, method })
}

/// Values of one two-sided fBm path at nodes `k * mesh`, `k = k_lo..=k_hi`,
/// pinned to zero at `k = 0` (which must lie in the range).
pub(crate) fn fbm_on_nodes(
    h: f64,
    k_lo: i64,
    k_hi: i64,
    mesh: f64,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    debug_assert!(k_lo <= 0 && 0 <= k_hi);
    let n = (k_hi - k_lo) as usize;
    if n == 0 {
        return Ok(vec![0.0]);
    }
    let incr = simulate_fgn(h, n, mesh, rng)?.increments;
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(0.0);
    for g in incr {
        acc += g;
        values.push(acc);
    }
    let shift = values[(-k_lo) as usize];
    for v in &mut values {
        *v -= shift;
    }
    Ok(values)
}

/// Node range `k_lo..=k_hi` of the uniform grid `k * mesh` covering `[a, b]`.
pub(crate) fn covering_nodes(a: f64, b: f64, mesh: f64) -> (i64, i64) {
    let eps = 1e-9;
    let lo = (a / mesh + eps).floor() as i64;
    let hi = (b / mesh - eps).ceil() as i64;
    (lo, hi.max(lo))
}

/// One correlated two-sided fBm path on the grid `k * mesh` covering
/// `[a, b]`, anchored at `B(0) = 0`.
pub fn simulate_fbm_two_sided(
    h: f64,
    a: f64,
    b: f64,
    mesh: f64,
    rng: &mut StreamRng,
) -> Result<PathGrid> {
    check_hurst(h)?;
    if !(a <= 0.0 && 0.0 <= b) {
        return Err(domain(format!("need a <= 0 <= b, got [{a}, {b}]")));
    }
    if !(mesh > 0.0) || !mesh.is_finite() {
        return Err(domain(format!("mesh must be positive, got {mesh}")));
    }
    let (k_lo, k_hi) = covering_nodes(a, b, mesh);
    let (k_lo, k_hi) = (k_lo.min(0), k_hi.max(0));
    let values = fbm_on_nodes(h, k_lo, k_hi, mesh, rng)?;
    Ok(PathGrid::uniform(k_lo, mesh, values, Some((-k_lo) as usize)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::RngStream;

    fn lag_autocov(x: &[f64], lag: usize) -> (f64, f64) {
        let n = x.len() - lag;
        let prods: Vec<f64> = (0..n).map(|i| x[i] * x[i + lag]).collect();
        let mean = prods.iter().sum::<f64>() / n as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var.sqrt())
    }

    #[test]
    fn fgn_autocovariance_values() {
        assert!((fgn_autocovariance(0.7, 1.0, 1) - 0.319_507_910_772_894_2).abs() < 1e-15);
        assert_eq!(fgn_autocovariance(0.5, 2.0, 0), 2.0);
        assert!(fgn_autocovariance(0.5, 2.0, 3).abs() < 1e-15);
        assert!((fgn_autocovariance(1.0, 0.5, 4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn brownian_increments_uncorrelated() {
        let mut rng = RngStream::new(11, 0).rng();
        let s = simulate_fgn(0.5, 1 << 14, 1.0, &mut rng).unwrap();
        assert_eq!(s.method, SamplingMethod::Independent);
        let (mean, sd) = lag_autocov(&s.increments, 1);
        // the lag-products are weakly dependent; the plain SE is close enough here
        let se = sd / ((s.increments.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "{mean} vs {se}");
    }

    #[test]
    fn hurst_one_is_a_line() {
        let mut rng = RngStream::new(5, 0).rng();
        let s = simulate_fgn(1.0, 16, 0.25, &mut rng).unwrap();
        assert!(s.increments.windows(2).all(|w| w[0] == w[1]));
        let p = simulate_fbm_two_sided(1.0, -1.0, 1.0, 0.25, &mut RngStream::new(5, 1).rng()).unwrap();
        let slope = p.values[p.len() - 1];
        for (t, v) in p.times.iter().zip(&p.values) {
            assert!((v - t * slope).abs() < 1e-12);
        }
    }

    #[test]
    fn two_sided_anchor_and_grid() {
        let mut rng = RngStream::new(3, 0).rng();
        let p = simulate_fbm_two_sided(0.7, -0.5, 1.0, 0.125, &mut rng).unwrap();
        assert_eq!(p.len(), 13);
        let anchor = p.anchor_index.unwrap();
        assert_eq!(p.times[anchor], 0.0);
        assert_eq!(p.values[anchor], 0.0);
        assert_eq!(p.times[0], -0.5);
        assert_eq!(*p.times.last().unwrap(), 1.0);
    }

    #[test]
    fn one_sided_when_left_end_is_zero() {
        let mut rng = RngStream::new(3, 0).rng();
        let p = simulate_fbm_two_sided(0.3, 0.0, 1.0, 0.25, &mut rng).unwrap();
        assert_eq!(p.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(p.anchor_index, Some(0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = RngStream::new(3, 0).rng();
        assert!(simulate_fgn(0.0, 4, 1.0, &mut rng).is_err());
        assert!(simulate_fgn(0.5, 0, 1.0, &mut rng).is_err());
        assert!(simulate_fgn(0.5, 4, 0.0, &mut rng).is_err());
        assert!(simulate_fbm_two_sided(0.5, 0.5, 1.0, 0.1, &mut rng).is_err());
    }
}
