use std::fmt;
use std::sync::Arc;

use super::fbm::{check_hurst, covering_nodes, fbm_on_nodes, param_key};
use super::stationary::{simulate_stationary_increments_gaussian, stationary_nodes, steps_for};
use super::{PathGrid, StreamRng};
use crate::error::{domain, Result};
use crate::weibull::PowerLawVariance;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Variance function `σ²(t)` of a stationary-increments process.
#[derive(Clone)]
pub enum VarianceFn {
    PowerLaw(PowerLawVariance),
    /// Any nondecreasing variance function with `σ²(0) = 0`.
    Custom(ScalarFn),
}

impl VarianceFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            VarianceFn::PowerLaw(v) => v.eval(t),
            VarianceFn::Custom(f) => f(t.abs()),
        }
    }
}

/// Correlation function `r(t)` of a stationary process.
#[derive(Clone)]
pub enum Covariance {
    /// `r(t) = exp(-c |t|^α)`, locally `1 - c|t|^α`.
    PowerExponential { c: f64, alpha: f64 },
    /// `r ≡ 1`.
    Constant,
    Custom(ScalarFn),
}

impl Covariance {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Covariance::PowerExponential { c, alpha } => (-c * t.abs().powf(*alpha)).exp(),
            Covariance::Constant => 1.0,
            Covariance::Custom(f) => f(t),
        }
    }

    /// Local parameters `(C, α)` with `r(t) = 1 - C|t|^α + o(|t|^α)`, when known
    /// in closed form.
    pub fn local_params(&self) -> Option<(f64, f64)> {
        match self {
            Covariance::PowerExponential { c, alpha } => Some((*c, *alpha)),
            _ => None,
        }
    }

    fn cache_key(&self, mesh: f64) -> Option<u64> {
        match self {
            Covariance::PowerExponential { c, alpha } => Some(param_key(&[2.0, *c, *alpha, mesh])),
            Covariance::Constant => Some(param_key(&[3.0, mesh])),
            Covariance::Custom(_) => None,
        }
    }
}

/// External source of sample paths, e.g. for a self-similar inner process.
pub trait PathSampler: Send + Sync {
    /// Values at `times` (strictly increasing).
    fn sample(&self, times: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>>;
}

/// A process that can be simulated on a uniform grid.
#[derive(Clone)]
pub enum ProcessSpec {
    Fbm { hurst: f64 },
    StationaryIncrements { variance: VarianceFn },
    Stationary { covariance: Covariance },
    SelfSimilar { index: f64, sampler: Arc<dyn PathSampler> },
    /// Deterministic `slope * t`; slope 1 is the identity time change.
    Linear { slope: f64 },
}

impl fmt::Debug for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Fbm { hurst } => write!(f, "Fbm(H={hurst})"),
            ProcessSpec::StationaryIncrements { variance: VarianceFn::PowerLaw(v) } => {
                write!(f, "StationaryIncrements({}·t^{})", v.big_d, v.alpha_inf)
            }
            ProcessSpec::StationaryIncrements { .. } => write!(f, "StationaryIncrements(custom)"),
            ProcessSpec::Stationary { covariance: Covariance::PowerExponential { c, alpha } } => {
                write!(f, "Stationary(exp(-{c}|t|^{alpha}))")
            }
            ProcessSpec::Stationary { covariance: Covariance::Constant } => write!(f, "Stationary(1)"),
            ProcessSpec::Stationary { .. } => write!(f, "Stationary(custom)"),
            ProcessSpec::SelfSimilar { index, .. } => write!(f, "SelfSimilar({index})"),
            ProcessSpec::Linear { slope } => write!(f, "Linear({slope})"),
        }
    }
}

impl ProcessSpec {
    pub fn brownian() -> Self {
        ProcessSpec::Fbm { hurst: 0.5 }
    }

    pub fn identity() -> Self {
        ProcessSpec::Linear { slope: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Fbm { hurst } => check_hurst(*hurst),
            ProcessSpec::StationaryIncrements { .. } => Ok(()),
            ProcessSpec::Stationary { covariance } => {
                if let Covariance::PowerExponential { c, alpha } = covariance {
                    if !(*c > 0.0) || !(*alpha > 0.0 && *alpha <= 2.0) {
                        return Err(domain(format!(
                            "power-exponential correlation needs c > 0 and alpha in (0, 2], got {c}, {alpha}"
                        )));
                    }
                }
                let r0 = covariance.eval(0.0);
                if (r0 - 1.0).abs() > 1e-12 {
                    return Err(domain(format!("correlation must satisfy r(0) = 1, got {r0}")));
                }
                Ok(())
            }
            ProcessSpec::SelfSimilar { index, .. } => {
                if *index > 0.0 {
                    Ok(())
                } else {
                    Err(domain(format!("self-similarity index must be positive, got {index}")))
                }
            }
            ProcessSpec::Linear { slope } => {
                if slope.is_finite() {
                    Ok(())
                } else {
                    Err(domain("slope must be finite"))
                }
            }
        }
    }

    /// Whether the model pins `X(0) = 0`.
    pub fn is_anchored(&self) -> bool {
        !matches!(self, ProcessSpec::Stationary { .. })
    }

    /// Values at the nodes `k * mesh`, `k = k_lo..=k_hi`, of one path.
    pub fn sample_nodes(&self, k_lo: i64, k_hi: i64, mesh: f64, rng: &mut StreamRng) -> Result<Vec<f64>> {
        if k_hi < k_lo {
            return Err(domain(format!("empty node range {k_lo}..={k_hi}")));
        }
        if !(mesh > 0.0) || !mesh.is_finite() {
            return Err(domain(format!("mesh must be positive, got {mesh}")));
        }
        match self {
            ProcessSpec::Fbm { hurst } => anchored_nodes(k_lo, k_hi, |lo, hi| fbm_on_nodes(*hurst, lo, hi, mesh, rng)),
            ProcessSpec::StationaryIncrements { variance: VarianceFn::PowerLaw(v) } => {
                // D t^{2H} is fBm scaled by sqrt(D)
                let h = v.alpha_inf / 2.0;
                check_hurst(h)?;
                let scale = v.big_d.sqrt();
                let mut vals = anchored_nodes(k_lo, k_hi, |lo, hi| fbm_on_nodes(h, lo, hi, mesh, rng))?;
                vals.iter_mut().for_each(|x| *x *= scale);
                Ok(vals)
            }
            ProcessSpec::StationaryIncrements { variance } => {
                let times: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * mesh).collect();
                let var = |t: f64| variance.eval(t);
                Ok(simulate_stationary_increments_gaussian(&var, &times, rng)?.values)
            }
            ProcessSpec::Stationary { covariance } => {
                let r = |t: f64| covariance.eval(t);
                let n = (k_hi - k_lo + 1) as usize;
                Ok(stationary_nodes(&r, n, mesh, covariance.cache_key(mesh), rng)?.0)
            }
            ProcessSpec::SelfSimilar { sampler, .. } => {
                let times: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * mesh).collect();
                let vals = sampler.sample(&times, rng)?;
                if vals.len() != times.len() {
                    return Err(domain(format!(
                        "sampler returned {} values for {} times",
                        vals.len(),
                        times.len()
                    )));
                }
                Ok(vals)
            }
            ProcessSpec::Linear { slope } => Ok((k_lo..=k_hi).map(|k| slope * k as f64 * mesh).collect()),
        }
    }

    /// One path on the uniform grid `k * mesh` covering `[a, b]`.
    pub fn sample_interval(&self, a: f64, b: f64, mesh: f64, rng: &mut StreamRng) -> Result<PathGrid> {
        if !(a <= b) {
            return Err(domain(format!("empty interval [{a}, {b}]")));
        }
        let (k_lo, k_hi) = covering_nodes(a, b, mesh);
        let values = self.sample_nodes(k_lo, k_hi, mesh, rng)?;
        let anchor = (self.is_anchored() && k_lo <= 0 && k_hi >= 0).then_some((-k_lo) as usize);
        Ok(PathGrid::uniform(k_lo, mesh, values, anchor))
    }

    /// One path on `[0, horizon]` with the largest step `horizon / n <= mesh`.
    pub fn sample_path(&self, horizon: f64, mesh: f64, rng: &mut StreamRng) -> Result<PathGrid> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(domain(format!("horizon must be positive, got {horizon}")));
        }
        if !(mesh > 0.0) || !mesh.is_finite() {
            return Err(domain(format!("mesh must be positive, got {mesh}")));
        }
        let n = steps_for(horizon, mesh).max(1);
        let step = horizon / n as f64;
        let values = self.sample_nodes(0, n as i64, step, rng)?;
        let mut grid = PathGrid::uniform(0, step, values, self.is_anchored().then_some(0));
        grid.times[n] = horizon;
        Ok(grid)
    }
}

/// Runs an anchored sampler on a node range extended to contain 0, then
/// keeps the requested part.
fn anchored_nodes(
    k_lo: i64,
    k_hi: i64,
    mut sample: impl FnMut(i64, i64) -> Result<Vec<f64>>,
) -> Result<Vec<f64>> {
    let (lo, hi) = (k_lo.min(0), k_hi.max(0));
    let all = sample(lo, hi)?;
    let start = (k_lo - lo) as usize;
    Ok(all[start..start + (k_hi - k_lo + 1) as usize].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::RngStream;

    struct Ramp;

    impl PathSampler for Ramp {
        fn sample(&self, times: &[f64], _rng: &mut StreamRng) -> Result<Vec<f64>> {
            Ok(times.iter().map(|t| 2.0 * t).collect())
        }
    }

    #[test]
    fn linear_and_custom_sampler() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = ProcessSpec::identity().sample_path(1.0, 0.25, &mut rng).unwrap();
        assert_eq!(p.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let s = ProcessSpec::SelfSimilar { index: 1.0, sampler: Arc::new(Ramp) };
        let p = s.sample_path(1.0, 0.5, &mut rng).unwrap();
        assert_eq!(p.values, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn interval_away_from_origin_keeps_anchor_law() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = ProcessSpec::brownian().sample_interval(0.5, 1.0, 0.25, &mut rng).unwrap();
        assert_eq!(p.times, vec![0.5, 0.75, 1.0]);
        assert_eq!(p.anchor_index, None);
    }

    #[test]
    fn power_law_variance_matches_scaled_fbm() {
        let spec = ProcessSpec::StationaryIncrements {
            variance: VarianceFn::PowerLaw(PowerLawVariance::new(4.0, 1.0).unwrap()),
        };
        let a = spec.sample_nodes(-3, 5, 0.1, &mut RngStream::new(2, 7).rng()).unwrap();
        let b = ProcessSpec::brownian().sample_nodes(-3, 5, 0.1, &mut RngStream::new(2, 7).rng()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
        assert_eq!(a[3], 0.0);
    }

    #[test]
    fn sample_path_ends_exactly_at_horizon() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = ProcessSpec::brownian().sample_path(0.3, 0.1, &mut rng).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(*p.times.last().unwrap(), 0.3);
    }

    #[test]
    fn validation() {
        assert!(ProcessSpec::Fbm { hurst: 1.2 }.validate().is_err());
        let bad = ProcessSpec::Stationary { covariance: Covariance::Custom(Arc::new(|_| 0.5)) };
        assert!(bad.validate().is_err());
        let ok = ProcessSpec::Stationary { covariance: Covariance::PowerExponential { c: 0.5, alpha: 2.0 } };
        assert!(ok.validate().is_ok());
        assert_eq!(
            Covariance::PowerExponential { c: 0.5, alpha: 2.0 }.local_params(),
            Some((0.5, 2.0))
        );
    }
}
