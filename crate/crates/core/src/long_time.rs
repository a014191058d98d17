//! Long-timescale horizons `h(u)` and the limits of
//! `P(sup_{[0,h(u)]} X(Y(t)) > u)` as `u → ∞`.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mc_sup::{estimate_tail, sample_range, Mesh, TailRequest};
use crate::paths::{ProcessSpec, RngStream, ScalarFn};
use crate::weibull::stationary_sup_asymptotic;

/// Relative tolerance of [`generalized_inverse`].
pub const INVERSE_TOL: f64 = 1e-12;

/// Thresholds below this are reported but flagged as pre-asymptotic.
pub const PRE_ASYMPTOTIC_U: f64 = 1.0;

/// Gauss–Hermite nodes used for the deterministic-span functional.
pub const HERMITE_NODES: usize = 64;

/// `inf{y >= 0 : f(y) > t}` for nondecreasing `f`, by bracket doubling and
/// bisection.
pub fn generalized_inverse(f: &dyn Fn(f64) -> f64, t: f64) -> Result<f64> {
    if t.is_nan() {
        return Err(domain("level is NaN"));
    }
    if f(0.0) > t {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) <= t {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::Bracket { level: t, reached: lo });
        }
    }
    // invariant: f(lo) <= t < f(hi)
    while hi - lo > INVERSE_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > t {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Standard deviation function `σ(t)` of a stationary-increments process.
#[derive(Clone)]
pub enum Scale {
    /// `σ(t) = √d t^h`.
    Power { d: f64, h: f64 },
    Custom(ScalarFn),
}

impl std::fmt::Debug for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scale::Power { d, h } => write!(f, "Power(d={d}, h={h})"),
            Scale::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Scale {
    pub fn brownian() -> Self {
        Scale::Power { d: 1.0, h: 0.5 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Scale::Power { d, h } => d.sqrt() * t.max(0.0).powf(*h),
            Scale::Custom(f) => f(t),
        }
    }

    /// Generalized inverse; closed form for powers.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        match self {
            Scale::Power { d, h } => {
                if !(*d > 0.0 && *h > 0.0) {
                    return Err(domain(format!("power scale needs d > 0 and h > 0, got {d}, {h}")));
                }
                Ok(if x <= 0.0 { 0.0 } else { (x / d.sqrt()).powf(1.0 / h) })
            }
            Scale::Custom(f) => generalized_inverse(f.as_ref(), x),
        }
    }
}

/// Which horizon function to use.
#[derive(Debug, Clone)]
pub enum HorizonSpec {
    /// Both processes have stationary increments.
    StatInc { sigma_x: Scale, sigma_y: Scale },
    /// Stationary `X` with `r(t) = 1 - C|t|^α + o(|t|^α)`, Gaussian `Y`.
    StationaryGaussY { big_c: f64, alpha: f64, pickands: f64, sigma_y: Scale },
    /// Stationary `X`, self-similar `Y` with index `λ_Y`.
    StationarySsY { big_c: f64, alpha: f64, pickands: f64, lambda_y: f64 },
}

pub fn horizon(spec: &HorizonSpec, u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(domain(format!("threshold must be positive, got {u}")));
    }
    match spec {
        HorizonSpec::StatInc { sigma_x, sigma_y } => sigma_y.inverse(sigma_x.inverse(u)?),
        HorizonSpec::StationaryGaussY { big_c, alpha, pickands, sigma_y } => {
            let rate = stationary_sup_asymptotic(1.0, *big_c, *alpha, *pickands, u)?;
            sigma_y.inverse(1.0 / rate)
        }
        HorizonSpec::StationarySsY { big_c, alpha, pickands, lambda_y } => {
            if !(*lambda_y > 0.0) {
                return Err(domain(format!("self-similarity index must be positive, got {lambda_y}")));
            }
            let rate = stationary_sup_asymptotic(1.0, *big_c, *alpha, *pickands, u)?;
            Ok(rate.powf(-1.0 / lambda_y))
        }
    }
}

/// Replication settings shared by the limit estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_reps: u64,
    pub mesh: Mesh,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub std_err: f64,
    /// Zero for quadrature values.
    pub n_reps: u64,
}

/// `P(sup over [inf B_{α_Y/2}, sup B_{α_Y/2}] on [0,1] of B_{α_X/2} > threshold)`;
/// the limit `L(α_X, α_Y)` is the value at threshold 1.
pub fn limit_l(alpha_x: f64, alpha_y: f64, threshold: f64, mc: &McConfig) -> Result<LimitEstimate> {
    for a in [alpha_x, alpha_y] {
        if !(a > 0.0 && a <= 2.0) {
            return Err(domain(format!("alpha must lie in (0, 2], got {a}")));
        }
    }
    let x = ProcessSpec::Fbm { hurst: alpha_x / 2.0 };
    let y = ProcessSpec::Fbm { hurst: alpha_y / 2.0 };
    let est = estimate_tail(&x, &y, &TailRequest::new(1.0, vec![threshold], mc.n_reps, mc.mesh, mc.seed))?;
    Ok(LimitEstimate { value: est.p_hat[0], std_err: est.std_err[0], n_reps: est.n_reps })
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for `E g(N)`,
/// `N` standard normal (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(x, w)| (x, w / total)).unzip()
}

/// Law of the span `T` in the strong-dependence functional.
#[derive(Debug, Clone, PartialEq)]
pub enum SpanLaw {
    Deterministic(f64),
    /// Range of fBm with this Hurst index over `[0, horizon]`, simulated on
    /// the `y` mesh of the configuration.
    FbmRange { hurst: f64, horizon: f64 },
    /// Pre-drawn span samples.
    Samples(Vec<f64>),
}

fn strong_integrand(r: f64, span: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    if r == 0.0 {
        return -(-span).exp_m1();
    }
    let s = (2.0 * r).sqrt();
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * -(-span * (-r + s * x).exp()).exp_m1())
        .sum()
}

fn span_samples(span: &SpanLaw, mc: &McConfig) -> Result<Vec<f64>> {
    match span {
        SpanLaw::Deterministic(_) => unreachable!(),
        SpanLaw::Samples(v) => {
            if v.len() < 2 || v.iter().any(|t| !(*t >= 0.0)) {
                return Err(domain("need at least two nonnegative span samples"));
            }
            Ok(v.clone())
        }
        SpanLaw::FbmRange { hurst, horizon } => {
            let y = ProcessSpec::Fbm { hurst: *hurst };
            (0..mc.n_reps)
                .into_par_iter()
                .map(|i| Ok(sample_range(&y, *horizon, mc.mesh.y, &mut RngStream::new(mc.seed, i).rng())?.span()))
                .collect()
        }
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `1 - E exp(-T exp(-r + √(2r) N))`. The normal factor is integrated by
/// Gauss–Hermite quadrature; a random span is averaged by Monte Carlo.
pub fn limit_strong_dependence(r: f64, span: &SpanLaw, mc: &McConfig) -> Result<LimitEstimate> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(domain(format!("r must be finite and >= 0, got {r}")));
    }
    let (nodes, weights) = gauss_hermite(HERMITE_NODES);
    if let SpanLaw::Deterministic(t) = span {
        if !(*t >= 0.0) {
            return Err(domain(format!("span must be >= 0, got {t}")));
        }
        return Ok(LimitEstimate { value: strong_integrand(r, *t, &nodes, &weights), std_err: 0.0, n_reps: 0 });
    }
    let values: Vec<f64> = span_samples(span, mc)?
        .iter()
        .map(|&t| strong_integrand(r, t, &nodes, &weights))
        .collect();
    let (value, std_err) = mean_se(&values);
    Ok(LimitEstimate { value, std_err, n_reps: values.len() as u64 })
}

/// Plain Monte Carlo over `(T, N)` jointly; a cross-check of the
/// quadrature path.
pub fn limit_strong_dependence_mc(r: f64, span: &SpanLaw, mc: &McConfig) -> Result<LimitEstimate> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(domain(format!("r must be finite and >= 0, got {r}")));
    }
    let spans = match span {
        SpanLaw::Deterministic(t) => vec![*t; mc.n_reps as usize],
        other => span_samples(other, mc)?,
    };
    let s = (2.0 * r).sqrt();
    let values: Vec<f64> = spans
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let n: f64 = RngStream::new(mc.seed, i as u64).child(1).rng().sample(StandardNormal);
            -(-t * (-r + s * n).exp()).exp_m1()
        })
        .collect();
    let (value, std_err) = mean_se(&values);
    Ok(LimitEstimate { value, std_err, n_reps: values.len() as u64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n_reps: u64,
    /// Step of the outer grid.
    pub mesh_x: f64,
    /// Steps of the inner grid on `[0, h(u)]`.
    pub y_steps: usize,
    pub seed: u64,
    /// A threshold whose `h(u) / mesh_x` exceeds this is skipped.
    pub node_budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    Estimated,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub u: f64,
    pub horizon: f64,
    pub p_hat: Option<f64>,
    pub std_err: Option<f64>,
    pub status: RowStatus,
    pub pre_asymptotic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub predicted: LimitEstimate,
    pub rows: Vec<LimitRow>,
    /// Last estimated point within 3 combined standard errors of the limit.
    pub final_within_3se: bool,
    /// Distance to the limit shrinks at every estimated step.
    pub monotone_approach: bool,
    pub agreement: bool,
}

impl LimitReport {
    /// CSV with header `u,p_hat,std_err,predicted`; skipped rows leave the
    /// estimate columns empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,p_hat,std_err,predicted")?;
        for row in &self.rows {
            let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", row.u, f(row.p_hat), f(row.std_err), self.predicted.value)?;
        }
        Ok(())
    }
}

/// Estimates `P(sup_{[0,h(u)]} X(Y(s)) > u)` along `u_grid` and compares the
/// sequence with the predicted limit.
pub fn verify_long_limit(
    x: &ProcessSpec,
    y: &ProcessSpec,
    spec: &HorizonSpec,
    u_grid: &[f64],
    cfg: &VerifyConfig,
    predicted: LimitEstimate,
) -> Result<LimitReport> {
    if cfg.y_steps == 0 || !(cfg.mesh_x > 0.0) {
        return Err(Error::Config("need y_steps >= 1 and a positive outer mesh".into()));
    }
    let mut rows = Vec::with_capacity(u_grid.len());
    for (i, &u) in u_grid.iter().enumerate() {
        let h = horizon(spec, u)?;
        let pre_asymptotic = u < PRE_ASYMPTOTIC_U;
        if h / cfg.mesh_x > cfg.node_budget as f64 {
            log::warn!("u={u}: h(u)={h:.3e} exceeds the node budget, skipped");
            rows.push(LimitRow { u, horizon: h, p_hat: None, std_err: None, status: RowStatus::Skipped, pre_asymptotic });
            continue;
        }
        let mesh = Mesh { x: cfg.mesh_x, y: h / cfg.y_steps as f64 };
        let seed = RngStream::new(cfg.seed, i as u64).child(0).seed;
        let est = estimate_tail(x, y, &TailRequest::new(h, vec![u], cfg.n_reps, mesh, seed))?;
        rows.push(LimitRow {
            u,
            horizon: h,
            p_hat: Some(est.p_hat[0]),
            std_err: Some(est.std_err[0]),
            status: RowStatus::Estimated,
            pre_asymptotic,
        });
    }
    let done: Vec<(f64, f64)> = rows.iter().filter_map(|r| Some((r.p_hat?, r.std_err?))).collect();
    let final_within_3se = done.last().is_some_and(|&(p, se)| {
        (p - predicted.value).abs() <= 3.0 * (se * se + predicted.std_err * predicted.std_err).sqrt()
    });
    let gaps: Vec<f64> = done.iter().map(|(p, _)| (p - predicted.value).abs()).collect();
    let monotone_approach = gaps.len() >= 2 && gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(LimitReport {
        predicted,
        rows,
        final_within_3se,
        monotone_approach,
        agreement: final_within_3se || monotone_approach,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn inverse_examples() {
        assert!((generalized_inverse(&|y| y * y, 4.0).unwrap() - 2.0).abs() < 1e-11);
        assert!((generalized_inverse(&|y: f64| y.sqrt(), 3.0).unwrap() - 9.0).abs() < 1e-10);
        let flat = |y: f64| if y < 2.0 { y.min(1.0) } else { y - 1.0 };
        assert!((generalized_inverse(&flat, 1.0).unwrap() - 2.0).abs() < 1e-11);
        assert_eq!(generalized_inverse(&|y| y + 1.0, 0.5).unwrap(), 0.0);
        assert!(matches!(generalized_inverse(&|y: f64| y.min(1.0), 2.0), Err(Error::Bracket { .. })));
    }

    #[test]
    fn brownian_pair_horizon_is_u_to_the_four() {
        let spec = HorizonSpec::StatInc { sigma_x: Scale::brownian(), sigma_y: Scale::brownian() };
        for u in [0.5, 1.0, 2.0, 3.0] {
            assert!((horizon(&spec, u).unwrap() - u.powi(4)).abs() < 1e-12 * u.powi(4));
        }
    }

    #[test]
    fn stationary_horizon_example() {
        let pickands = 1.0 / std::f64::consts::PI.sqrt();
        let spec = HorizonSpec::StationaryGaussY { big_c: 1.0, alpha: 2.0, pickands, sigma_y: Scale::brownian() };
        let h = horizon(&spec, 3.0).unwrap();
        assert!((h - 191_560.267_6).abs() < 1e-3, "{h}");
        let ss = HorizonSpec::StationarySsY { big_c: 1.0, alpha: 2.0, pickands, lambda_y: 1.0 };
        assert!((horizon(&ss, 3.0).unwrap() - h.sqrt()).abs() < 1e-9 * h.sqrt());
    }

    #[test]
    fn power_inverse_matches_bisection() {
        let closed = Scale::Power { d: 2.0, h: 0.35 };
        let custom = Scale::Custom(Arc::new(|t: f64| 2f64.sqrt() * t.powf(0.35)));
        for x in [0.3, 1.0, 4.0] {
            let a = closed.inverse(x).unwrap();
            let b = custom.inverse(x).unwrap();
            assert!((a - b).abs() < 1e-9 * a);
        }
    }

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(HERMITE_NODES);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
    }

    #[test]
    fn strong_dependence_deterministic() {
        let mc = McConfig { n_reps: 0, mesh: Mesh::uniform(0.1), seed: 0 };
        let v = limit_strong_dependence(0.0, &SpanLaw::Deterministic(1.0), &mc).unwrap();
        assert!((v.value - 0.632_120_558_828_557_7).abs() < 1e-15);
        let v = limit_strong_dependence(0.5, &SpanLaw::Deterministic(1.0), &mc).unwrap();
        assert!((v.value - 0.487_571_354_375_912_88).abs() < 1e-12, "{}", v.value);
    }
}
