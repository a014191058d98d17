//! Leading-order fits of Weibull-class parameters to Monte Carlo tails and
//! scoring against predicted tails.
//!
//! Only `α` and `β` are fitted; `γ` and `C` always come from the
//! prediction, since four-parameter fits are not identifiable from a few
//! thresholds.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc_sup::{EstimatorKind, TailEstimate, MIN_HITS};
use crate::weibull::WeibullTail;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Final |z| below this (with a shrinking trend) is consistent.
pub const Z_CONSISTENT: f64 = 3.0;
/// Final |z| above this is inconsistent.
pub const Z_INCONSISTENT: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    fn around(center: f64, se: f64) -> Self {
        Self { lo: center - Z95 * se, hi: center + Z95 * se }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha_hat: f64,
    pub std_err: f64,
    pub ci: Interval,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta_hat: f64,
    pub std_err: f64,
    pub ci: Interval,
    /// Fitted prefactor when `C` was left free.
    pub big_c_hat: Option<f64>,
    pub n_points: usize,
}

/// A usable threshold: `(u, p_hat, std_err)`.
type Point = (f64, f64, f64);

/// Thresholds with at least `MIN_HITS` expected hits and a nonzero error.
fn usable(est: &TailEstimate) -> Result<Vec<Point>> {
    if let Some(i) = est.p_hat.iter().position(|&p| p >= 0.5) {
        return Err(Error::InsufficientData(format!(
            "p_hat = {} at u = {} is not in the tail regime (>= 0.5)",
            est.p_hat[i], est.thresholds[i]
        )));
    }
    Ok((0..est.len())
        .filter(|&i| {
            let p = est.p_hat[i];
            p > 0.0 && est.std_err[i] > 0.0 && est.thresholds[i] > 0.0 && hits(est, p) >= MIN_HITS
        })
        .map(|i| (est.thresholds[i], est.p_hat[i], est.std_err[i]))
        .collect())
}

fn hits(est: &TailEstimate, p: f64) -> f64 {
    match est.method {
        EstimatorKind::Crude => p * est.n_reps as f64,
        // splitting errors are not binomial; judge by relative error instead
        EstimatorKind::Splitting => f64::INFINITY,
    }
}

/// Weighted least squares `y = a + b x`; returns `(a, b, se_a, se_b)`.
fn wls(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    (a, b, (1.0 / sw + mx * mx / sxx).sqrt(), (1.0 / sxx).sqrt())
}

/// Slope of `log(-log p)` against `log u`.
pub fn estimate_alpha(est: &TailEstimate) -> Result<AlphaFit> {
    let pts = usable(est)?;
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 thresholds with p_hat*n >= {MIN_HITS}, have {}",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| (-p.1.ln()).ln()).collect();
    // d/dp log(-log p) = 1 / (p log p)
    let w: Vec<f64> = pts.iter().map(|&(_, p, se)| (p * p.ln() / se).powi(2)).collect();
    let (_, slope, _, se) = wls(&x, &y, &w);
    Ok(AlphaFit { alpha_hat: slope, std_err: se, ci: Interval::around(slope, se), n_points: pts.len() })
}

/// `β` from `-log p + γ log u + log C = β u^α`; through the origin when `C`
/// is given, with an intercept `log C` otherwise.
pub fn fit_beta_given_alpha(est: &TailEstimate, alpha: f64, gamma: f64, big_c: Option<f64>) -> Result<BetaFit> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(c) = big_c {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("C must be positive, got {c}")));
        }
    }
    let pts = usable(est)?;
    let need = if big_c.is_some() { 2 } else { 3 };
    if pts.len() < need {
        return Err(Error::InsufficientData(format!(
            "need at least {need} usable thresholds for the slope, have {}",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.powf(alpha)).collect();
    let w: Vec<f64> = pts.iter().map(|&(_, p, se)| (p / se).powi(2)).collect();
    let base: Vec<f64> = pts.iter().map(|&(u, p, _)| -p.ln() + gamma * u.ln()).collect();
    let fit = match big_c {
        Some(c) => {
            let z: Vec<f64> = base.iter().map(|b| b + c.ln()).collect();
            let sxx: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            let sxz: f64 = x.iter().zip(&z).zip(&w).map(|((x, z), w)| w * x * z).sum();
            let beta = sxz / sxx;
            let se = (1.0 / sxx).sqrt();
            BetaFit { beta_hat: beta, std_err: se, ci: Interval::around(beta, se), big_c_hat: None, n_points: pts.len() }
        }
        None => {
            let (a, b, _, se) = wls(&x, &base, &w);
            BetaFit { beta_hat: b, std_err: se, ci: Interval::around(b, se), big_c_hat: Some((-a).exp()), n_points: pts.len() }
        }
    };
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Consistent,
    Inconclusive,
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub u: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha_hat: Option<AlphaFit>,
    /// `β` fitted with `α`, `γ`, `C` fixed at the prediction.
    pub beta_hat: Option<BetaFit>,
    pub predicted: WeibullTail,
    pub z_scores: Vec<ZScore>,
    pub verdict: Verdict,
    /// Whether the `β` interval covers the predicted `β`; reported, not used
    /// by the verdict.
    pub beta_covered: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FitReport {
    /// One CSV row: `verdict,alpha_hat,beta_hat,beta_lo,beta_hi,final_z,n_points`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "verdict,alpha_hat,beta_hat,beta_lo,beta_hi,final_z,n_points")?;
        }
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let verdict = match self.verdict {
            Verdict::Consistent => "CONSISTENT",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Inconsistent => "INCONSISTENT",
        };
        writeln!(
            out,
            "{verdict},{},{},{},{},{},{}",
            opt(self.alpha_hat.map(|a| a.alpha_hat)),
            opt(self.beta_hat.map(|b| b.beta_hat)),
            opt(self.beta_hat.map(|b| b.ci.lo)),
            opt(self.beta_hat.map(|b| b.ci.hi)),
            opt(self.z_scores.last().map(|z| z.z)),
            self.z_scores.len()
        )
    }
}

/// Verdict from per-threshold z-scores, in ascending `u`.
pub fn verdict(z: &[f64]) -> Verdict {
    if z.len() < 3 {
        return Verdict::Inconclusive;
    }
    let last = z[z.len() - 1].abs();
    if last > Z_INCONSISTENT {
        return Verdict::Inconsistent;
    }
    let earlier = z[..z.len() - 1].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if last < Z_CONSISTENT && last <= earlier {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    }
}

/// Scores `log p_hat` against the log of the predicted tail at every usable
/// threshold.
pub fn compare_prediction(est: &TailEstimate, predicted: &WeibullTail) -> Result<FitReport> {
    predicted.validate()?;
    let mut notes = Vec::new();
    let pts = match usable(est) {
        Ok(p) => p,
        Err(e) => {
            notes.push(e.to_string());
            Vec::new()
        }
    };
    let mut z_scores = Vec::with_capacity(pts.len());
    for &(u, p, se) in &pts {
        let z = (p.ln() - predicted.log_eval(u)?) / (se / p);
        z_scores.push(ZScore { u, z });
    }
    let alpha_hat = estimate_alpha(est).map_err(|e| notes.push(format!("alpha: {e}"))).ok();
    let beta_hat = fit_beta_given_alpha(est, predicted.alpha, predicted.gamma, Some(predicted.big_c))
        .map_err(|e| notes.push(format!("beta: {e}")))
        .ok();
    let zs: Vec<f64> = z_scores.iter().map(|z| z.z).collect();
    Ok(FitReport {
        alpha_hat,
        beta_covered: beta_hat.map(|b| b.ci.contains(predicted.beta)),
        beta_hat,
        predicted: *predicted,
        verdict: verdict(&zs),
        z_scores,
        notes,
    })
}

/// Independent binomial draws of an exact Weibull tail at each threshold;
/// used as a ground-truth generator for the fitters.
pub fn synthetic_estimate(tail: &WeibullTail, thresholds: &[f64], n: u64, seed: u64) -> Result<TailEstimate> {
    tail.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p_hat = Vec::with_capacity(thresholds.len());
    let mut std_err = Vec::with_capacity(thresholds.len());
    for &u in thresholds {
        let p = tail.eval(u)?.min(1.0);
        let k = Binomial::new(n, p).map_err(|e| Error::Domain(e.to_string()))?.sample(&mut rng);
        let ph = k as f64 / n as f64;
        p_hat.push(ph);
        std_err.push((ph * (1.0 - ph) / n as f64).sqrt());
    }
    Ok(TailEstimate::from_parts(thresholds.to_vec(), p_hat, std_err, n, 0.0, EstimatorKind::Crude))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(tail: &WeibullTail, u: &[f64], n: u64) -> TailEstimate {
        let p: Vec<f64> = u.iter().map(|&u| tail.eval(u).unwrap()).collect();
        let se = p.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).collect();
        TailEstimate::from_parts(u.to_vec(), p, se, n, 0.0, EstimatorKind::Crude)
    }

    #[test]
    fn exponential_tail_alpha_is_exact() {
        let w = WeibullTail::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let est = noiseless(&w, &[1.0, 2.0, 3.0, 4.0], 1_000_000);
        let a = estimate_alpha(&est).unwrap();
        assert!((a.alpha_hat - 1.0).abs() < 1e-12);
        let b = fit_beta_given_alpha(&est, 1.0, 0.0, Some(1.0)).unwrap();
        assert!((b.beta_hat - 1.0).abs() < 1e-12);
        let b = fit_beta_given_alpha(&est, 1.0, 0.0, None).unwrap();
        assert!((b.beta_hat - 1.0).abs() < 1e-10);
        assert!((b.big_c_hat.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn preconditions() {
        let w = WeibullTail::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let est = noiseless(&w, &[1.0, 2.0, 3.0], 1_000_000);
        assert!(matches!(estimate_alpha(&est), Err(Error::InsufficientData(_))));
        let one = noiseless(&w, &[2.0], 1_000_000);
        assert!(fit_beta_given_alpha(&one, 1.0, 0.0, Some(1.0)).is_err());
        let head = noiseless(&w, &[0.5, 1.0, 2.0, 3.0], 1_000_000);
        assert!(estimate_alpha(&head).is_err());
    }

    #[test]
    fn scale_equivariance() {
        let w = WeibullTail::new(4.0 / 3.0, 0.9449, 0.0, 1.0).unwrap();
        let u = [2.0, 2.5, 3.0, 3.5, 4.0];
        let c: f64 = 1.7;
        let est = noiseless(&w, &u, 1_000_000);
        let mut scaled = est.clone();
        scaled.thresholds.iter_mut().for_each(|v| *v *= c);
        let a0 = estimate_alpha(&est).unwrap().alpha_hat;
        let a1 = estimate_alpha(&scaled).unwrap().alpha_hat;
        assert!((a0 - a1).abs() < 1e-10);
        let b0 = fit_beta_given_alpha(&est, w.alpha, 0.0, Some(1.0)).unwrap().beta_hat;
        let b1 = fit_beta_given_alpha(&scaled, w.alpha, 0.0, Some(1.0)).unwrap().beta_hat;
        assert!((b1 - b0 * c.powf(-w.alpha)).abs() < 1e-10);
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(verdict(&[1.0, 0.5]), Verdict::Inconclusive);
        assert_eq!(verdict(&[-11.0, -4.0, -0.5]), Verdict::Consistent);
        assert_eq!(verdict(&[1.0, 8.0, 20.0]), Verdict::Inconsistent);
        assert_eq!(verdict(&[0.1, 0.2, 2.5]), Verdict::Inconclusive);
        assert_eq!(verdict(&[1.0, 3.0, 4.0]), Verdict::Inconclusive);
    }

    #[test]
    fn synthetic_is_reproducible() {
        let w = WeibullTail::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let a = synthetic_estimate(&w, &[1.0, 2.0], 1000, 4).unwrap();
        assert_eq!(a, synthetic_estimate(&w, &[1.0, 2.0], 1000, 4).unwrap());
    }
}
