//! Closed-form tail asymptotics in the Weibullian class
//! `P(T > u) = C u^γ exp(-β u^α) (1 + o(1))`.
//!
//! Everything here is a pure function of its arguments. Results that depend
//! on a Monte Carlo estimate of a Pickands constant carry that fact in their
//! [`Provenance`].

mod combine;
mod fbm;

pub use combine::{combine_extremes, CaseSelector, Combination, DEFAULT_CASE_TOLERANCE};
pub use fbm::{fbm_randomized_sup, fbm_sup_unit_interval, iterated_fbm_sup};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// `P(N > u)` for a standard normal `N`.
pub fn normal_upper_tail(u: f64) -> f64 {
    0.5 * libm::erfc(u / std::f64::consts::SQRT_2)
}

/// The four parameters of an asymptotically Weibullian tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullTail {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
}

impl WeibullTail {
    pub fn new(alpha: f64, beta: f64, gamma: f64, big_c: f64) -> Result<Self> {
        let tail = Self { alpha, beta, gamma, big_c };
        tail.validate()?;
        Ok(tail)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.gamma, self.big_c]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(domain(format!("non-finite Weibull parameters {self:?}")));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 || self.big_c <= 0.0 {
            return Err(domain(format!(
                "Weibull tail needs alpha, beta, C > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Leading-order tail `C u^γ exp(-β u^α)`.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(domain(format!("tail evaluated at u = {u}, need u > 0")));
        }
        Ok(self.big_c * u.powf(self.gamma) * (-self.beta * u.powf(self.alpha)).exp())
    }

    /// Log of [`Self::eval`], finite far beyond where `eval` underflows.
    pub fn log_eval(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(domain(format!("tail evaluated at u = {u}, need u > 0")));
        }
        Ok(self.big_c.ln() + self.gamma * u.ln() - self.beta * u.powf(self.alpha))
    }

    /// Threshold beyond which `eval` is strictly decreasing.
    pub fn monotone_threshold(&self) -> f64 {
        if self.gamma <= 0.0 {
            0.0
        } else {
            (self.gamma / (self.alpha * self.beta)).powf(1.0 / self.alpha)
        }
    }

    /// Parameters of the tail of `scale * T` when `T` has this tail.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(domain(format!("rescaling factor must be positive, got {scale}")));
        }
        Ok(Self {
            alpha: self.alpha,
            beta: self.beta * scale.powf(-self.alpha),
            gamma: self.gamma,
            big_c: self.big_c * scale.powf(-self.gamma),
        })
    }

    /// Exact parameter equality up to a relative tolerance on every field.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        rel_eq(self.alpha, other.alpha, rel_tol)
            && rel_eq(self.beta, other.beta, rel_tol)
            && rel_eq(self.gamma, other.gamma, rel_tol)
            && rel_eq(self.big_c, other.big_c, rel_tol)
    }
}

pub(crate) fn rel_eq(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs())
}

/// Whether modelling assumptions are enforced or only reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    Strict,
    #[default]
    Formal,
}

/// A Pickands constant supplied to a prefactor formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickandsValue {
    pub value: f64,
    pub estimated: bool,
}

impl PickandsValue {
    pub fn exact(value: f64) -> Self {
        Self { value, estimated: false }
    }

    pub fn estimated(value: f64) -> Self {
        Self { value, estimated: true }
    }
}

/// Where a parameter set came from and what it leans on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// True when the prefactor uses an estimated Pickands constant.
    pub estimated_constant: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn new(source: impl Into<String>) -> Self {
        Self { source: source.into(), ..Self::default() }
    }
}

/// A parameter set plus its provenance; serializes as
/// `{alpha, beta, gamma, C, provenance}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    #[serde(flatten)]
    pub tail: WeibullTail,
    pub provenance: Provenance,
}

/// `σ²(t) = D t^{α∞}` for a stationary-increments process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawVariance {
    pub big_d: f64,
    pub alpha_inf: f64,
}

impl PowerLawVariance {
    pub fn new(big_d: f64, alpha_inf: f64) -> Result<Self> {
        if !(big_d > 0.0) || !big_d.is_finite() {
            return Err(domain(format!("variance scale D must be positive, got {big_d}")));
        }
        if !(alpha_inf > 0.0 && alpha_inf <= 2.0) {
            return Err(domain(format!("growth exponent must lie in (0, 2], got {alpha_inf}")));
        }
        Ok(Self { big_d, alpha_inf })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.big_d * t.abs().powf(self.alpha_inf)
    }

    pub fn is_convex(&self) -> bool {
        self.alpha_inf >= 1.0
    }

    /// Assumption violations that strict mode rejects.
    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.is_convex() {
            out.push(format!("variance t^{} is not convex", self.alpha_inf));
        }
        if !(self.alpha_inf > 1.0 && self.alpha_inf < 2.0) {
            out.push(format!(
                "growth exponent {} outside the open interval (1, 2)",
                self.alpha_inf
            ));
        }
        out
    }
}

/// Tail of `sup X(Y(s))` for stationary-increments `X` with variance
/// `D t^{α∞}` when the extremes of `Y` have the (already combined) tail `t`.
pub fn randomized_sup_transform(
    t: &WeibullTail,
    v: &PowerLawVariance,
    strictness: Strictness,
) -> Result<TailParams> {
    t.validate()?;
    let mut provenance = Provenance::new("corollary");
    let violations = v.violations();
    if !violations.is_empty() {
        if strictness == Strictness::Strict {
            return Err(domain(violations.join("; ")));
        }
        provenance.warnings = violations;
    }

    let WeibullTail { alpha, beta, gamma, big_c } = *t;
    let PowerLawVariance { big_d, alpha_inf } = *v;
    let s = alpha + alpha_inf;

    let alpha_t = 2.0 * alpha / s;
    let beta_t = beta.powf(alpha_inf / s)
        * (big_d / 2.0).powf(alpha / s)
        * ((alpha / alpha_inf).powf(alpha_inf / s) + (alpha_inf / alpha).powf(alpha / s));
    let gamma_t = 2.0 * gamma / s;
    let c_t = big_c
        * big_d.powf(-1.0 / alpha_inf)
        * (alpha_inf / (2.0 * s)).sqrt()
        * (alpha_inf / (2.0 * alpha * beta) * big_d.powf(alpha_inf / alpha)).powf(gamma / s);

    Ok(TailParams {
        tail: WeibullTail::new(alpha_t, beta_t, gamma_t, c_t)?,
        provenance,
    })
}

/// Leading-order `E(T) C^{1/α} H_α u^{2/α} Ψ(u)` for a stationary outer process.
pub fn stationary_sup_asymptotic(
    mean_span: f64,
    big_c: f64,
    alpha: f64,
    pickands: f64,
    u: f64,
) -> Result<f64> {
    if !(mean_span >= 0.0) || !mean_span.is_finite() {
        return Err(domain(format!("mean span must be finite and >= 0, got {mean_span}")));
    }
    if !(big_c > 0.0) {
        return Err(domain(format!("local scale C must be positive, got {big_c}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(pickands > 0.0) {
        return Err(domain(format!("Pickands constant must be positive, got {pickands}")));
    }
    if !(u > 0.0) {
        return Err(domain(format!("threshold must be positive, got {u}")));
    }
    Ok(mean_span * big_c.powf(1.0 / alpha) * pickands * u.powf(2.0 / alpha) * normal_upper_tail(u))
}
