//! Fractional Brownian motion specialisations: the supremum of fBm over the
//! unit interval, fBm evaluated over a random range, and the iterated fBm
//! `B_{H2}(B_{H1}(s))`.

use std::f64::consts::PI;

use super::{
    combine_extremes, CaseSelector, PickandsValue, Provenance, TailParams, WeibullTail,
    DEFAULT_CASE_TOLERANCE,
};
use crate::error::{domain, Error, Result};

fn check_hurst(h: f64, name: &str) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in (0, 1], got {h}")))
    }
}

/// The constant for fBm with Hurst index `hurst` is `H_α` at `α = 2 hurst`.
fn require_pickands(p: Option<PickandsValue>, hurst: f64) -> Result<PickandsValue> {
    match p {
        Some(v) if v.value > 0.0 && v.value.is_finite() => Ok(v),
        Some(v) => Err(domain(format!("Pickands constant must be positive, got {}", v.value))),
        None => Err(Error::MissingPickands { index: 2.0 * hurst }),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Regime {
    Rough,
    Brownian,
    Smooth,
}

fn regime(h: f64) -> Regime {
    if h < 0.5 {
        Regime::Rough
    } else if h == 0.5 {
        Regime::Brownian
    } else {
        Regime::Smooth
    }
}

/// Tail of `sup_{s ∈ [0,1]} B_h(s)`.
///
/// For `h < 1/2` the prefactor needs the Pickands constant attached to the
/// correlation index of `B_h`; it must be passed in.
pub fn fbm_sup_unit_interval(h: f64, pickands: Option<PickandsValue>) -> Result<TailParams> {
    check_hurst(h, "Hurst index")?;
    let mut provenance = Provenance::new("fbm-unit");
    let tail = match regime(h) {
        Regime::Rough => {
            let p = require_pickands(pickands, h)?;
            provenance.estimated_constant = p.estimated;
            let c = p.value / (h * PI.sqrt()) * 2f64.powf(-(h + 1.0) / (2.0 * h));
            WeibullTail::new(2.0, 0.5, 1.0 / h - 3.0, c)?
        }
        Regime::Brownian => WeibullTail::new(2.0, 0.5, -1.0, 2.0 / (2.0 * PI).sqrt())?,
        Regime::Smooth => WeibullTail::new(2.0, 0.5, -1.0, 1.0 / (2.0 * PI).sqrt())?,
    };
    Ok(TailParams { tail, provenance })
}

/// Tail of `sup_{s ∈ [0,T]} B_h(Y(s))` given the tails of `M = sup Y` and
/// `K = -inf Y`.
///
/// When the two tails are proportional the prefactor is taken from `M`
/// alone, so that composing with [`fbm_sup_unit_interval`] reproduces
/// [`iterated_fbm_sup`]. `pickands` is the constant of the outer fBm and is
/// only consulted for `h < 1/2`.
pub fn fbm_randomized_sup(
    h: f64,
    m: &WeibullTail,
    k: &WeibullTail,
    pickands: Option<PickandsValue>,
) -> Result<TailParams> {
    check_hurst(h, "Hurst index")?;
    m.validate()?;
    k.validate()?;
    let combined = combine_extremes(m, k, DEFAULT_CASE_TOLERANCE);
    let WeibullTail { alpha, beta, gamma, big_c } = match combined.case {
        CaseSelector::Proportional { .. } => WeibullTail { alpha: combined.effective.alpha, ..*m },
        _ => combined.effective,
    };

    let s = alpha + 2.0 * h;
    let alpha_t = 2.0 * alpha / s;
    let beta_t = beta.powf(2.0 * h / s)
        * (0.5 * (alpha / h).powf(2.0 * h / s) + (h / alpha).powf(alpha / s));

    let mut provenance = Provenance::new("fbm");
    let (gamma_t, c_t) = match regime(h) {
        Regime::Rough => {
            let p = require_pickands(pickands, h)?;
            provenance.estimated_constant = p.estimated;
            let g = (2.0 * alpha - 3.0 * alpha * h + 2.0 * gamma) / s;
            let c = p.value
                * 0.5f64.powf(1.0 / (2.0 * h))
                * big_c
                / s.sqrt()
                * h.powf((alpha + 6.0 * h + 2.0 * gamma - 2.0) / (2.0 * alpha + 4.0 * h))
                * (alpha * beta).powf((1.0 - 2.0 * h - gamma) / s);
            (g, c)
        }
        Regime::Brownian | Regime::Smooth => {
            let c2 = big_c * h.sqrt() / s.sqrt() * (h / (alpha * beta)).powf(gamma / s);
            let mult = if regime(h) == Regime::Brownian { 2.0 } else { 1.0 };
            (2.0 * gamma / s, mult * c2)
        }
    };
    Ok(TailParams {
        tail: WeibullTail::new(alpha_t, beta_t, gamma_t, c_t)?,
        provenance,
    })
}

/// Tail of `sup_{s ∈ [0,T]} B_{h2}(B_{h1}(s))` from the nine-case table.
///
/// `pickands_h1` / `pickands_h2` are the constants attached to the inner and
/// outer fBm; each is required only when the matching Hurst index is below
/// 1/2. The horizon enters through exact self-similarity: the tail on
/// `[0,T]` is the unit-horizon tail of `T^{h1 h2}` times the supremum.
pub fn iterated_fbm_sup(
    h1: f64,
    h2: f64,
    big_t: f64,
    pickands_h1: Option<PickandsValue>,
    pickands_h2: Option<PickandsValue>,
) -> Result<TailParams> {
    check_hurst(h1, "inner Hurst index")?;
    check_hurst(h2, "outer Hurst index")?;
    if !(big_t > 0.0) || !big_t.is_finite() {
        return Err(domain(format!("horizon must be positive, got {big_t}")));
    }

    let alpha = 2.0 / (h2 + 1.0);
    let beta = 0.5f64.powf(h2 / (1.0 + h2))
        * (0.5 * (2.0 / h2).powf(h2 / (1.0 + h2)) + (h2 / 2.0).powf(1.0 / (1.0 + h2)));

    let gamma1 = (1.0 - h1 - 3.0 * h1 * h2) / (h1 * (1.0 + h2));
    let gamma2 = (1.0 - 3.0 * h1) / (h1 * (1.0 + h2));
    let gamma3 = (1.0 - 3.0 * h2) / (1.0 + h2);
    let gamma4 = -1.0 / (1.0 + h2);
    let root = (PI * (1.0 + h2)).sqrt();

    let mut estimated = false;
    let mut pickands = |p: Option<PickandsValue>, index: f64| -> Result<f64> {
        let p = require_pickands(p, index)?;
        estimated |= p.estimated;
        Ok(p.value)
    };

    let (gamma, c) = match (regime(h1), regime(h2)) {
        (Regime::Rough, Regime::Rough) => {
            let p1 = pickands(pickands_h1, h1)?;
            let p2 = pickands(pickands_h2, h2)?;
            let c1 = p1 * p2 / (h1 * root)
                * 0.5f64.powf((h1 + h2 + 2.0 * h1 * h2) / (2.0 * h1 * h2))
                * h2.powf((1.0 - 3.0 * h1 + 3.0 * h1 * h2) / (2.0 * h1 * (1.0 + h2)));
            (gamma1, c1)
        }
        (Regime::Rough, outer) => {
            let p1 = pickands(pickands_h1, h1)?;
            let c2 = p1 / (h1 * root)
                * 0.5f64.powf(1.0 / (2.0 * h1) + 1.0)
                * h2.powf((1.0 - 2.0 * h1 + h1 * h2) / (2.0 * h1 * (1.0 + h2)));
            let mult = if outer == Regime::Brownian { 2.0 } else { 1.0 };
            (gamma2, mult * c2)
        }
        (inner, Regime::Rough) => {
            let p2 = pickands(pickands_h2, h2)?;
            let c3 = p2 / root
                * 0.5f64.powf(1.0 / (2.0 * h2) + 1.0)
                * h2.powf((3.0 * h2 - 1.0) / (2.0 + 2.0 * h2));
            let mult = if inner == Regime::Brownian { 2.0 } else { 1.0 };
            (gamma3, mult * c3)
        }
        (inner, outer) => {
            let c4 = 1.0 / (2.0 * root) * h2.powf(h2 / (2.0 * (1.0 + h2)));
            let mult = match (inner, outer) {
                (Regime::Brownian, Regime::Brownian) => 4.0,
                (Regime::Brownian, _) | (_, Regime::Brownian) => 2.0,
                _ => 1.0,
            };
            (gamma4, mult * c4)
        }
    };

    let unit = WeibullTail::new(alpha, beta, gamma, c)?;
    let tail = unit.rescaled(big_t.powf(h1 * h2))?;
    Ok(TailParams {
        tail,
        provenance: Provenance {
            source: "iterated-fbm".into(),
            estimated_constant: estimated,
            warnings: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn unit_interval_regimes() {
        let bm = fbm_sup_unit_interval(0.5, None).unwrap().tail;
        assert_eq!((bm.alpha, bm.beta, bm.gamma), (2.0, 0.5, -1.0));
        assert!(close(bm.big_c, 0.797_884_560_802_865_4, 1e-14));

        let smooth = fbm_sup_unit_interval(0.75, None).unwrap().tail;
        assert!(close(smooth.big_c, 0.398_942_280_401_432_7, 1e-14));

        let p = PickandsValue::estimated(1.3);
        let rough = fbm_sup_unit_interval(0.25, Some(p)).unwrap();
        assert_eq!(rough.tail.gamma, 1.0);
        let expected = 1.3 / (0.25 * PI.sqrt()) * 2f64.powf(-2.5);
        assert!(close(rough.tail.big_c, expected, 1e-14));
        assert!(rough.provenance.estimated_constant);
    }

    #[test]
    fn unit_interval_domain() {
        assert!(fbm_sup_unit_interval(0.0, None).is_err());
        assert!(fbm_sup_unit_interval(1.2, None).is_err());
        assert!(matches!(
            fbm_sup_unit_interval(0.3, None),
            Err(Error::MissingPickands { .. })
        ));
    }

    #[test]
    fn iterated_brownian_constants() {
        let w = iterated_fbm_sup(0.5, 0.5, 1.0, None, None).unwrap().tail;
        assert!(close(w.alpha, 4.0 / 3.0, 1e-15));
        assert!(close(w.beta, 3.0 * 2f64.powf(-5.0 / 3.0), 1e-14));
        assert!(close(w.gamma, -2.0 / 3.0, 1e-15));
        assert!(close(w.big_c, 0.820_800_786_370_665_5, 1e-13));
    }

    #[test]
    fn brownian_outer_matches_table() {
        let c = 2.0 / (2.0 * PI).sqrt();
        let m = WeibullTail::new(2.0, 0.5, -1.0, c).unwrap();
        let w = fbm_randomized_sup(0.5, &m, &m, None).unwrap().tail;
        let table = iterated_fbm_sup(0.5, 0.5, 1.0, None, None).unwrap().tail;
        assert!(w.approx_eq(&table, 1e-14), "{w:?} vs {table:?}");
        assert!(close(w.alpha, 4.0 / 3.0, 1e-15));

        let w = fbm_randomized_sup(0.75, &m, &m, None).unwrap().tail;
        let table = iterated_fbm_sup(0.5, 0.75, 1.0, None, None).unwrap().tail;
        assert!(w.approx_eq(&table, 1e-12), "{w:?} vs {table:?}");
    }

    #[test]
    fn smooth_pair_uses_single_multiplicity() {
        let both = iterated_fbm_sup(0.8, 0.9, 1.0, None, None).unwrap().tail;
        let h2: f64 = 0.9;
        let c4 = 1.0 / (2.0 * (PI * (1.0 + h2)).sqrt()) * h2.powf(h2 / (2.0 * (1.0 + h2)));
        assert!(close(both.big_c, c4, 1e-14));
        assert!(close(both.gamma, -1.0 / 1.9, 1e-15));
    }

    #[test]
    fn horizon_scaling_of_beta() {
        let one = iterated_fbm_sup(0.5, 0.5, 1.0, None, None).unwrap().tail;
        let two = iterated_fbm_sup(0.5, 0.5, 2.0, None, None).unwrap().tail;
        assert!(close(two.beta / one.beta, 2f64.powf(-1.0 / 3.0), 1e-14));
        // C picks up T^{-γ h1 h2}
        assert!(close(two.big_c / one.big_c, 2f64.powf(1.0 / 6.0), 1e-14));
    }

    #[test]
    fn pickands_requirements() {
        assert!(matches!(
            iterated_fbm_sup(0.3, 0.7, 1.0, None, None),
            Err(Error::MissingPickands { .. })
        ));
        assert!(matches!(
            iterated_fbm_sup(0.7, 0.3, 1.0, None, None),
            Err(Error::MissingPickands { .. })
        ));
        let p = Some(PickandsValue::estimated(1.2));
        let r = iterated_fbm_sup(0.7, 0.3, 1.0, None, p).unwrap();
        assert!(r.provenance.estimated_constant);
        assert!(iterated_fbm_sup(0.7, 0.7, 0.0, None, None).is_err());
    }
}
