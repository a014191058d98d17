use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{rel_eq, WeibullTail};

/// Relative tolerance used to decide that two tails share `(α, β, γ)`.
pub const DEFAULT_CASE_TOLERANCE: f64 = 1e-12;

/// Which side of the range of `Y` drives the supremum tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseSelector {
    /// `P(K > u) = o(P(M > u))`.
    MDominates,
    /// `P(M > u) = o(P(K > u))`.
    KDominates,
    /// `P(K > u) ~ ratio · P(M > u)` with `ratio = C_k / C_m`.
    Proportional { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub case: CaseSelector,
    /// `α = min(α_m, α_k)` with `(β, γ, C)` from the dominating side, or the
    /// summed prefactor in the proportional case.
    pub effective: WeibullTail,
}

/// Compare tail heaviness: `Greater` means `a` is heavier than `b`.
fn heavier(a: &WeibullTail, b: &WeibullTail, tol: f64) -> Ordering {
    if !rel_eq(a.alpha, b.alpha, tol) {
        return b.alpha.partial_cmp(&a.alpha).unwrap_or(Ordering::Equal);
    }
    if !rel_eq(a.beta, b.beta, tol) {
        return b.beta.partial_cmp(&a.beta).unwrap_or(Ordering::Equal);
    }
    if !rel_eq(a.gamma, b.gamma, tol) {
        return a.gamma.partial_cmp(&b.gamma).unwrap_or(Ordering::Equal);
    }
    Ordering::Equal
}

/// Decide which extreme of `Y` dominates, given the tails of
/// `M = sup Y` (`m`) and `K = -inf Y` (`k`).
pub fn combine_extremes(m: &WeibullTail, k: &WeibullTail, tol: f64) -> Combination {
    let alpha = m.alpha.min(k.alpha);
    match heavier(m, k, tol) {
        Ordering::Greater => Combination {
            case: CaseSelector::MDominates,
            effective: WeibullTail { alpha, ..*m },
        },
        Ordering::Less => Combination {
            case: CaseSelector::KDominates,
            effective: WeibullTail { alpha, ..*k },
        },
        Ordering::Equal => Combination {
            case: CaseSelector::Proportional { ratio: k.big_c / m.big_c },
            effective: WeibullTail { alpha, big_c: m.big_c + k.big_c, ..*m },
        },
    }
}
