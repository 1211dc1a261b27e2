//! Certified sums of positive, eventually decreasing series.
//!
//! `Σ_{m=first}^{last} f(m)` is summed directly for the first terms; the rest
//! is enclosed by the integral test, `∫_{M+1}^{L+1} f ≤ Σ_{M+1}^{L} f(m) ≤ ∫_M^L f`,
//! and estimated with the first Euler–Maclaurin correction. The integrals are
//! evaluated in `u = ln x` coordinates (the caller supplies `f(e^u)·e^u`),
//! followed by `u = e^w`, which turns the logarithmic tails of the families
//! used here into exponentially decaying integrands.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln};
use crate::quad::{integrate, integrate_to_infinity, Integral, Tolerance};

/// Number of terms summed explicitly before switching to the integral test.
pub const DIRECT_TERMS: u64 = 1 << 16;
/// Finite series with at most this many terms are summed term by term.
pub const FINITE_DIRECT_TERMS: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesSum {
    /// Best estimate of the sum.
    pub value: f64,
    /// Certified enclosure `[lower, upper]` (up to quadrature error).
    pub lower: f64,
    pub upper: f64,
    pub terms_summed: u64,
}

impl SeriesSum {
    pub fn as_integral(&self) -> Integral {
        Integral { value: self.value, error: 0.5 * (self.upper - self.lower) }
    }
}

fn log_integral<G: Fn(f64) -> f64>(g: &G, from: f64, to: Option<f64>) -> Result<f64> {
    // ∫_{from}^{to} f(x) dx with x = exp(exp(w)); g(u) = f(e^u)·e^u
    let lo = ln(ln(from));
    let inner = |w: f64| {
        let u = exp(w);
        if !u.is_finite() {
            return 0.0;
        }
        g(u) * u
    };
    let tol = Tolerance { abs: 1e-14, rel: 1e-12, max_intervals: 4000 };
    let r = match to {
        Some(t) => integrate(inner, lo, ln(ln(t)), tol)?,
        None => integrate_to_infinity(inner, lo, tol)?,
    };
    Ok(r.value)
}

/// Sums `f(m)` for `m = first..=last` (`last = None` means to infinity).
///
/// `f` must be positive and non-increasing from `first + DIRECT_TERMS` on,
/// and the series must be known to converge; `log_density(u)` must equal
/// `f(e^u)·e^u`.
pub fn sum_decreasing<F, G>(f: F, log_density: G, first: u64, last: Option<u64>) -> Result<SeriesSum>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if first < 3 {
        return Err(Error::InvalidParameter("series must start at index 3 or later".into()));
    }
    let direct_last = match last {
        // short finite ranges are summed exactly
        Some(l) if l - first < FINITE_DIRECT_TERMS => l,
        Some(l) => l.min(first + DIRECT_TERMS - 1),
        None => first + DIRECT_TERMS - 1,
    };
    let mut head = crate::math::KahanSum::new();
    // sum smallest terms first
    for m in (first..=direct_last).rev() {
        head.add(f(m as f64));
    }
    let head = head.value();
    if last == Some(direct_last) {
        return Ok(SeriesSum { value: head, lower: head, upper: head, terms_summed: direct_last - first + 1 });
    }
    let m0 = direct_last as f64;
    let (upper_tail, lower_tail, f_last) = match last {
        Some(l) => {
            let l = l as f64;
            (log_integral(&log_density, m0, Some(l))?, log_integral(&log_density, m0 + 1.0, Some(l + 1.0))?, f(l))
        }
        None => (log_integral(&log_density, m0, None)?, log_integral(&log_density, m0 + 1.0, None)?, 0.0),
    };
    let estimate = upper_tail - 0.5 * f(m0) + 0.5 * f_last;
    Ok(SeriesSum {
        value: head + estimate.clamp(lower_tail, upper_tail),
        lower: head + lower_tail,
        upper: head + upper_tail,
        terms_summed: direct_last - first + 1,
    })
}

/// A series that was either summed with a certified enclosure or shown
/// divergent by comparison with `Σ m^a (ln m)^b`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "outcome", rename_all = "snake_case"))]
pub enum SeriesOutcome {
    Finite(SeriesSum),
    Divergent {
        /// Exponents `(a, b)` of the comparison series `Σ m^a (ln m)^b`.
        comparison: (f64, f64),
        partial_sums: Vec<(u64, f64)>,
    },
}

impl SeriesOutcome {
    pub fn is_finite(&self) -> bool {
        matches!(self, SeriesOutcome::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            SeriesOutcome::Finite(s) => s.value,
            SeriesOutcome::Divergent { .. } => f64::INFINITY,
        }
    }
}

/// Partial sums at a few checkpoints; used as evidence when a series is
/// certified divergent by comparison.
pub fn partial_sums<F: Fn(f64) -> f64>(f: F, first: u64, checkpoints: &[u64]) -> Vec<(u64, f64)> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = crate::math::KahanSum::new();
    let mut m = first;
    for &c in checkpoints {
        while m <= c {
            acc.add(f(m as f64));
            m += 1;
        }
        out.push((c, acc.value()));
    }
    out
}

/// Convergence of `Σ m^{a} (ln m)^{b}`: converges iff `a < -1`, or `a == -1`
/// and `b < -1`.
pub fn power_log_converges(a: f64, b: f64) -> bool {
    a < -1.0 || (a == -1.0 && b < -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_squares_match_zeta() {
        // Σ_{m≥3} 1/m² = π²/6 − 1 − 1/4
        let expected = core::f64::consts::PI.powi(2) / 6.0 - 1.25;
        let s = sum_decreasing(|m| 1.0 / (m * m), |u: f64| (-u).exp(), 3, None).unwrap();
        assert!((s.value - expected).abs() < 1e-12, "{s:?}");
        assert!(s.lower <= expected && expected <= s.upper);
    }

    #[test]
    fn slow_log_tail_is_enclosed() {
        // Σ 1/(m ln² m): tail of the integral is 1/ln M
        let f = |m: f64| 1.0 / (m * m.ln().powi(2));
        let g = |u: f64| 1.0 / (u * u);
        let s = sum_decreasing(f, g, 3, None).unwrap();
        assert!(s.upper - s.lower < 1e-6);
        assert!(s.lower <= s.value && s.value <= s.upper);
        // the direct part alone is far from the total
        let direct = partial_sums(f, 3, &[3 + DIRECT_TERMS - 1])[0].1;
        assert!(s.value - direct > 0.08);
    }

    #[test]
    fn finite_last_index() {
        let s = sum_decreasing(|m| 1.0 / (m * m), |u: f64| (-u).exp(), 3, Some(200_000)).unwrap();
        let direct: f64 = (3..=200_000u64).rev().map(|m| 1.0 / (m as f64).powi(2)).sum();
        assert!((s.value - direct).abs() < 1e-13);
        assert_eq!(s.lower, s.upper);
        // long finite ranges use the integral test for the tail
        let last = 3 + FINITE_DIRECT_TERMS + 10;
        let s = sum_decreasing(|m| 1.0 / (m * m), |u: f64| (-u).exp(), 3, Some(last)).unwrap();
        let expected = core::f64::consts::PI.powi(2) / 6.0 - 1.25 - 1.0 / last as f64;
        assert!(s.lower < s.upper && (s.value - expected).abs() < 1e-12);
    }

    #[test]
    fn convergence_rule() {
        assert!(power_log_converges(-2.0, 5.0));
        assert!(power_log_converges(-1.0, -2.0));
        assert!(!power_log_converges(-1.0, -1.0));
        assert!(!power_log_converges(0.0, -3.0));
    }
}
