use alloc::vec::Vec;

use super::AtomView;
use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p};
use crate::quad::{integrate_pieces, Integral, Tolerance};

/// Binary dislocations: a parent splits into masses `1 - v ≥ v`, giving the
/// configuration `(ln(1-v), ln v)` with intensity `c v^{-1-α} dv` on `(0, 1/2]`.
///
/// The small-`v` part is a compensated jump of the parent combined with an
/// ever smaller child, so the untruncated measure has infinite branching rate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinaryFragmentation {
    pub(crate) alpha: f64,
    pub(crate) density_scale: f64,
    pub(crate) truncation: Option<f64>,
}

const LN2: f64 = core::f64::consts::LN_2;
const S_MAX: f64 = 700.0;

impl BinaryFragmentation {
    /// `α > 0` is required; `α < 2` is the Lévy integrability condition and is
    /// reported by the criterion checker rather than rejected here.
    pub fn new(alpha: f64, density_scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidMeasure(alloc::format!("alpha must be finite and > 0, got {alpha}")));
        }
        if !(density_scale > 0.0 && density_scale.is_finite()) {
            return Err(Error::InvalidMeasure(alloc::format!(
                "density scale must be finite and > 0, got {density_scale}"
            )));
        }
        Ok(Self { alpha, density_scale, truncation: None })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn density_scale(&self) -> f64 {
        self.density_scale
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    pub(crate) fn truncate(&self, n: f64) -> Self {
        let n = self.truncation.map_or(n, |m| m.min(n));
        Self { truncation: Some(n), ..self.clone() }
    }

    /// The exponential integral is finite iff `θ > α` or the measure is truncated.
    pub fn check_exponential(&self, theta: f64) -> Result<()> {
        if self.truncation.is_none() && theta <= self.alpha {
            return Err(Error::ExponentialIntegrability {
                theta,
                reason: alloc::format!(
                    "the fragmentation family needs theta > alpha = {} (the child term integrates v^(theta-1-alpha))",
                    self.alpha
                ),
            });
        }
        Ok(())
    }

    /// Censored entries of the configuration at `v = e^{-s}`.
    pub(crate) fn entries_at_s(&self, s: f64) -> ([f64; 2], usize) {
        let x1 = ln_1p(-exp(-s));
        let x2 = -s;
        self.censor([x1, x2])
    }

    pub(crate) fn entries_at_v(&self, v: f64) -> ([f64; 2], usize) {
        self.censor([ln_1p(-v), ln(v)])
    }

    fn censor(&self, x: [f64; 2]) -> ([f64; 2], usize) {
        let n = self.truncation.unwrap_or(f64::INFINITY);
        let len = x.iter().take_while(|&&e| e >= -n).count();
        (x, len)
    }

    /// `b = min(e^{-n}, 1 - e^{-n})`: configurations with `v ≥ b` are death or
    /// birth events, those with `v < b` are pure jumps of the parent.
    pub fn branch_threshold(&self) -> f64 {
        match self.truncation {
            Some(n) => exp(-n).min(-crate::math::expm1(-n)),
            None => 0.0,
        }
    }

    /// Mass of `c v^{-1-α} dv` on `[lo, hi]`.
    pub fn untilted_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if lo <= 0.0 {
            return f64::INFINITY;
        }
        let a = self.alpha;
        self.density_scale * (crate::math::powf(lo, -a) - crate::math::powf(hi, -a)) / a
    }

    /// `∫ f dΛ` in `s = -ln v ∈ [ln 2, ∞)`, where `Λ(ds) = c e^{α s} ds`.
    /// `extra_breaks_v` adds kinks given as values of `v`.
    pub(crate) fn integrate<F: Fn(&AtomView) -> f64>(&self, f: F, extra_breaks_v: &[f64]) -> Result<Integral> {
        self.integrate_s(f, extra_breaks_v, LN2, f64::INFINITY)
    }

    /// As [`Self::integrate`], restricted to `v ∈ [lo, hi]`.
    pub(crate) fn integrate_v_range<F: Fn(&AtomView) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<Integral> {
        let hi = hi.min(0.5);
        if !(hi > lo) {
            return Ok(Integral::ZERO);
        }
        let s_hi = if lo <= 0.0 { f64::INFINITY } else { -ln(lo) };
        self.integrate_s(f, &[], -ln(hi), s_hi)
    }

    fn integrate_s<F: Fn(&AtomView) -> f64>(&self, f: F, extra_breaks_v: &[f64], from: f64, to: f64) -> Result<Integral> {
        let log_c = ln(self.density_scale);
        let alpha = self.alpha;
        let integrand = |s: f64| {
            // beyond this e^{-s} underflows and x_1 rounds to 0; every
            // admissible integrand is negligible there
            if s > S_MAX {
                return 0.0;
            }
            let (x, len) = self.entries_at_s(s);
            f(&AtomView { entries: &x[..len], log_weight: log_c + alpha * s })
        };
        let mut points: Vec<f64> = Vec::with_capacity(6 + extra_breaks_v.len());
        points.push(from);
        points.push(1.0);
        if let Some(n) = self.truncation {
            points.push(n);
            if n < LN2 {
                points.push(-ln(-crate::math::expm1(-n)));
            }
        }
        points.extend(extra_breaks_v.iter().filter(|&&v| v > 0.0).map(|&v| -ln(v)));
        points.retain(|&p| p >= from && p <= to && p.is_finite());
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        points.push(to);
        let tol = Tolerance { abs: 1e-11, rel: 1e-13, max_intervals: 4000 };
        integrate_pieces(integrand, &points, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family() -> BinaryFragmentation {
        BinaryFragmentation::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn exponential_condition_needs_theta_above_alpha() {
        assert!(family().check_exponential(0.3).is_err());
        assert!(family().check_exponential(0.5).is_err());
        assert!(family().check_exponential(1.0).is_ok());
        assert!(family().truncate(2.0).check_exponential(0.3).is_ok());
    }

    #[test]
    fn masses_match_closed_form() {
        let f = family();
        // ∫_{0.1}^{0.5} v^{-1.5} dv = 2 (0.1^{-1/2} - 0.5^{-1/2})
        let expected = 2.0 * (0.1f64.powf(-0.5) - 0.5f64.powf(-0.5));
        assert!((f.untilted_mass(0.1, 0.5) - expected).abs() < 1e-13);
        let q = f.integrate_v_range(|a| a.scale(1.0), 0.1, 0.5).unwrap();
        assert!((q.value - expected).abs() < 1e-10, "{q:?}");
    }

    #[test]
    fn truncated_branch_region() {
        let f = family().truncate(2.0);
        let b = f.branch_threshold();
        assert!((b - (-2f64).exp()).abs() < 1e-16);
        // rate of configurations with at least two particles
        let q = f.integrate(|a| if a.entries.len() == 2 { a.scale(1.0) } else { 0.0 }, &[]).unwrap();
        assert!((q.value - f.untilted_mass(b, 0.5)).abs() < 1e-9, "{q:?}");
        // below ln 2 the parent can be killed
        let g = family().truncate(0.5);
        let kill = -(-0.5f64).exp_m1();
        let deaths = g.integrate(|a| if a.entries.is_empty() { a.scale(1.0) } else { 0.0 }, &[]).unwrap();
        assert!((deaths.value - g.untilted_mass(kill, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn censoring_of_entries() {
        let f = family().truncate(2.0);
        let (x, len) = f.entries_at_v(0.2);
        assert_eq!(len, 2);
        assert!((x[1] - 0.2f64.ln()).abs() < 1e-15);
        assert_eq!(f.entries_at_v(0.1).1, 1);
        let (_, len) = f.entries_at_v(0.01);
        assert_eq!(len, 1);
    }
}
