//! The cumulant `κ`, Lévy exponents of the first particle and of the spine,
//! and the uniform-integrability / `L^p` criteria for the additive martingale
//! `W_t = e^{-tκ(θ)} ⟨Z_t, e_θ⟩`.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math::{abs, expm1, ln};
use crate::measure::{AtomView, BranchingLevyMeasure, HeavyTerm};
use crate::quad::Integral;
use crate::series::SeriesOutcome;

/// Margins closer to zero than this are flagged as boundary cases.
pub const BOUNDARY_MARGIN: f64 = 1e-12;
/// A verdict is also flagged when it flips within this distance in `θ`.
pub const BOUNDARY_THETA: f64 = 1e-6;

/// `(σ², a, Λ)` together with the parameter `θ` of the martingale.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Triplet {
    pub sigma2: f64,
    pub a: f64,
    pub measure: BranchingLevyMeasure,
    pub theta: f64,
}

/// Outcome of the uniform-integrability criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    /// `W` is uniformly integrable and `W_∞` is non-degenerate.
    #[cfg_attr(feature = "serde", serde(rename = "UI"))]
    UniformlyIntegrable,
    /// `W_∞ = 0` almost surely.
    Degenerate,
    /// An integral could be neither summed nor shown divergent.
    Undetermined,
}

/// How an integral against `Λ` was evaluated, and what came out.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "status", rename_all = "snake_case"))]
pub enum Evaluation {
    Finite { value: f64, error: f64, method: String },
    Divergent { method: String, comparison: (f64, f64), partial_sums: Vec<(u64, f64)> },
    Undetermined { method: String, reason: String },
}

impl Evaluation {
    pub fn is_finite(&self) -> bool {
        matches!(self, Evaluation::Finite { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Evaluation::Divergent { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Evaluation::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    fn from_series(s: SeriesOutcome) -> Self {
        match s {
            SeriesOutcome::Finite(sum) => Evaluation::Finite {
                value: sum.value,
                error: 0.5 * (sum.upper - sum.lower),
                method: "series with integral-test tail enclosure".into(),
            },
            SeriesOutcome::Divergent { comparison, partial_sums } => Evaluation::Divergent {
                method: "comparison with sum m^a (ln m)^b".into(),
                comparison,
                partial_sums,
            },
        }
    }

    fn from_integral(r: Result<Integral>, method: &str) -> Self {
        match r {
            Ok(i) => Evaluation::Finite { value: i.value, error: i.error, method: method.into() },
            Err(e) => Evaluation::Undetermined { method: method.into(), reason: alloc::format!("{e}") },
        }
    }
}

/// `θκ'(θ) < κ(θ)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthCondition {
    pub holds: bool,
    /// `θκ'(θ) - κ(θ)`.
    pub margin: f64,
    pub boundary: bool,
}

/// Verdicts and numeric evidence for the uniform-integrability criterion.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriterionReport {
    pub theta: f64,
    pub admissible_4: bool,
    /// `∫ (1 ∧ x_1²) Λ(dx)`.
    pub levy_integral: Evaluation,
    pub admissible_5: bool,
    /// `∫ (1_{x_1>1} e^{θx_1} + Σ_{k≥2} e^{θx_k}) Λ(dx)`.
    pub exponential_integral: Evaluation,
    pub kappa_theta: f64,
    pub kappa_prime_theta: f64,
    pub cond1: GrowthCondition,
    /// `∫ ⟨x,e_θ⟩ (ln⟨x,e_θ⟩ - 1)^+ Λ(dx)`.
    pub cond2: Evaluation,
    pub verdict: Verdict,
    /// The verdict sits on (or within rounding of) the threshold `θκ' = κ`.
    pub boundary: bool,
    pub lp: Option<LpReport>,
}

/// Clauses of the `L^p` criterion.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LpReport {
    pub p: f64,
    pub q: f64,
    pub kappa_p_theta: f64,
    pub p_kappa_theta: f64,
    /// `κ(pθ) < pκ(θ)`.
    pub growth: bool,
    /// `∫ ⟨x,e_θ⟩^p 1_{⟨x,e_θ⟩>2} Λ(dx)`.
    pub cond3: Evaluation,
    /// `κ(qθ)`, or `None` when it is infinite.
    pub kappa_q_theta: Option<f64>,
    /// `κ(q'θ) < ∞` for `q' ∈ {p + 0.1, p + 0.5, 2p}`.
    pub probes: Vec<(f64, bool)>,
    /// All three clauses hold for the given `q`.
    pub bounded: bool,
}

/// `∫_0^∞ Λ̂(⟨x,e_θ⟩ > e^{ct} + 1) dt`, finite or not.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailIntegral {
    pub c: f64,
    pub evaluation: Evaluation,
}

fn cexp_m1_minus(w: Complex64) -> Complex64 {
    if w.norm() < 0.1 {
        let mut term = w * w * 0.5;
        let mut sum = term;
        for k in 3..18 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        w.exp() - 1.0 - w
    }
}

fn cexp_m1(w: Complex64) -> Complex64 {
    cexp_m1_minus(w) + w
}

fn scale_complex(a: &AtomView, z: Complex64) -> Complex64 {
    Complex64::new(a.scale(z.re), a.scale(z.im))
}

impl Triplet {
    pub fn new(sigma2: f64, a: f64, measure: BranchingLevyMeasure, theta: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            problems.push(alloc::format!("sigma2 must be >= 0, got {sigma2}"));
        }
        if !a.is_finite() {
            problems.push(alloc::format!("drift must be finite, got {a}"));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            problems.push(alloc::format!("theta must be >= 0, got {theta}"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidParameter(problems.join("; ")));
        }
        Ok(Self { sigma2, a, measure, theta })
    }

    /// The same triplet with `Λ` replaced by its image under `π_n`.
    pub fn truncated(&self, n: f64) -> Result<Self> {
        Ok(Self { measure: self.measure.truncate(n)?, ..self.clone() })
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.sigma2, self.a, self.measure.clone(), theta)
    }

    /// Cheap admissibility check at exponent `re`: the Lévy condition and the
    /// analytic part of the exponential condition.
    fn require_admissible(&self, re: f64) -> Result<()> {
        match &self.measure {
            BranchingLevyMeasure::Fragmentation(f) => {
                if f.alpha() >= 2.0 {
                    return Err(Error::LevyIntegrability(alloc::format!(
                        "dislocation density exponent alpha = {} must be < 2",
                        f.alpha()
                    )));
                }
                f.check_exponential(re)
            }
            BranchingLevyMeasure::HeavyOffspring(h) => h.offspring_series(re).map(|_| ()),
            BranchingLevyMeasure::Finite(_) => Ok(()),
        }
    }

    fn integrate_complex<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(&AtomView) -> Complex64,
    {
        let re = self.measure.integrate_configs(|a| f(a).re, &[])?;
        let im = self.measure.integrate_configs(|a| f(a).im, &[])?;
        Ok(Complex64::new(re.value, im.value))
    }

    /// `κ(z) = ½σ²z² + az + ∫(e^{zx_1} - 1 - zx_1 1_{|x_1|<1} + Σ_{k≥2} e^{zx_k}) Λ(dx)`.
    pub fn kappa(&self, z: Complex64) -> Result<Complex64> {
        if !(z.re >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("Re z must be >= 0, got {}", z.re)));
        }
        self.require_admissible(z.re)?;
        let gaussian = z * z * (0.5 * self.sigma2) + z * self.a;
        let jumps = match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(h) => Complex64::new(h.offspring_series(z.re)?.value, 0.0),
            _ => self.integrate_complex(|a| {
                let x1 = a.first();
                let first = if x1 == f64::NEG_INFINITY {
                    Complex64::new(-1.0, 0.0)
                } else if abs(x1) < 1.0 {
                    cexp_m1_minus(z * x1)
                } else {
                    (z * x1).exp() - 1.0
                };
                let mut total = scale_complex(a, first);
                for &x in a.entries.iter().skip(1) {
                    total += Complex64::from_polar(a.scaled_exp(z.re, x), z.im * x);
                }
                total
            })?,
        };
        Ok(gaussian + jumps)
    }

    pub fn kappa_real(&self, theta: f64) -> Result<f64> {
        Ok(self.kappa(Complex64::new(theta, 0.0))?.re)
    }

    /// `κ'(θ) = σ²θ + a + ∫(x_1(e^{θx_1} - 1_{|x_1|<1}) + Σ_{k≥2} x_k e^{θx_k}) Λ(dx)`.
    pub fn kappa_prime(&self) -> Result<f64> {
        self.kappa_prime_at(self.theta)
    }

    pub fn kappa_prime_at(&self, theta: f64) -> Result<f64> {
        self.require_admissible(theta)?;
        let jumps = match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(_) => 0.0,
            _ => {
                self.measure
                    .integrate_configs(
                        |a| {
                            let x1 = a.first();
                            let first = if x1 == f64::NEG_INFINITY {
                                0.0
                            } else if abs(x1) < 1.0 {
                                a.scale(x1 * expm1(theta * x1))
                            } else {
                                x1 * a.scaled_exp(theta, x1)
                            };
                            first + a.entries.iter().skip(1).map(|&x| x * a.scaled_exp(theta, x)).sum::<f64>()
                        },
                        &[],
                    )?
                    .value
            }
        };
        Ok(self.sigma2 * theta + self.a + jumps)
    }

    /// `Φ(r) = -σ²r²/2 + iar + ∫(e^{irx_1} - 1 - irx_1 1_{|x_1|<1}) Λ(dx)`, the
    /// exponent of the first particle's motion (killed at rate `Λ(x_1 = -∞)`).
    pub fn levy_exponent(&self, r: f64) -> Result<Complex64> {
        let base = Complex64::new(-0.5 * self.sigma2 * r * r, self.a * r);
        let jumps = match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(_) => Complex64::new(0.0, 0.0),
            BranchingLevyMeasure::Fragmentation(f) if f.alpha() >= 2.0 => {
                return Err(Error::LevyIntegrability(alloc::format!("alpha = {} must be < 2", f.alpha())))
            }
            _ => self.integrate_complex(|a| {
                let x1 = a.first();
                let v = if x1 == f64::NEG_INFINITY {
                    Complex64::new(-1.0, 0.0)
                } else if abs(x1) < 1.0 {
                    cexp_m1_minus(Complex64::new(0.0, r * x1))
                } else {
                    Complex64::new(0.0, r * x1).exp() - 1.0
                };
                scale_complex(a, v)
            })?,
        };
        Ok(base + jumps)
    }

    /// `Φ̂(r) = κ(θ + ir) - κ(θ)`.
    pub fn spine_exponent(&self, r: f64) -> Result<Complex64> {
        Ok(self.kappa(Complex64::new(self.theta, r))? - self.kappa(Complex64::new(self.theta, 0.0))?)
    }

    /// The exponent of the spine from its own characteristics:
    /// `-σ²r²/2 + iâr + ∫ Σ_n e^{θx_n}(e^{irx_n} - 1 - irx_n 1_{|x_n|<1}) Λ(dx)`.
    pub fn spine_exponent_direct(&self, r: f64) -> Result<Complex64> {
        let theta = self.theta;
        let drift = self.spine_drift()?;
        let base = Complex64::new(-0.5 * self.sigma2 * r * r, drift * r);
        let jumps = match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(_) => Complex64::new(0.0, 0.0),
            _ => self.integrate_complex(|a| {
                let mut total = Complex64::new(0.0, 0.0);
                for &x in a.entries {
                    let w = Complex64::new(0.0, r * x);
                    let v = if abs(x) < 1.0 { cexp_m1_minus(w) } else { cexp_m1(w) };
                    total += v * a.scaled_exp(theta, x);
                }
                total
            })?,
        };
        Ok(base + jumps)
    }

    /// `â = a + θσ² + ∫(Σ_k x_k e^{θx_k} 1_{|x_k|<1} - x_1 1_{|x_1|<1}) Λ(dx)`.
    pub fn spine_drift(&self) -> Result<f64> {
        let theta = self.theta;
        self.require_admissible(theta)?;
        let jumps = match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(_) => 0.0,
            _ => {
                self.measure
                    .integrate_configs(
                        |a| {
                            let x1 = a.first();
                            let first = if abs(x1) < 1.0 { a.scale(x1 * expm1(theta * x1)) } else { 0.0 };
                            first
                                + a.entries
                                    .iter()
                                    .skip(1)
                                    .filter(|x| abs(**x) < 1.0)
                                    .map(|&x| x * a.scaled_exp(theta, x))
                                    .sum::<f64>()
                        },
                        &[],
                    )?
                    .value
            }
        };
        Ok(self.a + theta * self.sigma2 + jumps)
    }

    /// `∫ ⟨x,e_θ⟩ (ln⟨x,e_θ⟩ - 1)^+ Λ(dx)`.
    pub fn entropy_integral(&self) -> Evaluation {
        let theta = self.theta;
        match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(h) => match h.series(HeavyTerm::EntropyPlus) {
                Ok(s) => Evaluation::from_series(s),
                Err(e) => Evaluation::Undetermined { method: "series".into(), reason: alloc::format!("{e}") },
            },
            BranchingLevyMeasure::Finite(_) => Evaluation::from_integral(
                self.measure.integrate_configs(
                    |a| {
                        let w = a.weighted_sum(theta);
                        if w > 0.0 {
                            a.scale(w * (ln(w) - 1.0).max(0.0))
                        } else {
                            0.0
                        }
                    },
                    &[],
                ),
                "exact sum over atoms",
            ),
            BranchingLevyMeasure::Fragmentation(_) => Evaluation::from_integral(
                self.measure.integrate_configs(
                    |a| {
                        let w = a.weighted_sum(theta);
                        if w > 0.0 {
                            a.scale(w * (ln(w) - 1.0).max(0.0))
                        } else {
                            0.0
                        }
                    },
                    &[],
                ),
                "adaptive Gauss-Kronrod quadrature",
            ),
        }
    }

    /// `∫_0^∞ Λ̂(⟨x,e_θ⟩ > e^{ct} + 1) dt = ∫ ⟨x,e_θ⟩ (ln(⟨x,e_θ⟩ - 1))^+ / c Λ(dx)`,
    /// evaluated independently of [`Self::entropy_integral`].
    pub fn tail_integral_dichotomy(&self, c: f64) -> Result<TailIntegral> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("c must be > 0, got {c}")));
        }
        let theta = self.theta;
        let evaluation = match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(h) => Evaluation::from_series(h.series(HeavyTerm::TailLog { c })?),
            _ => {
                let method = if matches!(self.measure, BranchingLevyMeasure::Finite(_)) {
                    "exact sum over atoms"
                } else {
                    "adaptive Gauss-Kronrod quadrature"
                };
                Evaluation::from_integral(
                    self.measure.integrate_configs(
                        |a| {
                            let w = a.weighted_sum(theta);
                            if w > 2.0 {
                                a.scale(w * ln(w - 1.0) / c)
                            } else {
                                0.0
                            }
                        },
                        &[],
                    ),
                    method,
                )
            }
        };
        Ok(TailIntegral { c, evaluation })
    }

    fn growth_margin(&self, theta: f64) -> Result<f64> {
        Ok(theta * self.kappa_prime_at(theta)? - self.kappa_real(theta)?)
    }

    /// Evaluates admissibility, `θκ'(θ) < κ(θ)` and the entropy condition.
    pub fn check_criterion(&self) -> Result<CriterionReport> {
        let theta = self.theta;
        let levy = self.measure.levy_integral();
        let admissible_4 = matches!(&levy, Ok(i) if i.value.is_finite());
        let levy_integral = Evaluation::from_integral(levy, "integral of 1 ∧ x_1²");
        if !admissible_4 {
            return Err(Error::LevyIntegrability(alloc::format!("{levy_integral:?}")));
        }
        let exponential = self.measure.exponential_integral(theta);
        let admissible_5 = matches!(&exponential, Ok(i) if i.value.is_finite());
        if let Err(e) = &exponential {
            return Err(e.clone());
        }
        let exponential_integral = Evaluation::from_integral(exponential, "exponential integrability integral");
        if !admissible_5 {
            return Err(Error::ExponentialIntegrability { theta, reason: "integral is not finite".into() });
        }

        let kappa_theta = self.kappa_real(theta)?;
        let kappa_prime_theta = self.kappa_prime_at(theta)?;
        let margin = theta * kappa_prime_theta - kappa_theta;
        let holds = margin < 0.0;
        // the verdict also counts as borderline if it flips within BOUNDARY_THETA
        let flips = [theta - BOUNDARY_THETA, theta + BOUNDARY_THETA]
            .iter()
            .filter(|&&t| t >= 0.0)
            .filter_map(|&t| self.growth_margin(t).ok())
            .any(|m| (m < 0.0) != holds);
        let boundary = abs(margin) < BOUNDARY_MARGIN || flips;
        let cond2 = self.entropy_integral();
        let verdict = if !holds || cond2.is_divergent() {
            Verdict::Degenerate
        } else if cond2.is_finite() {
            Verdict::UniformlyIntegrable
        } else {
            Verdict::Undetermined
        };
        Ok(CriterionReport {
            theta,
            admissible_4,
            levy_integral,
            admissible_5,
            exponential_integral,
            kappa_theta,
            kappa_prime_theta,
            cond1: GrowthCondition { holds, margin, boundary },
            cond2,
            verdict,
            boundary,
            lp: None,
        })
    }

    /// `∫ ⟨x,e_θ⟩^p 1_{⟨x,e_θ⟩>2} Λ(dx)`.
    pub fn lp_integral(&self, p: f64) -> Evaluation {
        let theta = self.theta;
        match &self.measure {
            BranchingLevyMeasure::HeavyOffspring(h) => match h.series(HeavyTerm::Power(p)) {
                Ok(s) => Evaluation::from_series(s),
                Err(e) => Evaluation::Undetermined { method: "series".into(), reason: alloc::format!("{e}") },
            },
            _ => Evaluation::from_integral(
                self.measure.integrate_configs(
                    |a| {
                        let w = a.weighted_sum(theta);
                        if w > 2.0 {
                            a.scale(crate::math::powf(w, p))
                        } else {
                            0.0
                        }
                    },
                    &[],
                ),
                "integral of <x,e_theta>^p over <x,e_theta> > 2",
            ),
        }
    }

    /// The `L^p` criterion: `κ(pθ) < pκ(θ)`, the `p`-th moment integral, and
    /// `κ(qθ) < ∞`.
    pub fn check_lp(&self, p: f64, q: f64) -> Result<LpReport> {
        if !(p > 1.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(alloc::format!("p must lie in (1, 2], got {p}")));
        }
        if !(q > p) {
            return Err(Error::InvalidParameter(alloc::format!("q must exceed p = {p}, got {q}")));
        }
        let theta = self.theta;
        let kappa_theta = self.kappa_real(theta)?;
        let kappa_p_theta = self.kappa_real(p * theta)?;
        let p_kappa_theta = p * kappa_theta;
        let growth = kappa_p_theta < p_kappa_theta;
        let cond3 = self.lp_integral(p);
        let finite_at = |q: f64| self.kappa_real(q * theta).ok().filter(|k| k.is_finite());
        let kappa_q_theta = finite_at(q);
        let probes = [p + 0.1, p + 0.5, 2.0 * p].iter().map(|&q| (q, finite_at(q).is_some())).collect();
        let bounded = growth && cond3.is_finite() && kappa_q_theta.is_some();
        Ok(LpReport { p, q, kappa_p_theta, p_kappa_theta, growth, cond3, kappa_q_theta, probes, bounded })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, BinaryFragmentation, FiniteDiscrete, HeavyOffspring};
    use alloc::vec;

    fn finite(atoms: Vec<(f64, Vec<f64>)>) -> BranchingLevyMeasure {
        BranchingLevyMeasure::Finite(
            FiniteDiscrete::new(atoms.into_iter().map(|(r, c)| Atom::new(r, c).unwrap()).collect()).unwrap(),
        )
    }

    fn yule(theta: f64) -> Triplet {
        Triplet::new(0.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), theta).unwrap()
    }

    fn bbm(beta: f64, theta: f64) -> Triplet {
        Triplet::new(1.0, 0.0, finite(vec![(beta, vec![0.0, 0.0])]), theta).unwrap()
    }

    fn log2_motion() -> Triplet {
        Triplet::new(0.0, 0.0, finite(vec![(1.0, vec![2f64.ln()])]), 1.0).unwrap()
    }

    fn heavy() -> Triplet {
        Triplet::new(0.0, 0.0, BranchingLevyMeasure::HeavyOffspring(HeavyOffspring::new(1.0, 2.0, 3, None).unwrap()), 1.0)
            .unwrap()
    }

    fn fragmentation() -> Triplet {
        Triplet::new(0.0, 0.0, BranchingLevyMeasure::Fragmentation(BinaryFragmentation::new(0.5, 1.0).unwrap()), 1.0)
            .unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert!((yule(1.3).kappa_real(1.3).unwrap() - 1.0).abs() < 1e-15);
        let drift = Triplet::new(0.0, 1.0, BranchingLevyMeasure::zero(), 2.0).unwrap();
        assert_eq!(drift.kappa_real(2.0).unwrap(), 2.0);
        let k = log2_motion().kappa_real(1.0).unwrap();
        assert!((k - (1.0 - 2f64.ln())).abs() < 1e-15, "{k}");
    }

    #[test]
    fn kappa_prime_examples() {
        assert_eq!(yule(0.7).kappa_prime().unwrap(), 0.0);
        assert!((bbm(1.0, 1.7).kappa_prime().unwrap() - 1.7).abs() < 1e-15);
        let drift = Triplet::new(0.0, 1.0, BranchingLevyMeasure::zero(), 2.0).unwrap();
        assert_eq!(drift.kappa_prime().unwrap(), 1.0);
    }

    #[test]
    fn exponents() {
        let bm = Triplet::new(1.0, 0.0, BranchingLevyMeasure::zero(), 0.0).unwrap();
        assert!((bm.levy_exponent(1.0).unwrap() - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        assert_eq!(yule(1.0).levy_exponent(3.0).unwrap(), Complex64::new(0.0, 0.0));
        let l2 = 2f64.ln();
        let expected = Complex64::new(0.0, l2).exp() - 1.0 - Complex64::new(0.0, l2);
        assert!((log2_motion().levy_exponent(1.0).unwrap() - expected).norm() < 1e-15);
        let s = bbm(1.0, 1.0).spine_exponent(1.0).unwrap();
        assert!((s - Complex64::new(-0.5, 1.0)).norm() < 1e-14, "{s}");
        assert_eq!(yule(1.0).spine_exponent(2.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn spine_drift_examples() {
        assert_eq!(yule(1.0).spine_drift().unwrap(), 0.0);
        assert_eq!(bbm(1.0, 1.0).spine_drift().unwrap(), 1.0);
        assert!((log2_motion().spine_drift().unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn spine_exponent_identity_all_families() {
        for t in [yule(1.0), bbm(1.0, 1.0), log2_motion(), heavy(), fragmentation()] {
            for r in [0.1, 0.5, 1.0, 2.0, 5.0] {
                let a = t.spine_exponent(r).unwrap();
                let b = t.spine_exponent_direct(r).unwrap();
                assert!((a - b).norm() < 1e-10, "{:?} r={r}: {a} vs {b}", t.measure);
            }
        }
    }

    #[test]
    fn kappa_prime_matches_finite_differences() {
        for t in [yule(1.0), bbm(1.0, 1.0), log2_motion(), heavy(), fragmentation()] {
            let h = 1e-5;
            let fd = (t.kappa_real(t.theta + h).unwrap() - t.kappa_real(t.theta - h).unwrap()) / (2.0 * h);
            let k = t.kappa_prime().unwrap();
            assert!((fd - k).abs() <= 1e-6 * k.abs().max(1.0), "{:?}: {fd} vs {k}", t.measure);
        }
    }

    #[test]
    fn criterion_examples() {
        let r = bbm(1.0, 1.0).check_criterion().unwrap();
        assert!(r.cond1.holds && r.cond2.is_finite());
        assert_eq!(r.verdict, Verdict::UniformlyIntegrable);
        let r = bbm(1.0, 1.6).check_criterion().unwrap();
        assert!(!r.cond1.holds);
        assert_eq!(r.verdict, Verdict::Degenerate);
        let r = heavy().check_criterion().unwrap();
        assert!(r.cond1.holds && r.cond2.is_divergent() && r.admissible_5);
        assert_eq!(r.verdict, Verdict::Degenerate);
    }

    #[test]
    fn boundary_flag_near_threshold() {
        let star = 2f64.sqrt();
        assert!(bbm(1.0, star).check_criterion().unwrap().boundary);
        assert!(bbm(1.0, star + 5e-7).check_criterion().unwrap().boundary);
        assert!(!bbm(1.0, star + 1e-3).check_criterion().unwrap().boundary);
    }

    #[test]
    fn lp_examples() {
        let r = yule(1.0).check_lp(2.0, 3.0).unwrap();
        assert!(r.bounded && r.cond3.value() == Some(0.0));
        let r = bbm(1.0, 1.0).check_lp(2.0, 3.0).unwrap();
        assert!(!r.growth && !r.bounded);
        let r = heavy().check_lp(2.0, 3.0).unwrap();
        assert!(r.cond3.is_divergent() && !r.bounded);
        // p = 1 consistency: κ(pθ) - pκ(θ) vanishes
        let t = fragmentation();
        assert_eq!(t.kappa_real(1.0 * t.theta).unwrap() - 1.0 * t.kappa_real(t.theta).unwrap(), 0.0);
    }

    #[test]
    fn tail_dichotomy_agrees_with_entropy_condition() {
        for t in [yule(1.0), bbm(1.0, 1.0), log2_motion(), heavy(), fragmentation()] {
            let cond2 = t.entropy_integral();
            for c in [0.1, 1.0, 10.0] {
                let d = t.tail_integral_dichotomy(c).unwrap();
                assert_eq!(d.evaluation.is_finite(), cond2.is_finite(), "{:?}", t.measure);
            }
        }
    }

    #[test]
    fn fragmentation_inadmissible_below_alpha() {
        let t = fragmentation().with_theta(0.3).unwrap();
        assert!(matches!(t.check_criterion(), Err(Error::ExponentialIntegrability { .. })));
    }
}
