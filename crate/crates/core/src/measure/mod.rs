//! Branching Lévy measures `Λ` on ranked point configurations.
//!
//! Three families are built in:
//!
//! * [`FiniteDiscrete`]: finitely many atoms with positive rates (Yule,
//!   branching Brownian motion, pure-jump motions, ...).
//! * [`HeavyOffspring`]: atom `m` is `m` particles at the origin with rate
//!   `s · m^{-2} (ln m)^{-β}`; integrals are series with certified tails.
//! * [`BinaryFragmentation`]: dislocations `(ln u, ln(1-u))` with density
//!   `c (1-u)^{-1-α}` on `[1/2, 1)`; integrals by adaptive quadrature.
//!
//! Truncation `π_n` (every displacement below `-n` becomes `-∞`) rewrites the
//! atoms of a finite measure and is recorded as a level for the parametric
//! families.

mod config;
mod finite;
mod fragmentation;
mod heavy;
mod sampler;

use alloc::format;

pub use config::{sample_spine_index, weighted_sum, PointConfiguration};
pub use finite::{Atom, FiniteDiscrete};
pub use fragmentation::BinaryFragmentation;
pub use heavy::{HeavyOffspring, HeavyTerm};
pub use sampler::{sample_atom, AtomSampler, Part, Selection};

use crate::error::{Error, Result};
use crate::math::{exp, ln};
use crate::quad::Integral;

/// An atom of `Λ` (or a point of a quadrature rule) seen by an integrand:
/// finite entries plus the log of the mass attached to it.
#[derive(Clone, Copy, Debug)]
pub struct AtomView<'a> {
    pub entries: &'a [f64],
    pub log_weight: f64,
}

impl AtomView<'_> {
    pub fn first(&self) -> f64 {
        self.entries.first().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_motion_only(&self) -> bool {
        self.entries.len() == 1
    }

    /// `value · mass`, computed in log space when the mass overflows.
    pub fn scale(&self, value: f64) -> f64 {
        if value == 0.0 {
            return 0.0;
        }
        if self.log_weight < 700.0 {
            value * exp(self.log_weight)
        } else {
            value.signum() * exp(ln(value.abs()) + self.log_weight)
        }
    }

    /// `e^{θ x} · mass`, zero for `x = -∞`.
    pub fn scaled_exp(&self, theta: f64, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            0.0
        } else {
            exp(theta * x + self.log_weight)
        }
    }

    pub fn weighted_sum(&self, theta: f64) -> f64 {
        weighted_sum(self.entries, theta)
    }
}

/// A branching Lévy measure `Λ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum BranchingLevyMeasure {
    Finite(FiniteDiscrete),
    HeavyOffspring(HeavyOffspring),
    Fragmentation(BinaryFragmentation),
}

impl BranchingLevyMeasure {
    /// `Λ = 0`.
    pub fn zero() -> Self {
        Self::Finite(FiniteDiscrete::default())
    }

    /// Image of `Λ` under `π_n`.
    pub fn truncate(&self, n: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(Error::InvalidParameter(format!("truncation level must be > 0, got {n}")));
        }
        Ok(match self {
            Self::Finite(f) => Self::Finite(f.truncate(n)),
            Self::HeavyOffspring(h) => Self::HeavyOffspring(h.clone()),
            Self::Fragmentation(f) => Self::Fragmentation(f.truncate(n)),
        })
    }

    /// Truncation level recorded on a parametric family.
    pub fn truncation(&self) -> Option<f64> {
        match self {
            Self::Finite(_) | Self::HeavyOffspring(_) => None,
            Self::Fragmentation(f) => f.truncation,
        }
    }

    /// Integrates `f` against `Λ`. Heavy-offspring measures are handled by
    /// series in the callers instead.
    pub(crate) fn integrate_configs<F>(&self, f: F, extra_breaks_v: &[f64]) -> Result<Integral>
    where
        F: Fn(&AtomView) -> f64,
    {
        match self {
            Self::Finite(m) => Ok(m.integrate(f)),
            Self::Fragmentation(m) => m.integrate(f, extra_breaks_v),
            Self::HeavyOffspring(_) => {
                Err(Error::InvalidMeasure("heavy-offspring integrals are evaluated as series".into()))
            }
        }
    }

    /// `∫ (1 ∧ x_1²) Λ(dx)`.
    pub fn levy_integral(&self) -> Result<Integral> {
        match self {
            // x_1 = 0 for every atom
            Self::HeavyOffspring(_) => Ok(Integral::ZERO),
            Self::Fragmentation(f) if f.alpha >= 2.0 => Err(Error::LevyIntegrability(format!(
                "dislocation density exponent alpha = {} must be < 2",
                f.alpha
            ))),
            _ => self.integrate_configs(
                |a| {
                    let x1 = a.first();
                    a.scale(if x1 == f64::NEG_INFINITY { 1.0 } else { (x1 * x1).min(1.0) })
                },
                &[],
            ),
        }
    }

    /// `∫ (1_{x_1>1} e^{θ x_1} + Σ_{k≥2} e^{θ x_k}) Λ(dx)`.
    pub fn exponential_integral(&self, theta: f64) -> Result<Integral> {
        if !(theta >= 0.0) {
            return Err(Error::InvalidParameter(format!("theta must be >= 0, got {theta}")));
        }
        match self {
            Self::HeavyOffspring(h) => h.offspring_series(theta).map(|s| s.as_integral()),
            Self::Fragmentation(f) => {
                f.check_exponential(theta)?;
                self.integrate_configs(|a| exponential_integrand(a, theta), &[])
            }
            Self::Finite(_) => self.integrate_configs(|a| exponential_integrand(a, theta), &[]),
        }
    }

    /// The size-biased measure `⟨x, e_θ⟩ Λ(dx)`.
    pub fn tilt(&self, theta: f64) -> Result<TiltedMeasure> {
        let integral = self.exponential_integral(theta)?;
        if !integral.value.is_finite() {
            return Err(Error::ExponentialIntegrability { theta, reason: "integral is infinite".into() });
        }
        Ok(TiltedMeasure { base: self.clone(), theta })
    }
}

fn exponential_integrand(a: &AtomView, theta: f64) -> f64 {
    let x1 = a.first();
    let mut total = if x1 > 1.0 { a.scaled_exp(theta, x1) } else { 0.0 };
    for &x in a.entries.iter().skip(1) {
        total += a.scaled_exp(theta, x);
    }
    total
}

/// `Λ̂(dx) = ⟨x, e_θ⟩ Λ(dx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltedMeasure {
    pub base: BranchingLevyMeasure,
    pub theta: f64,
}

impl TiltedMeasure {
    /// Tilted rate of a single configuration charged with base rate `rate`.
    pub fn rate_of(&self, rate: f64, config: &PointConfiguration) -> f64 {
        rate * config.weighted_sum(self.theta)
    }

    /// Atoms with tilted rates, for finite measures.
    pub fn finite_atoms(&self) -> Option<alloc::vec::Vec<(f64, PointConfiguration)>> {
        match &self.base {
            BranchingLevyMeasure::Finite(f) => {
                Some(f.atoms().iter().map(|a| (self.rate_of(a.rate, &a.config), a.config.clone())).collect())
            }
            _ => None,
        }
    }

    /// Sampler over the events of the truncated tilted measure.
    pub fn sampler(&self, truncation: Option<f64>, small_jump_cutoff: f64, index_cap: u64) -> Result<AtomSampler> {
        let base = match truncation {
            Some(n) => self.base.truncate(n)?,
            None => self.base.clone(),
        };
        AtomSampler::new(
            &base,
            Selection { part: Part::Events { cutoff: small_jump_cutoff }, tilt: Some(self.theta) },
            index_cap,
        )
    }
}
