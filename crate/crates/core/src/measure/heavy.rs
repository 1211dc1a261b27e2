use crate::error::{Error, Result};
use crate::math::{exp, expm1, ln, ln_1p, powf};
use crate::series::{partial_sums, power_log_converges, sum_decreasing, SeriesOutcome, SeriesSum};

/// Atoms `c_m = (0, ..., 0)` (`m` zeros) with rate `λ_m = s · m^{-2} (ln m)^{-β}`
/// for `m ≥ first_index`, optionally cut at `index_cap`.
///
/// With `β = 2`: `Σ λ_m (m-1) < ∞` but `Σ λ_m m (ln m - 1)^+ = ∞`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeavyOffspring {
    pub(crate) scale: f64,
    pub(crate) log_exponent: f64,
    pub(crate) first_index: u64,
    pub(crate) index_cap: Option<u64>,
}

/// The factor `φ(m)` in a series `Σ λ_m φ(m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeavyTerm {
    /// `1`: total rate.
    Count,
    /// `m - 1`: `κ` and the exponential condition.
    Offspring,
    /// `m = ⟨c_m, e_θ⟩`: total tilted rate.
    Size,
    /// `m (ln m - 1)^+`.
    EntropyPlus,
    /// `m ln(m - 1) / c`: time spent by `Λ̂(⟨x,e_θ⟩ > e^{ct} + 1)`.
    TailLog { c: f64 },
    /// `m^p`.
    Power(f64),
}

impl HeavyTerm {
    fn phi(&self, m: f64) -> f64 {
        match *self {
            HeavyTerm::Count => 1.0,
            HeavyTerm::Offspring => m - 1.0,
            HeavyTerm::Size => m,
            HeavyTerm::EntropyPlus => m * (ln(m) - 1.0).max(0.0),
            HeavyTerm::TailLog { c } => m * ln(m - 1.0) / c,
            HeavyTerm::Power(p) => powf(m, p),
        }
    }

    /// `φ(e^u) / e^u`, evaluated without overflow.
    fn phi_over_x(&self, u: f64) -> f64 {
        match *self {
            HeavyTerm::Count => exp(-u),
            HeavyTerm::Offspring => -expm1(-u),
            HeavyTerm::Size => 1.0,
            HeavyTerm::EntropyPlus => (u - 1.0).max(0.0),
            HeavyTerm::TailLog { c } => (u + ln_1p(-exp(-u))) / c,
            HeavyTerm::Power(p) => exp((p - 1.0) * u),
        }
    }

    /// `(a, b)` with `φ(m) ≍ m^a (ln m)^b`.
    fn growth(&self) -> (f64, f64) {
        match *self {
            HeavyTerm::Count => (0.0, 0.0),
            HeavyTerm::Offspring | HeavyTerm::Size => (1.0, 0.0),
            HeavyTerm::EntropyPlus | HeavyTerm::TailLog { .. } => (1.0, 1.0),
            HeavyTerm::Power(p) => (p, 0.0),
        }
    }
}

const EVIDENCE_CHECKPOINTS: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

impl HeavyOffspring {
    pub fn new(scale: f64, log_exponent: f64, first_index: u64, index_cap: Option<u64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidMeasure(alloc::format!("rate scale must be finite and > 0, got {scale}")));
        }
        if !(log_exponent > 0.0 && log_exponent.is_finite()) {
            return Err(Error::InvalidMeasure(alloc::format!("log exponent must be finite and > 0, got {log_exponent}")));
        }
        if first_index < 3 {
            return Err(Error::InvalidMeasure("offspring index must start at 3 or later".into()));
        }
        if let Some(cap) = index_cap {
            if cap < first_index {
                return Err(Error::InvalidMeasure(alloc::format!("index cap {cap} is below the first index {first_index}")));
            }
        }
        Ok(Self { scale, log_exponent, first_index, index_cap })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn log_exponent(&self) -> f64 {
        self.log_exponent
    }

    pub fn first_index(&self) -> u64 {
        self.first_index
    }

    pub fn index_cap(&self) -> Option<u64> {
        self.index_cap
    }

    /// The same family restricted to `m ≤ cap` (keeps a tighter existing cap).
    pub fn with_cap(&self, cap: u64) -> Self {
        let cap = self.index_cap.map_or(cap, |c| c.min(cap)).max(self.first_index);
        Self { index_cap: Some(cap), ..self.clone() }
    }

    /// `λ_m`.
    pub fn rate(&self, m: f64) -> f64 {
        self.scale / (m * m * powf(ln(m), self.log_exponent))
    }

    /// `Σ_m λ_m φ(m)`, certified finite or divergent.
    pub fn series(&self, term: HeavyTerm) -> Result<SeriesOutcome> {
        let f = |m: f64| self.rate(m) * term.phi(m);
        let beta = self.log_exponent;
        let s = self.scale;
        // f(e^u) e^u = s e^{-u} u^{-β} φ(e^u)
        let g = |u: f64| s * powf(u, -beta) * term.phi_over_x(u);
        let (a, b) = term.growth();
        let comparison = (a - 2.0, b - beta);
        match self.index_cap {
            Some(cap) => Ok(SeriesOutcome::Finite(sum_decreasing(f, g, self.first_index, Some(cap))?)),
            None if power_log_converges(comparison.0, comparison.1) => {
                Ok(SeriesOutcome::Finite(sum_decreasing(f, g, self.first_index, None)?))
            }
            None => {
                let checkpoints: alloc::vec::Vec<u64> =
                    EVIDENCE_CHECKPOINTS.iter().copied().filter(|&c| c >= self.first_index).collect();
                Ok(SeriesOutcome::Divergent { comparison, partial_sums: partial_sums(f, self.first_index, &checkpoints) })
            }
        }
    }

    /// `Σ λ_m (m - 1)`: the exponential integral, and also `κ(z)` for every `z`
    /// since all displacements vanish.
    pub fn offspring_series(&self, theta: f64) -> Result<SeriesSum> {
        match self.series(HeavyTerm::Offspring)? {
            SeriesOutcome::Finite(s) => Ok(s),
            SeriesOutcome::Divergent { .. } => Err(Error::ExponentialIntegrability {
                theta,
                reason: alloc::format!(
                    "sum of rate(m) * (m - 1) diverges for log exponent {} <= 1",
                    self.log_exponent
                ),
            }),
        }
    }
}
