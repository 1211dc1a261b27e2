use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::exp_weight;

/// A ranked sequence of displacements `x_1 ≥ x_2 ≥ ...` in `[-∞, ∞)`.
///
/// Only the finite prefix is stored; every entry past it is `-∞` (a
/// non-existing particle). Equal entries keep their construction order.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<f64>", into = "Vec<f64>"))]
pub struct PointConfiguration {
    entries: Vec<f64>,
}

impl PointConfiguration {
    /// Builds a configuration from ranked entries. `-∞` entries may only form
    /// a tail; NaN and `+∞` are rejected.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let mut finite_len = entries.len();
        for (k, &x) in entries.iter().enumerate() {
            if x.is_nan() || x == f64::INFINITY {
                return Err(Error::InvalidConfiguration("entries must lie in [-inf, inf)".to_string()));
            }
            if k > 0 && x > entries[k - 1] {
                return Err(Error::InvalidConfiguration(alloc::format!(
                    "entries must be non-increasing (entry {} = {x} follows {})",
                    k + 1,
                    entries[k - 1]
                )));
            }
            if x == f64::NEG_INFINITY && finite_len == entries.len() {
                finite_len = k;
            }
        }
        let mut entries = entries;
        entries.truncate(finite_len);
        Ok(Self { entries })
    }

    /// `m` particles at the parent's position.
    pub fn repeated_zero(m: usize) -> Self {
        Self { entries: alloc::vec![0.0; m] }
    }

    /// The configuration in which the parent dies without offspring.
    pub fn death() -> Self {
        Self { entries: Vec::new() }
    }

    pub(crate) fn from_ranked_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0] >= w[1]));
        debug_assert!(entries.iter().all(|x| x.is_finite()));
        Self { entries }
    }

    /// Finite entries, in rank order.
    pub fn finite(&self) -> &[f64] {
        &self.entries
    }

    /// Number of existing (finite) particles.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `k` (1-based, as in `x_k`); `-∞` past the stored prefix.
    pub fn entry(&self, k: usize) -> f64 {
        assert!(k >= 1, "entries are 1-based");
        self.entries.get(k - 1).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `x_1`, or `-∞` for the death configuration.
    pub fn first(&self) -> f64 {
        self.entry(1)
    }

    /// `(0, -∞, -∞, ...)`, which a branching Lévy measure may not charge.
    pub fn is_forbidden(&self) -> bool {
        self.entries.len() == 1 && self.entries[0] == 0.0
    }

    /// Only `x_1` is finite: a pure jump of the parent.
    pub fn is_motion_only(&self) -> bool {
        self.entries.len() == 1
    }

    /// `⟨x, e_θ⟩ = Σ_k e^{θ x_k}`.
    pub fn weighted_sum(&self, theta: f64) -> f64 {
        weighted_sum(&self.entries, theta)
    }

    /// Image under the censoring map: entries below `-n` become `-∞`.
    pub fn censored(&self, n: f64) -> Self {
        let keep = self.entries.iter().take_while(|&&x| x >= -n).count();
        Self { entries: self.entries[..keep].to_vec() }
    }
}

impl TryFrom<Vec<f64>> for PointConfiguration {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PointConfiguration> for Vec<f64> {
    fn from(c: PointConfiguration) -> Vec<f64> {
        c.entries
    }
}

pub fn weighted_sum(entries: &[f64], theta: f64) -> f64 {
    crate::math::kahan_sum(entries.iter().map(|&x| exp_weight(theta, x)))
}

/// Draws the spine child: index `k` (1-based) with probability
/// `e^{θ x_k} / ⟨x, e_θ⟩`.
pub fn sample_spine_index<R: Rng + ?Sized>(config: &PointConfiguration, theta: f64, rng: &mut R) -> Result<usize> {
    let total = config.weighted_sum(theta);
    if config.is_empty() || total <= 0.0 {
        return Err(Error::EmptyConfiguration);
    }
    // configurations with many equal entries are common (heavy offspring)
    if let (Some(&hi), Some(&lo)) = (config.entries.first(), config.entries.last()) {
        if hi == lo {
            return Ok(rng.random_range(1..=config.len()));
        }
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &x) in config.entries.iter().enumerate() {
        acc += exp_weight(theta, x);
        if target < acc {
            return Ok(k + 1);
        }
    }
    Ok(config.len())
}
