use alloc::vec::Vec;

use super::{AtomView, PointConfiguration};
use crate::error::{Error, Result};
use crate::math::ln;
use crate::quad::Integral;

/// One atom of a finite branching Lévy measure.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Atom {
    /// Events per unit time.
    pub rate: f64,
    pub config: PointConfiguration,
}

impl Atom {
    pub fn new(rate: f64, entries: Vec<f64>) -> Result<Self> {
        Ok(Self { rate, config: PointConfiguration::new(entries)? })
    }
}

/// `Λ = Σ_i λ_i δ_{x^i}`.
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteDiscrete {
    atoms: Vec<Atom>,
}

impl FiniteDiscrete {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if !(a.rate > 0.0 && a.rate.is_finite()) {
                return Err(Error::InvalidMeasure(alloc::format!("atom {i}: rate must be finite and > 0, got {}", a.rate)));
            }
            if a.config.is_forbidden() {
                return Err(Error::InvalidMeasure(alloc::format!("atom {i}: the configuration (0, -inf, ...) is not allowed")));
            }
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.rate).sum()
    }

    pub(crate) fn truncate(&self, n: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { rate: a.rate, config: a.config.censored(n) })
            .filter(|a| !a.config.is_forbidden())
            .collect();
        Self { atoms }
    }

    pub(crate) fn integrate<F: Fn(&AtomView) -> f64>(&self, f: F) -> Integral {
        let value = crate::math::kahan_sum(
            self.atoms.iter().map(|a| f(&AtomView { entries: a.config.finite(), log_weight: ln(a.rate) })),
        );
        Integral::exact(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_atoms() {
        assert!(FiniteDiscrete::new(vec![Atom::new(-1.0, vec![0.0, 0.0]).unwrap()]).is_err());
        assert!(FiniteDiscrete::new(vec![Atom::new(1.0, vec![0.0]).unwrap()]).is_err());
        assert!(FiniteDiscrete::new(vec![Atom::new(1.0, vec![0.1]).unwrap()]).is_ok());
    }

    #[test]
    fn truncation_drops_atoms_that_become_forbidden() {
        let m = FiniteDiscrete::new(vec![
            Atom::new(1.0, vec![0.0, -7.0]).unwrap(),
            Atom::new(2.0, vec![0.5, -3.0, -7.0]).unwrap(),
        ])
        .unwrap();
        let t = m.truncate(5.0);
        assert_eq!(t.atoms().len(), 1);
        assert_eq!(t.atoms()[0].config.finite(), &[0.5, -3.0]);
    }
}
