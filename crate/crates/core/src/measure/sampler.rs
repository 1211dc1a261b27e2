use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp;

use super::{weighted_sum, BinaryFragmentation, BranchingLevyMeasure, HeavyOffspring, PointConfiguration};
use crate::error::{Error, Result};
use crate::math::{abs, exp, expm1, ln, ln_1p, powf};

/// Which atoms of `Λ` a sampler draws from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Part {
    /// Death or birth events: `x_1 = -∞` or `x_2 > -∞`.
    Branch,
    /// Pure jumps of the parent with `|x_1| ≥ cutoff`.
    Motion { cutoff: f64 },
    /// Everything except pure jumps with `|x_1| < cutoff`.
    Events { cutoff: f64 },
}

impl Part {
    fn keeps(&self, config: &PointConfiguration) -> bool {
        match *self {
            Part::Branch => !config.is_motion_only(),
            Part::Motion { cutoff } => config.is_motion_only() && abs(config.first()) >= cutoff,
            Part::Events { cutoff } => !config.is_motion_only() || abs(config.first()) >= cutoff,
        }
    }
}

/// A part of `Λ`, optionally size-biased by `⟨x, e_θ⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub part: Part,
    pub tilt: Option<f64>,
}

/// Draws configurations with probability proportional to their (tilted) rate.
#[derive(Clone, Debug)]
pub enum AtomSampler {
    Empty,
    Table(TableSampler),
    Heavy(HeavySampler),
    Fragmentation(FragmentSampler),
}

impl AtomSampler {
    /// `index_cap` bounds the offspring index of heavy-offspring atoms, which
    /// must be materialized as configurations.
    pub fn new(measure: &BranchingLevyMeasure, selection: Selection, index_cap: u64) -> Result<Self> {
        match measure {
            BranchingLevyMeasure::Finite(f) => {
                let mut configs = Vec::new();
                let mut rates = Vec::new();
                for a in f.atoms() {
                    if !selection.part.keeps(&a.config) {
                        continue;
                    }
                    let rate = match selection.tilt {
                        Some(theta) => a.rate * a.config.weighted_sum(theta),
                        None => a.rate,
                    };
                    if rate > 0.0 {
                        configs.push(a.config.clone());
                        rates.push(rate);
                    }
                }
                if configs.is_empty() {
                    return Ok(AtomSampler::Empty);
                }
                let total = crate::math::kahan_sum(rates.iter().copied());
                let index = WeightedIndex::new(&rates).map_err(|e| Error::InvalidMeasure(alloc::format!("{e}")))?;
                Ok(AtomSampler::Table(TableSampler { configs, index, total }))
            }
            BranchingLevyMeasure::HeavyOffspring(h) => match selection.part {
                Part::Motion { .. } => Ok(AtomSampler::Empty),
                Part::Branch | Part::Events { .. } => {
                    Ok(AtomSampler::Heavy(HeavySampler::new(h, selection.tilt.is_some(), index_cap)?))
                }
            },
            BranchingLevyMeasure::Fragmentation(f) => {
                let b = f.branch_threshold();
                let (lo, hi) = match selection.part {
                    Part::Branch => (b, 0.5),
                    Part::Motion { cutoff } => (-expm1(-cutoff), b),
                    Part::Events { cutoff } => (b.min(-expm1(-cutoff)), 0.5),
                };
                if !(hi > lo) {
                    return Ok(AtomSampler::Empty);
                }
                if lo <= 0.0 {
                    return Err(Error::InfiniteBranchingRate(
                        "fragmentation events accumulate at v = 0; set a truncation level and a positive small-jump cutoff"
                            .into(),
                    ));
                }
                Ok(AtomSampler::Fragmentation(FragmentSampler::new(f, lo, hi, selection.tilt)?))
            }
        }
    }

    pub fn total_rate(&self) -> f64 {
        match self {
            AtomSampler::Empty => 0.0,
            AtomSampler::Table(t) => t.total,
            AtomSampler::Heavy(h) => h.total,
            AtomSampler::Fragmentation(f) => f.total,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total_rate() <= 0.0
    }

    /// One configuration. Panics on an empty sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointConfiguration {
        match self {
            AtomSampler::Empty => panic!("sampling from an empty measure"),
            AtomSampler::Table(t) => t.configs[t.index.sample(rng)].clone(),
            AtomSampler::Heavy(h) => PointConfiguration::repeated_zero(h.sample_index(rng) as usize),
            AtomSampler::Fragmentation(f) => f.sample(rng),
        }
    }
}

/// Waiting time `Exp(R)` and a configuration, `R` being the total rate.
pub fn sample_atom<R: Rng + ?Sized>(sampler: &AtomSampler, rng: &mut R) -> Result<(f64, PointConfiguration)> {
    let rate = sampler.total_rate();
    if !(rate > 0.0) {
        return Err(Error::NoBranchingEvents);
    }
    let wait = Exp::new(rate).map_err(|_| Error::InfiniteBranchingRate(alloc::format!("rate {rate}")))?.sample(rng);
    Ok((wait, sampler.sample(rng)))
}

#[derive(Clone, Debug)]
pub struct TableSampler {
    configs: Vec<PointConfiguration>,
    index: WeightedIndex<f64>,
    total: f64,
}

/// Offspring sizes `m ∈ [first, cap]` with weights `λ_m` (or `λ_m m`): a table
/// for the first indices and rejection from an explicit proposal beyond.
#[derive(Clone, Debug)]
pub struct HeavySampler {
    first: u64,
    table_end: u64,
    cap: u64,
    beta: f64,
    tilted: bool,
    table: WeightedIndex<f64>,
    table_mass: f64,
    tail_mass: f64,
    total: f64,
}

const HEAVY_TABLE_LEN: u64 = 4096;

impl HeavySampler {
    fn new(h: &HeavyOffspring, tilted: bool, index_cap: u64) -> Result<Self> {
        let cap = h.index_cap.map_or(index_cap, |c| c.min(index_cap));
        if cap < h.first_index {
            return Err(Error::InvalidParameter(alloc::format!("index cap {cap} is below the first offspring index")));
        }
        let weight = |m: u64| {
            let m = m as f64;
            if tilted {
                h.rate(m) * m
            } else {
                h.rate(m)
            }
        };
        let table_end = cap.min(h.first_index + HEAVY_TABLE_LEN - 1);
        let weights: Vec<f64> = (h.first_index..=table_end).map(weight).collect();
        let table_mass = crate::math::kahan_sum(weights.iter().copied());
        let table = WeightedIndex::new(&weights).map_err(|e| Error::InvalidMeasure(alloc::format!("{e}")))?;
        let tail_mass = crate::math::kahan_sum((table_end + 1..=cap).rev().map(weight));
        Ok(Self {
            first: h.first_index,
            table_end,
            cap,
            beta: h.log_exponent,
            tilted,
            table,
            table_mass,
            tail_mass,
            total: table_mass + tail_mass,
        })
    }

    fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.tail_mass == 0.0 || rng.random::<f64>() * self.total < self.table_mass {
            return self.first + self.table.sample(rng) as u64;
        }
        let t = self.table_end as f64;
        let ln_t = ln(t);
        loop {
            let u = 1.0 - rng.random::<f64>();
            let accept = rng.random::<f64>();
            if self.tilted {
                // P(m > k) = ln T / ln k for k ≥ T; m = floor(T^{1/U}) + 1
                let x = exp(ln_t / u);
                if !(x < self.cap as f64) {
                    continue;
                }
                let m = libm::floor(x) + 1.0;
                let lm = ln(m);
                let gap = -ln_1p(-1.0 / m);
                let reference = if self.beta >= 2.0 { ln_t } else { ln(self.cap as f64) };
                let ratio = (ln(m - 1.0) / lm) * (1.0f64 / (m * gap)).min(1.0) * powf(lm / reference, 2.0 - self.beta);
                if accept < ratio {
                    return m as u64;
                }
            } else {
                // P(m > k) = T / k for k ≥ T; m = floor(T / U) + 1
                let x = t / u;
                if !(x < self.cap as f64) {
                    continue;
                }
                let m = libm::floor(x) + 1.0;
                let ratio = ((m - 1.0) / m) * powf(ln_t / ln(m), self.beta);
                if accept < ratio {
                    return m as u64;
                }
            }
        }
    }
}

/// Dislocations with `v ∈ [lo, hi]`, drawn from the power law by inverse CDF,
/// then thinned by `⟨x, e_θ⟩ / bound` when tilted.
#[derive(Clone, Debug)]
pub struct FragmentSampler {
    family: BinaryFragmentation,
    lo_pow: f64,
    hi_pow: f64,
    tilt: Option<(f64, f64)>,
    total: f64,
}

impl FragmentSampler {
    fn new(f: &BinaryFragmentation, lo: f64, hi: f64, tilt: Option<f64>) -> Result<Self> {
        let a = f.alpha;
        let untilted = f.untilted_mass(lo, hi);
        let (tilt, total) = match tilt {
            None => (None, untilted),
            Some(theta) => {
                let bound = powf(2.0, 1.0 - theta).max(1.0);
                let mass = f.integrate_v_range(|x| x.scale(weighted_sum(x.entries, theta)), lo, hi)?.value;
                (Some((theta, bound)), mass)
            }
        };
        Ok(Self { family: f.clone(), lo_pow: powf(lo, -a), hi_pow: powf(hi, -a), tilt, total })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PointConfiguration {
        let a = self.family.alpha;
        loop {
            let u: f64 = rng.random();
            let y = self.lo_pow - u * (self.lo_pow - self.hi_pow);
            let v = powf(y, -1.0 / a);
            let (x, len) = self.family.entries_at_v(v);
            let entries = &x[..len];
            if let Some((theta, bound)) = self.tilt {
                if rng.random::<f64>() * bound >= weighted_sum(entries, theta) {
                    continue;
                }
            }
            return PointConfiguration::from_ranked_unchecked(entries.to_vec());
        }
    }
}
