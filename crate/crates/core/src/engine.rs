//! Event-driven simulation of the (truncated) branching Lévy process and the
//! additive martingale.
//!
//! The truncated measure is split into a motion part (pure jumps of the
//! parent) and a branch part with finite total rate. Branch events are run as
//! one population-level Poisson clock of rate `N · R_branch` with a uniformly
//! chosen particle, which has the same law as independent per-particle clocks.
//! Motion between events is sampled lazily and exactly: Gaussian plus drift
//! plus the compound Poisson process of motion jumps with `|x_1| ≥ ε`, whose
//! smaller jumps are replaced by their compensator.
//!
//! Every particle carries the largest downward displacement `req` seen along
//! its ancestry. It belongs to the `π_ℓ`-truncated system iff `req ≤ ℓ`, which
//! couples all truncation levels below the simulated one on a single run.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};

use crate::cumulant::Triplet;
use crate::error::{Error, Result};
use crate::math::{abs, exp, exp_m1_minus, expm1, ln, powf, sqrt};
use crate::measure::{AtomSampler, AtomView, BranchingLevyMeasure, Part, Selection};
use crate::rng::{stream, Purpose, Stream};

/// Hard limits for one replica.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Caps {
    pub max_particles: usize,
    pub max_events: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Self { max_particles: 2_000_000, max_events: 50_000_000 }
    }
}

/// Simulation settings shared by every replica.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimOptions {
    /// Level `n` of `π_n`; `None` picks one from `branch_rate_budget` when the
    /// measure needs it.
    pub truncation: Option<f64>,
    /// Motion jumps with `|x_1|` below this are replaced by their compensator.
    pub small_jump_cutoff: f64,
    /// Largest offspring index materialized for heavy-offspring measures.
    pub index_cap: u64,
    /// Per-particle branch rate used to choose a default truncation level.
    pub branch_rate_budget: f64,
    pub caps: Caps,
    /// Keep particle positions in the snapshots.
    pub record_positions: bool,
    /// Lower truncation levels whose masses are read off the same run.
    pub ladder: Vec<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            truncation: None,
            small_jump_cutoff: 1e-3,
            index_cap: 1 << 20,
            branch_rate_budget: 20.0,
            caps: Caps::default(),
            record_positions: false,
            ladder: Vec::new(),
        }
    }
}

/// The motion of a single particle between its branch events.
#[derive(Clone, Debug)]
pub struct MotionSpec {
    pub sigma2: f64,
    /// `a` minus the small-jump compensation carried by the branch part.
    pub a_eff: f64,
    /// Motion jumps with `|x_1| ≥ ε`.
    pub jumps: AtomSampler,
    /// `∫_{ε ≤ |x_1| < 1} x_1 Λ_motion(dx)`.
    pub compensation: f64,
}

impl MotionSpec {
    fn is_deterministic(&self) -> bool {
        self.sigma2 == 0.0 && self.jumps.is_empty()
    }

    /// Drift per unit time once the jump compensation is included.
    pub fn drift(&self) -> f64 {
        self.a_eff - self.compensation
    }
}

/// Increment over `dt` and the smallest jump taken (`+∞` if none).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionStep {
    pub increment: f64,
    pub min_jump: f64,
}

/// Motion of one particle over `dt`, exact in law given the cutoff.
pub fn sample_motion_increment<R: Rng + ?Sized>(spec: &MotionSpec, dt: f64, rng: &mut R) -> MotionStep {
    let mut increment = spec.drift() * dt;
    let mut min_jump = f64::INFINITY;
    if spec.sigma2 > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        increment += sqrt(spec.sigma2 * dt) * z;
    }
    let rate = spec.jumps.total_rate();
    if rate > 0.0 {
        let mean = rate * dt;
        let k = Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0);
        for _ in 0..k {
            let x = spec.jumps.sample(rng).first();
            increment += x;
            min_jump = min_jump.min(x);
        }
    }
    MotionStep { increment, min_jump }
}

/// The motion part and the branch part of a truncated measure.
pub fn split_measure(measure: &BranchingLevyMeasure, cutoff: f64, index_cap: u64) -> Result<(AtomSampler, AtomSampler)> {
    let motion = AtomSampler::new(measure, Selection { part: Part::Motion { cutoff }, tilt: None }, index_cap)?;
    let branch = AtomSampler::new(measure, Selection { part: Part::Branch, tilt: None }, index_cap)?;
    Ok((motion, branch))
}

/// `e^{-tκ} Σ_k e^{θ x_k}` with compensated summation.
pub fn additive_martingale(positions: &[f64], theta: f64, kappa: f64, t: f64) -> f64 {
    let shift = -t * kappa;
    crate::math::kahan_sum(positions.iter().map(|&x| exp(theta * x + shift)))
}

/// A triplet prepared for simulation: truncated, split and normalized.
#[derive(Clone, Debug)]
pub struct SimModel {
    pub triplet: Triplet,
    pub options: SimOptions,
    /// The truncation level actually simulated.
    pub truncation: Option<f64>,
    /// Whether `truncation` was derived from the rate budget.
    pub truncation_from_budget: bool,
    /// The measure that is simulated (truncated, and index-capped for heavy
    /// offspring).
    pub measure: BranchingLevyMeasure,
    pub motion: MotionSpec,
    pub branch: AtomSampler,
    /// `κ(θ)` of the simulated measure.
    pub kappa_measure: f64,
    /// `∫_{motion, |x_1|<ε} (e^{θx_1} - 1 - θx_1) Λ(dx)`, dropped by the cutoff.
    pub small_jump_bias: f64,
    /// `κ(θ)` of the process actually simulated; the normalizer of `W`.
    pub kappa: f64,
    /// `κ(θ)` of the untruncated triplet when it is finite.
    pub kappa_untruncated: Option<f64>,
    /// `κ(θ)` of the ladder levels, as simulated.
    pub ladder_kappas: Vec<f64>,
}

/// The rate-budget truncation for a fragmentation family: the largest `n` whose
/// branch rate stays within `budget`.
pub fn budget_truncation(measure: &BranchingLevyMeasure, budget: f64) -> Option<f64> {
    match measure {
        BranchingLevyMeasure::Fragmentation(f) => {
            let a = f.alpha();
            let b = powf(a * budget / f.density_scale() + powf(2.0, a), -1.0 / a);
            Some(-ln(b))
        }
        _ => None,
    }
}

fn small_motion_integral<F>(measure: &BranchingLevyMeasure, cutoff: f64, f: F) -> Result<f64>
where
    F: Fn(&AtomView) -> f64,
{
    let kink = -expm1(-cutoff);
    Ok(measure.integrate_configs(f, &[kink])?.value)
}

impl SimModel {
    pub fn new(triplet: Triplet, options: SimOptions) -> Result<Self> {
        let eps = options.small_jump_cutoff;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("small-jump cutoff must lie in (0, 1), got {eps}")));
        }
        let (truncation, truncation_from_budget) = match options.truncation {
            Some(n) => (Some(n), false),
            None => match budget_truncation(&triplet.measure, options.branch_rate_budget) {
                Some(n) => (Some(n), true),
                None => (None, false),
            },
        };
        for &l in &options.ladder {
            // below 1 a censored x_1 ∈ (-1, -ℓ) would change the compensator, and
            // the killed particles would no longer follow the truncated triplet
            if !(l >= 1.0) || truncation.is_some_and(|n| l > n) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "ladder level {l} must be >= 1 and not above the simulated truncation {truncation:?}"
                )));
            }
        }
        let mut measure = match truncation {
            Some(n) => triplet.measure.truncate(n)?,
            None => triplet.measure.clone(),
        };
        if let BranchingLevyMeasure::HeavyOffspring(h) = &measure {
            measure = BranchingLevyMeasure::HeavyOffspring(h.with_cap(options.index_cap));
        }
        let (jumps, branch) = split_measure(&measure, eps, options.index_cap)?;
        let theta = triplet.theta;

        let (branch_compensation, compensation, small_jump_bias) = match &measure {
            BranchingLevyMeasure::HeavyOffspring(_) => (0.0, 0.0, 0.0),
            m => {
                let branch_comp = small_motion_integral(m, eps, |a| {
                    let x1 = a.first();
                    if !a.is_motion_only() && x1.is_finite() && abs(x1) < 1.0 {
                        a.scale(x1)
                    } else {
                        0.0
                    }
                })?;
                let comp = small_motion_integral(m, eps, |a| {
                    let x1 = a.first();
                    if a.is_motion_only() && abs(x1) >= eps && abs(x1) < 1.0 {
                        a.scale(x1)
                    } else {
                        0.0
                    }
                })?;
                let bias = small_motion_integral(m, eps, |a| {
                    let x1 = a.first();
                    if a.is_motion_only() && abs(x1) < eps {
                        a.scale(exp_m1_minus(theta * x1))
                    } else {
                        0.0
                    }
                })?;
                (branch_comp, comp, bias)
            }
        };
        let motion = MotionSpec { sigma2: triplet.sigma2, a_eff: triplet.a - branch_compensation, jumps, compensation };
        let simulated = Triplet { measure: measure.clone(), ..triplet.clone() };
        let kappa_measure = simulated.kappa_real(theta)?;
        let kappa = kappa_measure - small_jump_bias;
        let kappa_untruncated = triplet.kappa_real(theta).ok();
        let ladder_kappas = options
            .ladder
            .iter()
            .map(|&l| Ok(triplet.truncated(l)?.kappa_real(theta)? - small_jump_bias))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            triplet,
            options,
            truncation,
            truncation_from_budget,
            measure,
            motion,
            branch,
            kappa_measure,
            small_jump_bias,
            kappa,
            kappa_untruncated,
            ladder_kappas,
        })
    }

    pub fn theta(&self) -> f64 {
        self.triplet.theta
    }

    /// Branch events per particle per unit time.
    pub fn branch_rate(&self) -> f64 {
        self.branch.total_rate()
    }

    /// One replica, with the population stream of `(seed, replica)`.
    pub fn simulate(&self, query_times: &[f64], seed: u64, replica: u64) -> Result<Trajectory> {
        let mut rng = stream(seed, replica, Purpose::Population);
        self.simulate_from(0.0, 0.0, 0.0, query_times, &mut rng)
    }

    /// The process started from one particle at `position`, born at `start`
    /// with ancestry depth `req`. Query times before `start` see no particles.
    pub fn simulate_from(
        &self,
        start: f64,
        position: f64,
        req: f64,
        query_times: &[f64],
        rng: &mut Stream,
    ) -> Result<Trajectory> {
        self.simulate_roots(start, &[Root { position, req }], query_times, rng)
    }

    /// Independent copies of the process, one per root, all born at `start`.
    pub fn simulate_roots(&self, start: f64, roots: &[Root], query_times: &[f64], rng: &mut Stream) -> Result<Trajectory> {
        check_query_times(query_times)?;
        let mut pop = Population::new(self, rng);
        for r in roots {
            pop.particles.push(Particle {
                id: pop.next_id,
                parent: None,
                birth_time: start,
                pos: r.position,
                last: start,
                req: r.req,
            });
            pop.next_id += 1;
        }
        let mut t = start;
        let mut snapshots = Vec::with_capacity(query_times.len());
        let mut overflow = false;
        for &q in query_times {
            if q < start {
                snapshots.push(pop.snapshot(q, true));
                continue;
            }
            if let Err(reason) = pop.run_until(&mut t, q) {
                overflow = true;
                if snapshots.is_empty() {
                    return Err(Error::Overflow(reason));
                }
                break;
            }
            t = q;
            pop.advance_all(q);
            snapshots.push(pop.snapshot(q, false));
        }
        Ok(Trajectory { snapshots, overflow, events: pop.events, kappa: self.kappa, theta: self.theta() })
    }
}

/// Initial particle of a simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub position: f64,
    /// Largest downward displacement along the ancestry so far.
    pub req: f64,
}

fn check_query_times(query_times: &[f64]) -> Result<()> {
    if query_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidParameter("query times must be finite and >= 0".into()));
    }
    if query_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("query times must be strictly increasing".into()));
    }
    Ok(())
}

/// A living particle.
#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub id: u64,
    pub parent: Option<u64>,
    pub birth_time: f64,
    /// Position at time `last`.
    pub pos: f64,
    pub last: f64,
    /// Largest downward displacement along the ancestry.
    pub req: f64,
}

/// State of the population at a query time.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub time: f64,
    pub n_particles: usize,
    /// `⟨Z_t, e_θ⟩`.
    pub mass: f64,
    /// `W_t = e^{-tκ} ⟨Z_t, e_θ⟩`.
    pub w: f64,
    /// `(particle id, position)` when requested.
    pub positions: Option<Vec<(u64, f64)>>,
    /// `⟨Z^{(ℓ)}_t, e_θ⟩` for every ladder level `ℓ`.
    pub level_masses: Vec<f64>,
    /// Number of particles of `Z^{(ℓ)}_t` for every ladder level `ℓ`.
    pub level_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    /// One per query time, up to an overflow.
    pub snapshots: Vec<Snapshot>,
    /// Caps were hit; snapshots up to that point are valid.
    pub overflow: bool,
    pub events: u64,
    pub kappa: f64,
    pub theta: f64,
}

impl Trajectory {
    pub fn at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.time == time)
    }
}

struct Population<'a> {
    model: &'a SimModel,
    rng: &'a mut Stream,
    particles: Vec<Particle>,
    next_id: u64,
    events: u64,
}

impl<'a> Population<'a> {
    fn new(model: &'a SimModel, rng: &'a mut Stream) -> Self {
        Self { model, rng, particles: Vec::new(), next_id: 0, events: 0 }
    }

    fn advance(&mut self, i: usize, t: f64) {
        let p = &mut self.particles[i];
        let dt = t - p.last;
        if dt <= 0.0 {
            return;
        }
        let motion = &self.model.motion;
        if motion.is_deterministic() {
            p.pos += motion.drift() * dt;
        } else {
            let step = sample_motion_increment(motion, dt, self.rng);
            p.pos += step.increment;
            p.req = p.req.max(-step.min_jump);
        }
        p.last = t;
    }

    fn advance_all(&mut self, t: f64) {
        for i in 0..self.particles.len() {
            self.advance(i, t);
        }
    }

    /// Runs branch events up to time `until`.
    fn run_until(&mut self, t: &mut f64, until: f64) -> core::result::Result<(), alloc::string::String> {
        let per_particle = self.model.branch.total_rate();
        let caps = self.model.options.caps;
        loop {
            let n = self.particles.len();
            if n == 0 || per_particle <= 0.0 {
                return Ok(());
            }
            let wait: f64 = Exp::new(n as f64 * per_particle).expect("finite rate").sample(self.rng);
            if *t + wait > until {
                return Ok(());
            }
            *t += wait;
            self.events += 1;
            if self.events > caps.max_events {
                return Err(alloc::format!("more than {} events", caps.max_events));
            }
            let i = self.rng.random_range(0..n);
            self.advance(i, *t);
            let config = self.model.branch.sample(self.rng);
            let entries = config.finite();
            if entries.is_empty() {
                self.particles.swap_remove(i);
                continue;
            }
            let (pos, req, id) = {
                let p = &self.particles[i];
                (p.pos, p.req, p.id)
            };
            for &x in &entries[1..] {
                let child = Particle {
                    id: self.next_id,
                    parent: Some(id),
                    birth_time: *t,
                    pos: pos + x,
                    last: *t,
                    req: req.max(-x),
                };
                self.next_id += 1;
                self.particles.push(child);
            }
            let p = &mut self.particles[i];
            p.pos = pos + entries[0];
            p.req = req.max(-entries[0]);
            if self.particles.len() > caps.max_particles {
                return Err(alloc::format!("more than {} particles", caps.max_particles));
            }
        }
    }

    fn snapshot(&self, time: f64, before_start: bool) -> Snapshot {
        let theta = self.model.theta();
        let ladder = &self.model.options.ladder;
        if before_start {
            return Snapshot {
                time,
                n_particles: 0,
                mass: 0.0,
                w: 0.0,
                positions: self.model.options.record_positions.then(Vec::new),
                level_masses: alloc::vec![0.0; ladder.len()],
                level_counts: alloc::vec![0; ladder.len()],
            };
        }
        let positions: Vec<f64> = self.particles.iter().map(|p| p.pos).collect();
        let mass = crate::math::kahan_sum(positions.iter().map(|&x| exp(theta * x)));
        let w = additive_martingale(&positions, theta, self.model.kappa, time);
        let level_masses = ladder
            .iter()
            .map(|&l| {
                crate::math::kahan_sum(self.particles.iter().filter(|p| p.req <= l).map(|p| exp(theta * p.pos)))
            })
            .collect();
        let level_counts = ladder.iter().map(|&l| self.particles.iter().filter(|p| p.req <= l).count()).collect();
        Snapshot {
            time,
            n_particles: self.particles.len(),
            mass,
            w,
            positions: self
                .model
                .options
                .record_positions
                .then(|| self.particles.iter().map(|p| (p.id, p.pos)).collect()),
            level_masses,
            level_counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Atom, BinaryFragmentation, FiniteDiscrete};
    use crate::rng::from_seed;
    use alloc::vec;

    fn finite(atoms: Vec<(f64, Vec<f64>)>) -> BranchingLevyMeasure {
        BranchingLevyMeasure::Finite(
            FiniteDiscrete::new(atoms.into_iter().map(|(r, c)| Atom::new(r, c).unwrap()).collect()).unwrap(),
        )
    }

    fn model(sigma2: f64, a: f64, m: BranchingLevyMeasure, theta: f64) -> SimModel {
        SimModel::new(Triplet::new(sigma2, a, m, theta).unwrap(), SimOptions::default()).unwrap()
    }

    fn motion(sigma2: f64, a_eff: f64, jumps: AtomSampler, compensation: f64) -> MotionSpec {
        MotionSpec { sigma2, a_eff, jumps, compensation }
    }

    #[test]
    fn split_examples() {
        let (m, b) = split_measure(&finite(vec![(1.0, vec![0.0, 0.0])]), 1e-3, 1).unwrap();
        assert!(m.is_empty());
        assert_eq!(b.total_rate(), 1.0);
        let (m, b) = split_measure(&finite(vec![(1.0, vec![2f64.ln()])]), 1e-3, 1).unwrap();
        assert_eq!(m.total_rate(), 1.0);
        assert!(b.is_empty());
        let frag = BranchingLevyMeasure::Fragmentation(BinaryFragmentation::new(0.5, 1.0).unwrap()).truncate(2.0).unwrap();
        let (m, b) = split_measure(&frag, 1e-3, 1).unwrap();
        let BranchingLevyMeasure::Fragmentation(f) = &frag else { unreachable!() };
        assert!((b.total_rate() - f.untilted_mass((-2f64).exp(), 0.5)).abs() < 1e-12);
        assert!((m.total_rate() - f.untilted_mass(-(-1e-3f64).exp_m1(), (-2f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn motion_increment_examples() {
        let mut rng = from_seed(3);
        let bm = motion(1.0, 0.0, AtomSampler::Empty, 0.0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_motion_increment(&bm, 1.0, &mut rng).increment).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
        let drift = motion(0.0, 2.0, AtomSampler::Empty, 0.0);
        assert_eq!(sample_motion_increment(&drift, 0.5, &mut rng).increment, 1.0);
        // compensated compound Poisson with jumps ln 2 at rate 1
        let m = finite(vec![(1.0, vec![2f64.ln()])]);
        let (jumps, _) = split_measure(&m, 1e-3, 1).unwrap();
        let cp = motion(0.0, 0.0, jumps, 2f64.ln());
        let xs: Vec<f64> = (0..n).map(|_| sample_motion_increment(&cp, 1.0, &mut rng).increment).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = 2f64.ln();
        assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn additive_martingale_examples() {
        assert_eq!(additive_martingale(&[], 1.0, 1.0, 2.0), 0.0);
        assert_eq!(additive_martingale(&[0.0], 1.0, 1.0, 0.0), 1.0);
        assert!((additive_martingale(&[0.0, 0.0], 1.0, 1.0, 2f64.ln()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_drift_is_deterministic() {
        let m = model(0.0, 1.0, BranchingLevyMeasure::zero(), 0.7);
        let mut opts = m.options.clone();
        opts.record_positions = true;
        let m = SimModel::new(m.triplet.clone(), opts).unwrap();
        let tr = m.simulate(&[0.0, 1.0, 2.5], 1, 0).unwrap();
        for s in &tr.snapshots {
            assert_eq!(s.n_particles, 1);
            assert!((s.positions.as_ref().unwrap()[0].1 - s.time).abs() < 1e-14);
            assert!((s.w - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn yule_population_mean() {
        let m = model(0.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0);
        let reps = 5000;
        let ns: Vec<f64> =
            (0..reps).map(|r| m.simulate(&[3.0], 42, r).unwrap().snapshots[0].n_particles as f64).collect();
        let mean = ns.iter().sum::<f64>() / reps as f64;
        let var = ns.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 3f64.exp()).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn bbm_many_to_one() {
        let m = model(1.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0);
        assert!((m.kappa - 1.5).abs() < 1e-15);
        let reps = 5000;
        let xs: Vec<f64> = (0..reps).map(|r| m.simulate(&[2.0], 7, r).unwrap().snapshots[0].mass).collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 3f64.exp()).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn snapshot_w_is_recomputable() {
        let opts = SimOptions { record_positions: true, ..SimOptions::default() };
        let t = Triplet::new(1.0, 0.2, finite(vec![(1.0, vec![0.0, -0.3])]), 1.0).unwrap();
        let m = SimModel::new(t, opts).unwrap();
        let tr = m.simulate(&[0.0, 1.0, 2.0], 9, 3).unwrap();
        for s in &tr.snapshots {
            let pos: Vec<f64> = s.positions.as_ref().unwrap().iter().map(|p| p.1).collect();
            let w = additive_martingale(&pos, 1.0, m.kappa, s.time);
            assert!((w - s.w).abs() <= 1e-12 * w.abs());
        }
    }

    #[test]
    fn determinism() {
        let m = model(1.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0);
        let a = m.simulate(&[0.0, 1.0, 2.0], 5, 11).unwrap();
        let b = m.simulate(&[0.0, 1.0, 2.0], 5, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn caps_flag_overflow() {
        let mut opts = SimOptions::default();
        opts.caps.max_particles = 1;
        let t = Triplet::new(0.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0).unwrap();
        let m = SimModel::new(t, opts).unwrap();
        let tr = m.simulate(&[0.0, 5.0], 1, 0).unwrap();
        assert!(tr.overflow);
        assert_eq!(tr.snapshots.len(), 1);
        assert!(matches!(m.simulate(&[5.0], 1, 0), Err(Error::Overflow(_))));
    }

    #[test]
    fn ladder_masses_are_monotone() {
        let opts = SimOptions { truncation: Some(4.0), ladder: vec![1.0, 2.0, 4.0], ..SimOptions::default() };
        let base = BranchingLevyMeasure::Fragmentation(BinaryFragmentation::new(0.5, 1.0).unwrap());
        let m = SimModel::new(Triplet::new(0.0, 0.0, base, 1.0).unwrap(), opts).unwrap();
        for r in 0..20 {
            let tr = m.simulate(&[0.0, 0.2, 0.4], 3, r).unwrap();
            for s in &tr.snapshots {
                assert!(s.level_masses.windows(2).all(|w| w[0] <= w[1]));
                assert!((s.level_masses[2] - s.mass).abs() <= 1e-12 * s.mass);
            }
        }
    }

    #[test]
    fn budget_truncation_respects_budget() {
        let base = BranchingLevyMeasure::Fragmentation(BinaryFragmentation::new(0.5, 1.0).unwrap());
        let n = budget_truncation(&base, 20.0).unwrap();
        let m = SimModel::new(Triplet::new(0.0, 0.0, base, 1.0).unwrap(), SimOptions::default()).unwrap();
        assert!(m.truncation_from_budget && m.truncation == Some(n));
        assert!((m.branch_rate() - 20.0).abs() < 1e-9);
    }
}
