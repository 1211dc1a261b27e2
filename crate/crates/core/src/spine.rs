//! The spine `ξ̂` under the size-biased law `P̂`, its accumulated offspring
//! mass `W*`, and the tilted particle system `Ẑ` built from it.
//!
//! The spine moves as a Lévy process with Gaussian part `σ²`, jumps `x_*` at
//! the atoms of `Λ̂(dx) = ⟨x, e_θ⟩ Λ(dx)` (with `*` drawn with probability
//! `e^{θx_k} / ⟨x, e_θ⟩`), and the drift that makes its compensated small
//! jumps match `â`. Every other child of an atom starts an untilted copy of
//! the process.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::engine::{Root, SimModel, Trajectory};
use crate::error::{Error, Result};
use crate::math::{exp, kahan_sum, sqrt};
use crate::measure::{sample_spine_index, AtomSampler, Part, PointConfiguration, Selection};
use crate::rng::{from_seed, stream, Purpose, Stream};

/// An atom of the spine's Poisson point process.
#[derive(Clone, Debug, PartialEq)]
pub struct SpineAtom {
    pub time: f64,
    pub config: PointConfiguration,
    /// 1-based index of the child that carries the spine on.
    pub index: usize,
    /// `ξ̂_{s-}`.
    pub position_before: f64,
    /// Largest downward displacement of the spine before the atom.
    pub req_before: f64,
}

impl SpineAtom {
    pub fn spine_jump(&self) -> f64 {
        self.config.entry(self.index)
    }
}

/// State of the spine at a query time.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinePoint {
    pub time: f64,
    pub xi_hat: f64,
    pub wstar: f64,
    pub n_atoms: usize,
    pub req: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpineTrajectory {
    pub atoms: Vec<SpineAtom>,
    pub points: Vec<SpinePoint>,
    pub theta: f64,
    pub kappa: f64,
}

impl SpineTrajectory {
    /// `T^{(n)}_*`: the first time the spine makes a jump below `-n`.
    pub fn killing_time(&self, n: f64) -> Option<f64> {
        self.atoms.iter().find(|a| a.spine_jump() < -n).map(|a| a.time)
    }
}

/// `W*_t = Σ_{s ≤ t} (⟨x, e_θ⟩ - e^{θx_*}) e^{θξ̂_{s-} - sκ}` over the spine atoms.
pub fn compute_wstar(atoms: &[SpineAtom], theta: f64, kappa: f64, t: f64) -> f64 {
    kahan_sum(atoms.iter().take_while(|a| a.time <= t).map(|a| wstar_term(a, theta, kappa)))
}

fn wstar_term(a: &SpineAtom, theta: f64, kappa: f64) -> f64 {
    let others = a.config.weighted_sum(theta) - exp(theta * a.spine_jump());
    others.max(0.0) * exp(theta * a.position_before - a.time * kappa)
}

/// The tilted system at a query time.
#[derive(Clone, Debug, PartialEq)]
pub struct TiltedSnapshot {
    pub time: f64,
    pub n_particles: usize,
    pub mass: f64,
    /// `Ŵ_t = e^{-tκ} ⟨Ẑ_t, e_θ⟩`.
    pub w: f64,
    pub spine_position: f64,
    pub level_masses: Vec<f64>,
    pub level_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiltedTrajectory {
    pub spine: SpineTrajectory,
    pub snapshots: Vec<TiltedSnapshot>,
    pub overflow: bool,
    pub kappa: f64,
    pub theta: f64,
}

/// The spine of a simulated model: the same truncation, cutoff and index cap,
/// so that the spinal decomposition holds exactly for the simulated process.
#[derive(Clone, Debug)]
pub struct SpineModel {
    pub sim: SimModel,
    /// `Λ̂` restricted to the events the simulation executes.
    pub events: AtomSampler,
    /// Drift between events.
    pub drift: f64,
    pub sigma: f64,
}

impl SpineModel {
    pub fn new(sim: SimModel) -> Result<Self> {
        let theta = sim.theta();
        let events = AtomSampler::new(
            &sim.measure,
            Selection { part: Part::Events { cutoff: sim.options.small_jump_cutoff }, tilt: Some(theta) },
            sim.options.index_cap,
        )?;
        // the compensated small jumps of x_* cancel those of x_1 in â,
        // leaving a + θσ² - ∫_{events} x_1 1_{|x_1|<1}
        let drift = sim.motion.drift() + theta * sim.triplet.sigma2;
        let sigma = sqrt(sim.triplet.sigma2);
        Ok(Self { sim, events, drift, sigma })
    }

    pub fn theta(&self) -> f64 {
        self.sim.theta()
    }

    pub fn kappa(&self) -> f64 {
        self.sim.kappa
    }

    /// Total rate of `Λ̂` over the simulated events.
    pub fn tilted_rate(&self) -> f64 {
        self.events.total_rate()
    }

    fn gaussian_step<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        let mut dx = self.drift * dt;
        if self.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            dx += self.sigma * sqrt(dt) * z;
        }
        dx
    }

    /// The spine on `[0, max(query_times)]`. With no tilted events the spine is
    /// a pure Lévy motion and `W* ≡ 0`.
    pub fn simulate_spine<R: Rng + ?Sized>(&self, query_times: &[f64], rng: &mut R) -> Result<SpineTrajectory> {
        check_times(query_times)?;
        let theta = self.theta();
        let kappa = self.kappa();
        let rate = self.tilted_rate();
        let clock = if rate > 0.0 { Some(Exp::new(rate).map_err(|_| Error::NoBranchingEvents)?) } else { None };
        let next_after = |t: f64, rng: &mut R| clock.as_ref().map_or(f64::INFINITY, |c| t + c.sample(rng));

        let mut atoms = Vec::new();
        let mut points = Vec::with_capacity(query_times.len());
        let (mut t, mut x, mut req, mut wstar) = (0.0, 0.0, 0.0f64, 0.0);
        let mut next = next_after(0.0, rng);
        for &q in query_times {
            while next <= q {
                x += self.gaussian_step(next - t, rng);
                t = next;
                let config = self.events.sample(rng);
                let index = sample_spine_index(&config, theta, rng)?;
                let atom = SpineAtom { time: t, config, index, position_before: x, req_before: req };
                wstar += wstar_term(&atom, theta, kappa);
                let jump = atom.spine_jump();
                x += jump;
                req = req.max(-jump);
                atoms.push(atom);
                next = next_after(t, rng);
            }
            x += self.gaussian_step(q - t, rng);
            t = q;
            points.push(SpinePoint { time: q, xi_hat: x, wstar, n_atoms: atoms.len(), req });
        }
        Ok(SpineTrajectory { atoms, points, theta, kappa })
    }

    /// One replica of the spine alone, on the spine stream of `(seed, replica)`.
    pub fn spine_replica(&self, query_times: &[f64], seed: u64, replica: u64) -> Result<SpineTrajectory> {
        self.simulate_spine(query_times, &mut stream(seed, replica, Purpose::Spine))
    }

    /// The tilted system `Ẑ`: the spine plus an untilted subtree for every
    /// other child of every spine atom. Subtree seeds are drawn from the spine
    /// stream after the spine itself.
    pub fn simulate_tilted_system(&self, query_times: &[f64], seed: u64, replica: u64) -> Result<TiltedTrajectory> {
        let mut rng: Stream = stream(seed, replica, Purpose::Spine);
        let spine = self.simulate_spine(query_times, &mut rng)?;
        let theta = self.theta();
        let kappa = self.kappa();
        let ladder = &self.sim.options.ladder;
        let max_particles = self.sim.options.caps.max_particles;

        let mut snapshots: Vec<TiltedSnapshot> = spine
            .points
            .iter()
            .map(|p| TiltedSnapshot {
                time: p.time,
                n_particles: 1,
                mass: exp(theta * p.xi_hat),
                w: 0.0,
                spine_position: p.xi_hat,
                level_masses: ladder.iter().map(|&l| if p.req <= l { exp(theta * p.xi_hat) } else { 0.0 }).collect(),
                level_counts: ladder.iter().map(|&l| usize::from(p.req <= l)).collect(),
            })
            .collect();
        let mut covered = snapshots.len();
        let mut overflow = false;
        for atom in &spine.atoms {
            let roots: Vec<Root> = atom
                .config
                .finite()
                .iter()
                .enumerate()
                .filter(|&(k, _)| k + 1 != atom.index)
                .map(|(_, &x)| Root { position: atom.position_before + x, req: atom.req_before.max(-x) })
                .collect();
            if roots.is_empty() {
                continue;
            }
            let mut child_rng = from_seed(rng.random());
            let sub = match self.sim.simulate_roots(atom.time, &roots, query_times, &mut child_rng) {
                Ok(s) => s,
                Err(Error::Overflow(reason)) => {
                    if spine.points.iter().all(|p| p.time < atom.time) {
                        continue;
                    }
                    return Err(Error::Overflow(reason));
                }
                Err(e) => return Err(e),
            };
            overflow |= sub.overflow;
            covered = covered.min(sub.snapshots.len());
            merge(&mut snapshots[..covered], &sub);
            if snapshots[..covered].iter().any(|s| s.n_particles > max_particles) {
                overflow = true;
                let first_bad = snapshots.iter().position(|s| s.n_particles > max_particles).unwrap_or(covered);
                covered = covered.min(first_bad);
            }
        }
        snapshots.truncate(covered);
        if snapshots.is_empty() && !query_times.is_empty() {
            return Err(Error::Overflow("the tilted system outgrew its caps".into()));
        }
        for s in &mut snapshots {
            s.w = exp(-s.time * kappa) * s.mass;
        }
        Ok(TiltedTrajectory { spine, snapshots, overflow, kappa, theta })
    }
}

fn merge(into: &mut [TiltedSnapshot], sub: &Trajectory) {
    for (s, o) in into.iter_mut().zip(&sub.snapshots) {
        s.n_particles += o.n_particles;
        s.mass += o.mass;
        for (m, &om) in s.level_masses.iter_mut().zip(&o.level_masses) {
            *m += om;
        }
        for (c, &oc) in s.level_counts.iter_mut().zip(&o.level_counts) {
            *c += oc;
        }
    }
}

fn check_times(query_times: &[f64]) -> Result<()> {
    if query_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || query_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("query times must be finite, non-negative and sorted".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::Triplet;
    use crate::engine::SimOptions;
    use crate::measure::{Atom, BinaryFragmentation, BranchingLevyMeasure, FiniteDiscrete};
    use alloc::vec;

    fn finite(atoms: Vec<(f64, Vec<f64>)>) -> BranchingLevyMeasure {
        BranchingLevyMeasure::Finite(
            FiniteDiscrete::new(atoms.into_iter().map(|(r, c)| Atom::new(r, c).unwrap()).collect()).unwrap(),
        )
    }

    fn model(sigma2: f64, a: f64, measure: BranchingLevyMeasure, theta: f64) -> SpineModel {
        let t = Triplet::new(sigma2, a, measure, theta).unwrap();
        SpineModel::new(SimModel::new(t, SimOptions::default()).unwrap()).unwrap()
    }

    fn yule() -> SpineModel {
        model(0.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0)
    }

    fn bbm(theta: f64) -> SpineModel {
        model(1.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), theta)
    }

    #[test]
    fn pure_drift_spine_is_a_line() {
        let m = model(0.0, 0.7, BranchingLevyMeasure::zero(), 2.0);
        let s = m.spine_replica(&[0.0, 1.0, 3.0], 1, 0).unwrap();
        assert!(s.atoms.is_empty());
        for p in &s.points {
            assert!((p.xi_hat - 0.7 * p.time).abs() < 1e-12);
            assert_eq!(p.wstar, 0.0);
        }
    }

    #[test]
    fn drift_between_events_matches_spine_drift() {
        // no small jumps are dropped, so the simulated drift is exact
        let m = model(0.5, 0.3, finite(vec![(1.0, vec![0.4]), (2.0, vec![0.1, -0.2])]), 0.8);
        let expected = m.sim.triplet.spine_drift().unwrap()
            - m.sim.triplet.measure.integrate_configs(
                |a| kahan_sum(a.entries.iter().filter(|x| x.abs() < 1.0).map(|&x| a.scaled_exp(0.8, x) * x)),
                &[],
            )
            .unwrap()
            .value;
        assert!((m.drift - expected).abs() < 1e-12, "{} vs {expected}", m.drift);
    }

    #[test]
    fn bbm_spine_drifts_at_theta() {
        let m = bbm(1.0);
        let n = 2000;
        let mean = (0..n).map(|r| m.spine_replica(&[10.0], 3, r).unwrap().points[0].xi_hat / 10.0).sum::<f64>() / n as f64;
        // ξ̂_10 / 10 ~ N(1, 1/10)
        let se = (0.1f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn wstar_is_nondecreasing_and_recomputable() {
        let m = bbm(1.0);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        for r in 0..20 {
            let s = m.spine_replica(&times, 5, r).unwrap();
            assert!(s.points.windows(2).all(|w| w[1].wstar >= w[0].wstar));
            for p in &s.points {
                let direct = compute_wstar(&s.atoms, s.theta, s.kappa, p.time);
                assert!((direct - p.wstar).abs() <= 1e-12 * (1.0 + p.wstar));
                assert_eq!(p.n_atoms, s.atoms.iter().filter(|a| a.time <= p.time).count());
            }
        }
    }

    #[test]
    fn yule_spine_rate_is_size_biased() {
        let m = yule();
        assert_eq!(m.tilted_rate(), 2.0);
        let n = 2000;
        let atoms = (0..n).map(|r| m.spine_replica(&[5.0], 9, r).unwrap().atoms.len()).sum::<usize>() as f64 / n as f64;
        let se = (10.0f64 / n as f64).sqrt();
        assert!((atoms - 10.0).abs() < 4.0 * se, "{atoms}");
    }

    #[test]
    fn yule_tilted_mean_is_second_moment() {
        // Ê[Ŵ_t] = E[W_t²] = 2 - e^{-t}
        let m = yule();
        let t = 1.0;
        let n = 4000;
        let ws: Vec<f64> =
            (0..n).map(|r| m.simulate_tilted_system(&[t], 11, r).unwrap().snapshots[0].w).collect();
        let mean = ws.iter().sum::<f64>() / n as f64;
        let var = ws.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        let expected = 2.0 - (-t).exp();
        assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected} (se {se})");
    }

    #[test]
    fn tilted_system_counts_spine_and_subtrees() {
        let m = yule();
        let tr = m.simulate_tilted_system(&[0.0, 0.5, 2.0], 2, 1).unwrap();
        assert_eq!(tr.snapshots[0].n_particles, 1);
        assert_eq!(tr.snapshots[0].w, 1.0);
        for s in &tr.snapshots {
            // Yule with θ irrelevant: every particle sits at 0
            assert!((s.mass - s.n_particles as f64).abs() < 1e-9);
            assert!((s.w - (-s.time).exp() * s.mass).abs() < 1e-12);
        }
        assert!(tr.snapshots[2].n_particles > tr.spine.atoms.iter().filter(|a| a.time <= 2.0).count());
    }

    #[test]
    fn killing_time_is_the_first_deep_jump() {
        let f = BinaryFragmentation::new(0.5, 1.0).unwrap();
        let t = Triplet::new(0.0, 0.0, BranchingLevyMeasure::Fragmentation(f), 1.0).unwrap();
        let opts = SimOptions { truncation: Some(3.0), ..SimOptions::default() };
        let m = SpineModel::new(SimModel::new(t, opts).unwrap()).unwrap();
        let mut seen = false;
        for r in 0..50 {
            let s = m.spine_replica(&[2.0], 4, r).unwrap();
            assert!(s.atoms.iter().all(|a| a.spine_jump() >= -3.0));
            if let Some(k) = s.killing_time(1.0) {
                seen = true;
                let first = s.atoms.iter().find(|a| a.spine_jump() < -1.0).unwrap();
                assert_eq!(first.time, k);
                assert!(s.atoms.iter().filter(|a| a.time < k).all(|a| a.spine_jump() >= -1.0));
            }
            assert!(s.killing_time(3.0).is_none());
        }
        assert!(seen);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = bbm(1.0);
        let a = m.simulate_tilted_system(&[1.0, 2.0], 17, 3).unwrap();
        let b = m.simulate_tilted_system(&[1.0, 2.0], 17, 3).unwrap();
        assert_eq!(a, b);
        let c = m.simulate_tilted_system(&[1.0, 2.0], 17, 4).unwrap();
        assert_ne!(a, c);
    }
}
