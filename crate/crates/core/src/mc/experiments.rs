use alloc::string::ToString;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::stats::{ks_test, quantile, z_score, Estimate, KsResult};
use super::Replicator;
use crate::engine::{SimModel, Snapshot};
use crate::error::{Error, Result};
use crate::math::{cos, exp, expm1, powf, sin, sqrt};
use crate::measure::BranchingLevyMeasure;
use crate::spine::{compute_wstar, SpineModel, TiltedSnapshot};

/// A bounded functional of the population at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Functional {
    One,
    CountAtMost { k: usize },
    CountAtLeast { k: usize },
    /// `min(1, W_t)`.
    MinOneW,
    /// `min(1, ⟨Z_t, e_θ⟩)`.
    MinOneMass,
}

impl Functional {
    pub fn eval(&self, n_particles: usize, mass: f64, w: f64) -> f64 {
        match *self {
            Functional::One => 1.0,
            Functional::CountAtMost { k } => f64::from(u8::from(n_particles <= k)),
            Functional::CountAtLeast { k } => f64::from(u8::from(n_particles >= k)),
            Functional::MinOneW => w.min(1.0),
            Functional::MinOneMass => mass.min(1.0),
        }
    }
}

/// Snapshots of one replica; an overflowing replica keeps only the times it reached.
fn populations<R: Replicator>(
    model: &SimModel,
    times: &[f64],
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<Vec<Vec<Snapshot>>> {
    rep.map(replicas, |r| match model.simulate(times, seed, r) {
        Ok(tr) => Ok(tr.snapshots),
        Err(Error::Overflow(_)) => Ok(Vec::new()),
        Err(e) => Err(e),
    })
    .into_iter()
    .collect()
}

fn tilted_populations<R: Replicator>(
    spine: &SpineModel,
    times: &[f64],
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<Vec<Vec<TiltedSnapshot>>> {
    rep.map(replicas, |r| match spine.simulate_tilted_system(times, seed, r) {
        Ok(tr) => Ok(tr.snapshots),
        Err(Error::Overflow(_)) => Ok(Vec::new()),
        Err(e) => Err(e),
    })
    .into_iter()
    .collect()
}

fn check_replicas(replicas: u64) -> Result<()> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("at least two replicas are needed for a standard error".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MartingaleMean {
    pub t: f64,
    pub estimate: Estimate,
    /// `|mean - 1| / SE`.
    pub z: f64,
    pub overflowed: usize,
}

/// `E[W_t] = 1`.
pub fn martingale_mean<R: Replicator>(
    model: &SimModel,
    t: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<MartingaleMean> {
    check_replicas(replicas)?;
    let pops = populations(model, &[t], replicas, seed, rep)?;
    let ws: Vec<f64> = pops.iter().filter_map(|p| p.first().map(|s| s.w)).collect();
    let overflowed = pops.len() - ws.len();
    let estimate = Estimate::from_samples(&ws);
    Ok(MartingaleMean { t, z: estimate.z_against(1.0), estimate, overflowed })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegeneracyReport {
    pub times: Vec<f64>,
    pub medians: Vec<f64>,
    pub p90: Vec<f64>,
    pub overflowed: Vec<usize>,
    pub threshold: f64,
    pub medians_nonincreasing: bool,
    pub final_median: f64,
    /// Medians non-increasing and the final one below the threshold.
    pub consistent: bool,
}

/// Medians and 90th percentiles of `W_t` over a time grid. The mean is 1 in
/// every regime, so only quantiles can show degeneracy.
pub fn degeneracy_diagnostic<R: Replicator>(
    model: &SimModel,
    times: &[f64],
    threshold: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<DegeneracyReport> {
    check_replicas(replicas)?;
    let pops = populations(model, times, replicas, seed, rep)?;
    let mut medians = Vec::with_capacity(times.len());
    let mut p90 = Vec::with_capacity(times.len());
    let mut overflowed = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let ws: Vec<f64> = pops.iter().filter_map(|p| p.get(i).map(|s| s.w)).collect();
        overflowed.push(pops.len() - ws.len());
        medians.push(quantile(&ws, 0.5));
        p90.push(quantile(&ws, 0.9));
    }
    let medians_nonincreasing = medians.windows(2).all(|w| w[1] <= w[0]);
    let final_median = medians.last().copied().unwrap_or(f64::NAN);
    Ok(DegeneracyReport {
        times: times.to_vec(),
        medians,
        p90,
        overflowed,
        threshold,
        medians_nonincreasing,
        final_median,
        consistent: medians_nonincreasing && final_median < threshold,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChangeOfMeasure {
    pub functional: Functional,
    pub t: f64,
    /// `E[W_t F(Z_t)]`.
    pub lhs: Estimate,
    /// `Ê[F(Ẑ_t)]`.
    pub rhs: Estimate,
    /// Replica-paired difference of the two sides.
    pub difference: Estimate,
    pub z: f64,
    pub dropped: usize,
}

/// `E[W_t F(Z_t)] = Ê[F(Ẑ_t)]`, replica `r` of each side drawn from the
/// `(seed, r)` streams of its own purpose.
pub fn change_of_measure_check<R: Replicator>(
    spine: &SpineModel,
    functional: Functional,
    t: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<ChangeOfMeasure> {
    check_replicas(replicas)?;
    let plain = populations(&spine.sim, &[t], replicas, seed, rep)?;
    let tilted = tilted_populations(spine, &[t], replicas, seed, rep)?;
    let mut lhs = Vec::with_capacity(plain.len());
    let mut rhs = Vec::with_capacity(plain.len());
    for (p, q) in plain.iter().zip(&tilted) {
        if let (Some(a), Some(b)) = (p.first(), q.first()) {
            lhs.push(a.w * functional.eval(a.n_particles, a.mass, a.w));
            rhs.push(functional.eval(b.n_particles, b.mass, b.w));
        }
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let difference = Estimate::from_samples(&diff);
    Ok(ChangeOfMeasure {
        functional,
        t,
        z: z_score(difference.mean, difference.std_error),
        lhs: Estimate::from_samples(&lhs),
        rhs: Estimate::from_samples(&rhs),
        difference,
        dropped: plain.len() - diff.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct YuleLaw {
    pub t: f64,
    pub ks: KsResult,
    pub w: Estimate,
    pub overflowed: usize,
}

fn is_yule(model: &SimModel) -> bool {
    let t = &model.triplet;
    let atoms_ok = match &t.measure {
        BranchingLevyMeasure::Finite(f) => {
            f.atoms().iter().all(|a| a.config.len() == 2 && a.config.finite().iter().all(|&x| x == 0.0))
        }
        _ => false,
    };
    t.sigma2 == 0.0 && t.a == 0.0 && atoms_ok
}

/// KS test of `W_t = e^{-t} N_t` against its Exponential(1) limit.
pub fn yule_limit_law_check<R: Replicator>(
    model: &SimModel,
    t: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<YuleLaw> {
    if !is_yule(model) {
        return Err(Error::Experiment("the limit-law check needs a Yule scenario (no motion, binary (0, 0) births)".to_string()));
    }
    check_replicas(replicas)?;
    let pops = populations(model, &[t], replicas, seed, rep)?;
    let ws: Vec<f64> = pops.iter().filter_map(|p| p.first().map(|s| s.w)).collect();
    let ks = ks_test(&ws, |x| if x > 0.0 { -expm1(-x) } else { 0.0 });
    Ok(YuleLaw { t, ks, w: Estimate::from_samples(&ws), overflowed: pops.len() - ws.len() })
}

/// `E[W_t²] = 2 - e^{-t}` for the Yule process.
pub fn yule_second_moment(t: f64) -> f64 {
    2.0 - exp(-t)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LpMoments {
    pub p: f64,
    pub times: Vec<f64>,
    pub estimates: Vec<Estimate>,
    pub overflowed: Vec<usize>,
    /// Share of `Σ W_t^p` carried by the top 1% of replicas, per time.
    pub tail_share: Vec<f64>,
    pub predicted_bounded: bool,
    /// Last estimate above the first by more than 4 combined SE.
    pub growth: bool,
    /// Relative SE above 25% or a tail share above one half.
    pub unstable: bool,
    pub certifiable: bool,
}

/// `E[W_t^p]` over a time grid.
pub fn lp_moment_check<R: Replicator>(
    model: &SimModel,
    p: f64,
    times: &[f64],
    predicted_bounded: bool,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<LpMoments> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(alloc::format!("p must lie in (1, 2], got {p}")));
    }
    check_replicas(replicas)?;
    let pops = populations(model, times, replicas, seed, rep)?;
    let mut estimates = Vec::with_capacity(times.len());
    let mut overflowed = Vec::with_capacity(times.len());
    let mut tail_share = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let mut xs: Vec<f64> = pops.iter().filter_map(|q| q.get(i).map(|s| powf(s.w, p))).collect();
        overflowed.push(pops.len() - xs.len());
        estimates.push(Estimate::from_samples(&xs));
        xs.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = xs.iter().sum();
        let top = xs.len().div_ceil(100);
        let share = if total > 0.0 { xs[..top].iter().sum::<f64>() / total } else { 0.0 };
        tail_share.push(share);
    }
    let growth = match (estimates.first(), estimates.last()) {
        (Some(a), Some(b)) if estimates.len() > 1 => {
            b.mean - a.mean > 4.0 * sqrt(a.std_error * a.std_error + b.std_error * b.std_error)
        }
        _ => false,
    };
    let unstable = estimates.iter().any(|e| e.std_error > 0.25 * e.mean.abs()) || tail_share.iter().any(|&s| s > 0.5);
    Ok(LpMoments {
        p,
        times: times.to_vec(),
        estimates,
        overflowed,
        tail_share,
        predicted_bounded,
        growth,
        unstable,
        certifiable: predicted_bounded && !growth && !unstable,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpineSlope {
    pub t: f64,
    /// `ξ̂_t / t`.
    pub estimate: Estimate,
    pub expected: f64,
    pub z: f64,
}

/// `ξ̂_t / t` against `κ'(θ)` of the scenario's triplet.
pub fn spine_mean_slope<R: Replicator>(
    spine: &SpineModel,
    t: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<SpineSlope> {
    check_replicas(replicas)?;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("the slope needs t > 0".into()));
    }
    let expected = spine.sim.triplet.kappa_prime()?;
    let xs: Vec<f64> = rep
        .map(replicas, |r| spine.spine_replica(&[t], seed, r).map(|s| s.points[0].xi_hat / t))
        .into_iter()
        .collect::<Result<_>>()?;
    let estimate = Estimate::from_samples(&xs);
    Ok(SpineSlope { t, z: estimate.z_against(expected), estimate, expected })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CharacteristicPoint {
    pub r: f64,
    pub real: Estimate,
    pub imag: Estimate,
    pub expected_real: f64,
    pub expected_imag: f64,
    /// The larger of the two component z-scores.
    pub z: f64,
}

/// Empirical `E[e^{irξ̂_t}]` against `exp(t (κ(θ+ir) - κ(θ)))`.
pub fn spine_characteristic<R: Replicator>(
    spine: &SpineModel,
    t: f64,
    rs: &[f64],
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<Vec<CharacteristicPoint>> {
    check_replicas(replicas)?;
    let xs: Vec<f64> = rep
        .map(replicas, |r| spine.spine_replica(&[t], seed, r).map(|s| s.points[0].xi_hat))
        .into_iter()
        .collect::<Result<_>>()?;
    rs.iter()
        .map(|&r| {
            let expected = (spine.sim.triplet.spine_exponent(r)? * t).exp();
            let re: Vec<f64> = xs.iter().map(|&x| cos(r * x)).collect();
            let im: Vec<f64> = xs.iter().map(|&x| sin(r * x)).collect();
            let real = Estimate::from_samples(&re);
            let imag = Estimate::from_samples(&im);
            let z = real.z_against(expected.re).max(imag.z_against(expected.im));
            Ok(CharacteristicPoint { r, real, imag, expected_real: expected.re, expected_imag: expected.im, z })
        })
        .collect()
}

/// `exp(t Φ̂(r))`, for reporting.
pub fn spine_characteristic_exact(spine: &SpineModel, t: f64, r: f64) -> Result<Complex64> {
    Ok((spine.sim.triplet.spine_exponent(r)? * t).exp())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WstarStability {
    pub t1: f64,
    pub t2: f64,
    pub q: f64,
    pub quantile_t1: f64,
    pub quantile_t2: f64,
    /// `|q(t2) - q(t1)| / q(t1)`.
    pub relative_change: f64,
    pub all_nondecreasing: bool,
    /// Largest gap between the running `W*` and its recomputation from atoms.
    pub max_recompute_error: f64,
    pub replicas: usize,
}

/// Quantile `q` of `W*_t` at two horizons, with pathwise monotonicity on a
/// unit grid up to `t2`.
pub fn wstar_stability<R: Replicator>(
    spine: &SpineModel,
    t1: f64,
    t2: f64,
    q: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<WstarStability> {
    check_replicas(replicas)?;
    if !(t1 > 0.0 && t2 > t1) {
        return Err(Error::InvalidParameter("need 0 < t1 < t2".into()));
    }
    let mut grid: Vec<f64> = (0..=libm::ceil(t2) as usize).map(|k| k as f64).filter(|&s| s < t2).collect();
    grid.push(t1);
    grid.push(t2);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let i1 = grid.iter().position(|&s| s == t1).unwrap_or(0);
    let i2 = grid.len() - 1;
    let per: Vec<(f64, f64, bool, f64)> = rep
        .map(replicas, |r| {
            let s = spine.spine_replica(&grid, seed, r)?;
            let monotone = s.points.windows(2).all(|w| w[1].wstar >= w[0].wstar);
            let err = s
                .points
                .iter()
                .map(|p| (compute_wstar(&s.atoms, s.theta, s.kappa, p.time) - p.wstar).abs() / (1.0 + p.wstar))
                .fold(0.0, f64::max);
            Ok((s.points[i1].wstar, s.points[i2].wstar, monotone, err))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let a: Vec<f64> = per.iter().map(|p| p.0).collect();
    let b: Vec<f64> = per.iter().map(|p| p.1).collect();
    let quantile_t1 = quantile(&a, q);
    let quantile_t2 = quantile(&b, q);
    Ok(WstarStability {
        t1,
        t2,
        q,
        quantile_t1,
        quantile_t2,
        relative_change: (quantile_t2 - quantile_t1).abs() / quantile_t1,
        all_nondecreasing: per.iter().all(|p| p.2),
        max_recompute_error: per.iter().map(|p| p.3).fold(0.0, f64::max),
        replicas: per.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TiltedExceedance {
    pub times: Vec<f64>,
    pub threshold: f64,
    /// Fraction of replicas with `max_{s ≤ t} Ŵ_s > threshold`, the max taken
    /// over the query grid.
    pub fractions: Vec<f64>,
    pub increasing: bool,
    pub overflowed: usize,
}

pub fn tilted_exceedance<R: Replicator>(
    spine: &SpineModel,
    times: &[f64],
    step: f64,
    threshold: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<TiltedExceedance> {
    check_replicas(replicas)?;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("grid step must be > 0".into()));
    }
    let mut grid: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|&s| s < horizon).collect();
    grid.extend_from_slice(times);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let pops = tilted_populations(spine, &grid, replicas, seed, rep)?;
    let complete: Vec<&Vec<TiltedSnapshot>> = pops.iter().filter(|p| p.len() == grid.len()).collect();
    let fractions: Vec<f64> = times
        .iter()
        .map(|&t| {
            let hits = complete
                .iter()
                .filter(|p| p.iter().take_while(|s| s.time <= t).any(|s| s.w > threshold))
                .count();
            hits as f64 / complete.len().max(1) as f64
        })
        .collect();
    let increasing = fractions.windows(2).all(|w| w[1] >= w[0]) && fractions.last() > fractions.first();
    Ok(TiltedExceedance {
        times: times.to_vec(),
        threshold,
        fractions,
        increasing,
        overflowed: pops.len() - complete.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationCoupling {
    /// Ladder levels followed by the simulated truncation.
    pub levels: Vec<f64>,
    pub times: Vec<f64>,
    pub replicas: usize,
    pub checks: usize,
    /// Cases where `W^{(n)}_t` decreases in `n`, all levels normalized by the
    /// untruncated `κ(θ)`.
    pub violations: usize,
    /// The same count with every level normalized by its own `κ_n(θ)`.
    pub own_kappa_violations: usize,
    pub kappa: f64,
    pub level_kappas: Vec<f64>,
}

/// Pathwise monotonicity in `n` of the censoring-coupled `W^{(n)}_t`.
pub fn truncation_coupling<R: Replicator>(
    model: &SimModel,
    times: &[f64],
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<TruncationCoupling> {
    let n = model
        .truncation
        .ok_or_else(|| Error::Experiment("the coupling check needs a truncated simulation".to_string()))?;
    if model.options.ladder.is_empty() {
        return Err(Error::Experiment("the coupling check needs ladder levels below the truncation".to_string()));
    }
    let kappa = model.kappa_untruncated.ok_or_else(|| {
        Error::Experiment("the untruncated kappa is infinite; no common normalization exists".to_string())
    })?;
    let pops = populations(model, times, replicas, seed, rep)?;
    let mut levels = model.options.ladder.clone();
    levels.push(n);
    let mut level_kappas = model.ladder_kappas.clone();
    level_kappas.push(model.kappa);
    let (mut checks, mut violations, mut own) = (0, 0, 0);
    for p in &pops {
        for s in p {
            let mut masses = s.level_masses.clone();
            masses.push(s.mass);
            let common: Vec<f64> = masses.iter().map(|m| exp(-s.time * kappa) * m).collect();
            let scaled: Vec<f64> = masses.iter().zip(&level_kappas).map(|(m, k)| exp(-s.time * k) * m).collect();
            checks += 1;
            violations += usize::from(common.windows(2).any(|w| w[1] < w[0]));
            own += usize::from(scaled.windows(2).any(|w| w[1] < w[0]));
        }
    }
    Ok(TruncationCoupling {
        levels,
        times: times.to_vec(),
        replicas: pops.len(),
        checks,
        violations,
        own_kappa_violations: own,
        kappa,
        level_kappas,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CensoringConsistency {
    pub level: f64,
    pub t: f64,
    pub functional: Functional,
    /// `E[W^{(ℓ)}_t F(Z^{(ℓ)}_t)]` from the coupled untilted system.
    pub lhs: Estimate,
    /// `F(Ẑ^{(ℓ)}_t)` over tilted replicas whose spine survives censoring.
    pub rhs: Estimate,
    pub kept_fraction: f64,
    /// `P̂(T^{(ℓ)}_* > t) = e^{-t(κ - κ_ℓ)}`.
    pub expected_kept: f64,
    pub z: f64,
}

/// The tilted system conditioned on `T^{(ℓ)}_* > t` and censored at `ℓ` has
/// the law of the tilted system of the `ℓ`-truncated model.
pub fn censoring_consistency<R: Replicator>(
    spine: &SpineModel,
    level_index: usize,
    functional: Functional,
    t: f64,
    replicas: u64,
    seed: u64,
    rep: &R,
) -> Result<CensoringConsistency> {
    check_replicas(replicas)?;
    let sim = &spine.sim;
    let level = *sim
        .options
        .ladder
        .get(level_index)
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("no ladder level with index {level_index}")))?;
    let kappa_l = sim.ladder_kappas[level_index];
    let plain = populations(sim, &[t], replicas, seed, rep)?;
    let lhs: Vec<f64> = plain
        .iter()
        .filter_map(|p| p.first())
        .map(|s| {
            let mass = s.level_masses[level_index];
            let w = exp(-t * kappa_l) * mass;
            w * functional.eval(s.level_counts[level_index], mass, w)
        })
        .collect();
    let tilted: Vec<Option<f64>> = rep
        .map(replicas, |r| match spine.simulate_tilted_system(&[t], seed, r) {
            Ok(tr) => Ok(match (tr.spine.killing_time(level), tr.snapshots.first()) {
                (None, Some(s)) => {
                    let mass = s.level_masses[level_index];
                    let w = exp(-t * kappa_l) * mass;
                    Some(Some(functional.eval(s.level_counts[level_index], mass, w)))
                }
                (Some(_), Some(_)) => Some(None),
                (_, None) => None,
            }),
            Err(Error::Overflow(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let rhs: Vec<f64> = tilted.iter().flatten().copied().collect();
    let lhs = Estimate::from_samples(&lhs);
    let rhs_est = Estimate::from_samples(&rhs);
    let z = z_score(
        lhs.mean - rhs_est.mean,
        sqrt(lhs.std_error * lhs.std_error + rhs_est.std_error * rhs_est.std_error),
    );
    Ok(CensoringConsistency {
        level,
        t,
        functional,
        lhs,
        rhs: rhs_est,
        kept_fraction: rhs.len() as f64 / tilted.len().max(1) as f64,
        expected_kept: exp(-t * (sim.kappa - kappa_l)),
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Sequential;
    use super::*;
    use crate::cumulant::Triplet;
    use crate::engine::SimOptions;
    use crate::measure::{Atom, FiniteDiscrete};
    use alloc::vec;

    fn finite(atoms: Vec<(f64, Vec<f64>)>) -> BranchingLevyMeasure {
        BranchingLevyMeasure::Finite(
            FiniteDiscrete::new(atoms.into_iter().map(|(r, c)| Atom::new(r, c).unwrap()).collect()).unwrap(),
        )
    }

    fn sim(sigma2: f64, a: f64, m: BranchingLevyMeasure, theta: f64, opts: SimOptions) -> SimModel {
        SimModel::new(Triplet::new(sigma2, a, m, theta).unwrap(), opts).unwrap()
    }

    fn yule() -> SimModel {
        sim(0.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0, SimOptions::default())
    }

    #[test]
    fn pure_drift_mean_is_exact() {
        let m = sim(0.0, 0.4, BranchingLevyMeasure::zero(), 1.5, SimOptions::default());
        let r = martingale_mean(&m, 3.0, 20, 1, &Sequential).unwrap();
        assert!((r.estimate.mean - 1.0).abs() < 1e-12);
        assert_eq!(r.estimate.std_error, 0.0);
        assert_eq!(r.z, 0.0);
        let lp = lp_moment_check(&m, 1.7, &[1.0, 2.0], true, 10, 1, &Sequential).unwrap();
        assert!(lp.estimates.iter().all(|e| (e.mean - 1.0).abs() < 1e-12));
        assert!(lp.certifiable);
    }

    #[test]
    fn yule_mean_and_degeneracy_verdict() {
        let m = yule();
        let r = martingale_mean(&m, 3.0, 2000, 2, &Sequential).unwrap();
        assert!(r.z < 4.0, "{r:?}");
        let d = degeneracy_diagnostic(&m, &[2.0, 4.0, 6.0, 8.0], 0.1, 400, 2, &Sequential).unwrap();
        assert!(d.final_median > 0.2, "{d:?}");
        assert!(!d.consistent);
    }

    #[test]
    fn yule_limit_law_rejects_at_time_zero() {
        let r = yule_limit_law_check(&yule(), 0.0, 200, 3, &Sequential).unwrap();
        assert!(r.ks.p_value < 1e-6);
        assert!(r.ks.statistic > 0.5);
        let bbm = sim(1.0, 0.0, finite(vec![(1.0, vec![0.0, 0.0])]), 1.0, SimOptions::default());
        assert!(yule_limit_law_check(&bbm, 1.0, 10, 3, &Sequential).is_err());
    }

    #[test]
    fn yule_second_moments() {
        let m = yule();
        let lp = lp_moment_check(&m, 2.0, &[1.0, 2.0], true, 3000, 4, &Sequential).unwrap();
        for (t, e) in lp.times.iter().zip(&lp.estimates) {
            assert!(e.z_against(yule_second_moment(*t)) < 4.0, "{t}: {e:?}");
        }
    }

    #[test]
    fn se_shrinks_with_replicas() {
        let m = yule();
        let a = martingale_mean(&m, 2.0, 2000, 5, &Sequential).unwrap().estimate.std_error;
        let b = martingale_mean(&m, 2.0, 4000, 5, &Sequential).unwrap().estimate.std_error;
        let ratio = a / b;
        assert!((ratio - 2f64.sqrt()).abs() < 0.1 * 2f64.sqrt(), "{ratio}");
    }

    #[test]
    fn change_of_measure_on_yule() {
        let s = SpineModel::new(yule()).unwrap();
        for f in [Functional::One, Functional::CountAtMost { k: 3 }, Functional::MinOneW] {
            let r = change_of_measure_check(&s, f, 1.0, 2000, 6, &Sequential).unwrap();
            assert!(r.z < 4.0, "{r:?}");
        }
    }

    #[test]
    fn censoring_consistency_on_finite_model() {
        // a child at -1.5 is censored at level 1 but kept by the simulation
        let opts = SimOptions { ladder: vec![1.0], ..SimOptions::default() };
        let m = sim(0.5, 0.1, finite(vec![(0.8, vec![0.0, -1.5]), (0.3, vec![0.2, 0.0])]), 0.7, opts);
        let s = SpineModel::new(m).unwrap();
        for f in [Functional::One, Functional::CountAtMost { k: 2 }, Functional::MinOneMass] {
            let r = censoring_consistency(&s, 0, f, 1.0, 3000, 7, &Sequential).unwrap();
            assert!(r.z < 4.0, "{r:?}");
            let se = (r.expected_kept * (1.0 - r.expected_kept) / 3000.0).sqrt();
            assert!((r.kept_fraction - r.expected_kept).abs() < 4.0 * se, "{r:?}");
        }
    }

    #[test]
    fn coupling_is_monotone_with_common_normalization() {
        let opts = SimOptions { ladder: vec![1.0], truncation: Some(2.0), ..SimOptions::default() };
        let m = sim(0.0, 0.0, finite(vec![(1.0, vec![0.0, -1.5]), (0.5, vec![0.0, -3.0])]), 1.0, opts);
        let r = truncation_coupling(&m, &[0.5, 1.0, 2.0], 50, 8, &Sequential).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.checks, 150);
        assert_eq!(r.levels, vec![1.0, 2.0]);
    }

    #[test]
    fn wstar_diagnostics_on_yule() {
        let s = SpineModel::new(yule()).unwrap();
        let w = wstar_stability(&s, 2.0, 4.0, 0.9, 200, 9, &Sequential).unwrap();
        assert!(w.all_nondecreasing);
        assert!(w.max_recompute_error < 1e-12);
        // Yule: W*_∞ = Σ e^{-s} over rate-2 atoms, finite
        assert!(w.quantile_t2 >= w.quantile_t1);
    }

    #[test]
    fn experiments_are_deterministic() {
        let m = yule();
        let a = martingale_mean(&m, 2.0, 50, 10, &Sequential).unwrap();
        let b = martingale_mean(&m, 2.0, 50, 10, &Sequential).unwrap();
        assert_eq!(a, b);
    }
}
