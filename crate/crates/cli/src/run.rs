use std::path::PathBuf;

use branchlevy_core::engine::SimModel;
use branchlevy_core::mc::{Estimate, Replicator};
use branchlevy_core::spine::SpineModel;
use branchlevy_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::expr::Number;
use crate::output::{spine_csv, to_json_string, trajectory_csv, OutputDir};
use crate::scenario::{Built, Experiment, Scenario};
use crate::verify::{self, CheckOutcome, Runner};
use crate::{CliError, Parallel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Command {
    Criteria,
    Simulate,
    Spine,
    Verify,
    Lp { p: Option<f64>, q: Option<f64> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Criteria => "criteria",
            Command::Simulate => "simulate",
            Command::Spine => "spine",
            Command::Verify => "verify",
            Command::Lp { .. } => "lp",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub truncation: Option<f64>,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub tolerance_report: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// Lines meant for stdout.
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Applies the command-line overrides; the result is what gets hashed.
fn effective(scenario: &Scenario, opts: &RunOptions) -> Result<(Scenario, Built), CliError> {
    let mut s = scenario.clone();
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    if let Some(r) = opts.replicas {
        s.replicas = r;
    }
    if let Some(n) = opts.truncation {
        s.truncation = Some(Number::new(n));
    }
    let built = s.build().map_err(CliError::Config)?;
    Ok((s, built))
}

/// Numerical settings behind every reported number.
fn tolerances(sim: &SimModel) -> Value {
    json!({
        "small_jump_cutoff": sim.options.small_jump_cutoff,
        "small_jump_bias": sim.small_jump_bias,
        "truncation": sim.truncation,
        "truncation_from_budget": sim.truncation_from_budget,
        "branch_rate_budget": sim.options.branch_rate_budget,
        "index_cap": sim.options.index_cap,
        "kappa_simulated": sim.kappa,
        "kappa_untruncated": sim.kappa_untruncated,
        "quadrature": { "abs": 1e-11, "rel": 1e-13 },
        "boundary_margin": 1e-12,
        "boundary_theta": 1e-6,
        "z_max": verify::Z_MAX,
        "spine_slope_z_max": verify::SLOPE_Z_MAX,
        "characteristic_z_max": verify::CHARACTERISTIC_Z_MAX,
        "ks_p_min": verify::KS_P_MIN,
        "degeneracy_threshold": verify::DEGENERACY_THRESHOLD,
        "non_degenerate_floor": verify::NON_DEGENERATE_FLOOR,
        "wstar_quantile": verify::WSTAR_QUANTILE,
        "wstar_max_relative_change": verify::WSTAR_MAX_CHANGE,
        "exceedance_threshold": verify::EXCEEDANCE_THRESHOLD,
    })
}

#[derive(Serialize)]
struct TimeSummary {
    time: f64,
    w: Estimate,
    n_particles: Estimate,
    replicas: usize,
}

pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    let (s, built) = effective(scenario, opts)?;
    let toml = s.to_toml_string();
    let rep = Parallel::new(opts.jobs);
    let mut out = OutputDir::create(&opts.out)?;
    let mut lines = Vec::new();
    let mut warnings = Vec::new();
    let mut exit_code = 0;
    let sim = SimModel::new(built.triplet.clone(), built.options.clone())?;
    if sim.truncation_from_budget {
        warnings.push(format!(
            "no truncation given: simulating π_n with n = {:.4} chosen from the branch-rate budget {}",
            sim.truncation.unwrap_or(f64::NAN),
            sim.options.branch_rate_budget
        ));
    }
    let tol = opts.tolerance_report.then(|| tolerances(&sim));
    if let Some(t) = &tol {
        warnings.push(format!("tolerances: {t}"));
    }
    let mut report = json!({ "scenario": s.name, "command": command.name(), "seed": s.seed });

    match command {
        Command::Criteria => {
            let r = built.triplet.check_criterion()?;
            lines.push(format!("verdict: {}", serde_json::to_value(r.verdict).unwrap_or_default().as_str().unwrap_or("?")));
            lines.push(format!(
                "kappa(theta) = {}, kappa'(theta) = {}, theta kappa' - kappa = {:e}{}",
                r.kappa_theta,
                r.kappa_prime_theta,
                r.cond1.margin,
                if r.boundary { " (boundary)" } else { "" }
            ));
            report["criterion"] = serde_json::to_value(&r).unwrap_or_default();
            report["tail_integral"] =
                serde_json::to_value(built.triplet.tail_integral_dichotomy(1.0)?).unwrap_or_default();
            for e in &s.experiments {
                if let Experiment::Lp { p, q: Some(q), .. } = e {
                    let lp = built.triplet.check_lp(p.value, q.value)?;
                    lines.push(format!("L^{} bounded: {}", p, lp.bounded));
                    report["lp"] = serde_json::to_value(&lp).unwrap_or_default();
                }
            }
        }
        Command::Simulate => {
            let times = &built.query_times;
            let rows: Vec<(u64, Option<_>)> = rep
                .map(s.replicas, |r| match sim.simulate(times, s.seed, r) {
                    Ok(tr) => Ok((r, Some(tr))),
                    Err(Error::Overflow(_)) => Ok((r, None)),
                    Err(e) => Err(e),
                })
                .into_iter()
                .collect::<Result<_, _>>()?;
            let overflowed = rows.iter().filter(|(_, t)| t.as_ref().is_none_or(|t| t.overflow)).count();
            if overflowed > 0 {
                warnings.push(format!(
                    "overflow: {overflowed} of {} replicas hit the population caps; their rows stop at the last time reached",
                    s.replicas
                ));
            }
            out.write("trajectory.csv", &trajectory_csv(&rows))?;
            let summary: Vec<TimeSummary> = times
                .iter()
                .enumerate()
                .map(|(i, &time)| {
                    let snaps: Vec<_> = rows.iter().filter_map(|(_, t)| t.as_ref()?.snapshots.get(i)).collect();
                    let ws: Vec<f64> = snaps.iter().map(|x| x.w).collect();
                    let ns: Vec<f64> = snaps.iter().map(|x| x.n_particles as f64).collect();
                    TimeSummary { time, w: Estimate::from_samples(&ws), n_particles: Estimate::from_samples(&ns), replicas: ws.len() }
                })
                .collect();
            lines.push(format!("{} replicas, {} query times, {} overflowed", s.replicas, times.len(), overflowed));
            report["kappa"] = json!(sim.kappa);
            report["truncation"] = json!(sim.truncation);
            report["small_jump_bias"] = json!(sim.small_jump_bias);
            report["branch_rate"] = json!(sim.branch_rate());
            report["overflowed_replicas"] = json!(overflowed);
            report["per_time"] = serde_json::to_value(&summary).unwrap_or_default();
        }
        Command::Spine => {
            let spine = SpineModel::new(sim.clone())?;
            let times = &built.query_times;
            let rows: Vec<(u64, _)> = rep
                .map(s.replicas, |r| spine.spine_replica(times, s.seed, r).map(|t| (r, t)))
                .into_iter()
                .collect::<Result<_, _>>()?;
            out.write("spine.csv", &spine_csv(&rows))?;
            let per_time: Vec<Value> = times
                .iter()
                .enumerate()
                .map(|(i, &time)| {
                    let xs: Vec<f64> = rows.iter().map(|(_, t)| t.points[i].xi_hat).collect();
                    let ws: Vec<f64> = rows.iter().map(|(_, t)| t.points[i].wstar).collect();
                    json!({ "time": time, "xi_hat": Estimate::from_samples(&xs), "wstar": Estimate::from_samples(&ws) })
                })
                .collect();
            lines.push(format!("{} spine replicas, tilted event rate {}", s.replicas, spine.tilted_rate()));
            report["kappa"] = json!(spine.kappa());
            report["tilted_rate"] = json!(spine.tilted_rate());
            report["drift_between_events"] = json!(spine.drift);
            report["kappa_prime"] = json!(built.triplet.kappa_prime().ok());
            report["per_time"] = Value::Array(per_time);
        }
        Command::Verify => {
            let mut runner = Runner::new(&s, &built, opts.replicas, &rep)?;
            let checks: Vec<CheckOutcome> = runner.verify()?;
            let passed = checks.iter().all(|c| c.passed);
            lines.extend(checks.iter().map(CheckOutcome::line));
            lines.push(format!("{} of {} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len()));
            if !passed {
                exit_code = 1;
            }
            report["passed"] = json!(passed);
            report["checks"] = serde_json::to_value(&checks).unwrap_or_default();
        }
        Command::Lp { p, q } => {
            let from_scenario = s.experiments.iter().find_map(|e| match e {
                Experiment::Lp { p, q, times, .. } => Some((p.value, q.as_ref().map(|q| q.value), times.clone())),
                _ => None,
            });
            let p = p.or(from_scenario.as_ref().map(|x| x.0)).unwrap_or(2.0);
            let q = q.or(from_scenario.as_ref().and_then(|x| x.1)).ok_or_else(|| {
                CliError::Config(vec!["lp: missing q (pass --q or add an lp experiment with q)".into()])
            })?;
            let times = match from_scenario {
                Some((_, _, t)) if !t.is_empty() => t,
                _ => built.query_times.iter().filter(|&&t| t > 0.0).map(|&t| Number::new(t)).collect(),
            };
            let exp = Experiment::Lp {
                p: Number::new(p),
                q: Some(Number::new(q)),
                times,
                expect_bounded: None,
                reference: None,
                replicas: None,
            };
            let mut runner = Runner::new(&s, &built, opts.replicas, &rep)?;
            let checks = runner.run(&exp)?;
            lines.extend(checks.iter().map(|c| format!("{}: {}", c.label, c.summary)));
            report["checks"] = serde_json::to_value(&checks).unwrap_or_default();
        }
    }
    if let Some(t) = tol {
        report["tolerances"] = t;
    }
    out.write("report.json", &to_json_string(&report))?;
    let files = out.finish(command.name(), &s.name, &toml, s.seed)?;
    Ok(RunOutcome { exit_code, lines, warnings, files })
}
