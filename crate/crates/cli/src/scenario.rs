//! Scenario files: one TOML document declaring a triplet, simulation settings
//! and a list of experiments.

use std::path::Path;

use branchlevy_core::engine::{Caps, SimOptions};
use branchlevy_core::mc::Functional;
use branchlevy_core::measure::{Atom, BinaryFragmentation, FiniteDiscrete, HeavyOffspring};
use branchlevy_core::{BranchingLevyMeasure, Triplet, Verdict};
use serde::{Deserialize, Serialize};

use crate::expr::Number;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "zero")]
    pub sigma2: Number,
    #[serde(default = "zero")]
    pub a: Number,
    #[serde(default = "one")]
    pub theta: Number,
    pub measure: MeasureDecl,
    /// Level `n` of `π_n`; unset lets the simulator pick one when needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Number>,
    #[serde(default = "one")]
    pub horizon: Number,
    /// Defaults to eleven equally spaced times on `[0, horizon]`.
    #[serde(default)]
    pub query_times: Vec<Number>,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulation: SimulationDecl,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<Experiment>,
}

fn zero() -> Number {
    Number::new(0.0)
}

fn one() -> Number {
    Number::new(1.0)
}

fn default_replicas() -> u64 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDecl {
    /// `zero`, `finite`, `heavy_offspring` or `fragmentation`.
    pub family: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_exponent: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_scale: Option<Number>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDecl {
    pub rate: Number,
    /// Non-increasing displacements; `"-inf"` marks a dead parent.
    pub config: Vec<Number>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDecl {
    #[serde(default = "default_cutoff")]
    pub small_jump_cutoff: Number,
    #[serde(default = "default_index_cap")]
    pub index_cap: u64,
    #[serde(default = "default_budget")]
    pub branch_rate_budget: Number,
    #[serde(default = "default_max_particles")]
    pub max_particles: usize,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    /// Lower truncation levels read off the same run.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<Number>,
}

fn default_cutoff() -> Number {
    Number::new(SimOptions::default().small_jump_cutoff)
}

fn default_index_cap() -> u64 {
    SimOptions::default().index_cap
}

fn default_budget() -> Number {
    Number::new(SimOptions::default().branch_rate_budget)
}

fn default_max_particles() -> usize {
    Caps::default().max_particles
}

fn default_max_events() -> u64 {
    Caps::default().max_events
}

impl Default for SimulationDecl {
    fn default() -> Self {
        Self {
            small_jump_cutoff: default_cutoff(),
            index_cap: default_index_cap(),
            branch_rate_budget: default_budget(),
            max_particles: default_max_particles(),
            max_events: default_max_events(),
            ladder: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyExpectation {
    /// Medians non-increasing and the last one below the threshold.
    Degenerate,
    /// Medians non-increasing; no level claimed.
    Monotone,
    /// Last median above the floor.
    NonDegenerate,
}

/// One entry of `[[experiments]]`. Unset tolerances take the defaults
/// listed in [`crate::verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Criterion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Verdict>,
    },
    Lp {
        p: Number,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Number>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        times: Vec<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_bounded: Option<bool>,
        /// Closed-form `E[W_t^p]` to compare against: only `yule` is known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    MartingaleMean {
        t: Number,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    Degeneracy {
        times: Vec<Number>,
        expect: DegeneracyExpectation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    YuleLaw {
        t: Number,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        moment_times: Vec<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_min: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    ChangeOfMeasure {
        times: Vec<Number>,
        functionals: Vec<Functional>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    SpineSlope {
        t: Number,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    SpineCharacteristic {
        #[serde(default = "one")]
        t: Number,
        r: Vec<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    Wstar {
        t1: Number,
        t2: Number,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_relative_change: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    TiltedExceedance {
        times: Vec<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    TruncationCoupling {
        times: Vec<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
    Censoring {
        level: Number,
        t: Number,
        functional: Functional,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_max: Option<Number>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replicas: Option<u64>,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Criterion { .. } => "criterion",
            Experiment::Lp { .. } => "lp",
            Experiment::MartingaleMean { .. } => "martingale_mean",
            Experiment::Degeneracy { .. } => "degeneracy",
            Experiment::YuleLaw { .. } => "yule_law",
            Experiment::ChangeOfMeasure { .. } => "change_of_measure",
            Experiment::SpineSlope { .. } => "spine_slope",
            Experiment::SpineCharacteristic { .. } => "spine_characteristic",
            Experiment::Wstar { .. } => "wstar",
            Experiment::TiltedExceedance { .. } => "tilted_exceedance",
            Experiment::TruncationCoupling { .. } => "truncation_coupling",
            Experiment::Censoring { .. } => "censoring",
        }
    }
}

/// What a scenario builds into: the model and the settings of its runs.
#[derive(Clone, Debug)]
pub struct Built {
    pub triplet: Triplet,
    pub options: SimOptions,
    pub query_times: Vec<f64>,
}

fn values(xs: &[Number]) -> Vec<f64> {
    xs.iter().map(|x| x.value).collect()
}

fn check_times(what: &str, times: &[f64], errors: &mut Vec<String>) {
    if times.is_empty() {
        errors.push(format!("{what}: at least one time is needed"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        errors.push(format!("{what}: times must be finite and ≥ 0"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        errors.push(format!("{what}: times must be sorted"));
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        if s.query_times.is_empty() {
            let h = s.horizon.value;
            s.query_times = (0..=10).map(|k| Number::new(h * k as f64 / 10.0)).collect();
        }
        s.build().map_err(CliError::Config)?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenarios always serialize")
    }

    pub fn query_times(&self) -> Vec<f64> {
        values(&self.query_times)
    }

    fn measure(&self, errors: &mut Vec<String>) -> Option<BranchingLevyMeasure> {
        let m = &self.measure;
        let need = |name: &str, v: &Option<Number>, errors: &mut Vec<String>| {
            if v.is_none() {
                errors.push(format!("family `{}` needs `{name}`", m.family));
            }
            v.as_ref().map(|n| n.value)
        };
        match m.family.as_str() {
            "zero" => Some(BranchingLevyMeasure::zero()),
            "finite" => {
                let mut atoms = Vec::new();
                if m.atoms.is_empty() {
                    errors.push("family `finite` needs at least one atom".into());
                }
                for (k, a) in m.atoms.iter().enumerate() {
                    if !(a.rate.value > 0.0 && a.rate.value.is_finite()) {
                        errors.push(format!("atom {}: rate must be finite and > 0, got {}", k + 1, a.rate));
                        continue;
                    }
                    match Atom::new(a.rate.value, values(&a.config)) {
                        Ok(atom) => atoms.push(atom),
                        Err(e) => errors.push(format!("atom {}: {e}", k + 1)),
                    }
                }
                if atoms.len() != m.atoms.len() || atoms.is_empty() {
                    return None;
                }
                match FiniteDiscrete::new(atoms) {
                    Ok(f) => Some(BranchingLevyMeasure::Finite(f)),
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            }
            "heavy_offspring" => {
                let scale = m.scale.as_ref().map_or(1.0, |n| n.value);
                let beta = m.log_exponent.as_ref().map_or(2.0, |n| n.value);
                match HeavyOffspring::new(scale, beta, m.first_index.unwrap_or(3), m.index_cap) {
                    Ok(h) => Some(BranchingLevyMeasure::HeavyOffspring(h)),
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            }
            "fragmentation" => {
                let alpha = need("alpha", &m.alpha, errors)?;
                let c = m.density_scale.as_ref().map_or(1.0, |n| n.value);
                match BinaryFragmentation::new(alpha, c) {
                    Ok(f) => Some(BranchingLevyMeasure::Fragmentation(f)),
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            }
            other => {
                errors.push(format!(
                    "unknown family `{other}` (expected zero, finite, heavy_offspring or fragmentation)"
                ));
                None
            }
        }
    }

    /// Validates everything and reports every problem found.
    pub fn build(&self) -> Result<Built, Vec<String>> {
        let mut errors = Vec::new();
        if self.name.trim().is_empty() {
            errors.push("name must not be empty".into());
        }
        let sigma2 = self.sigma2.value;
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            errors.push(format!("sigma2 must be ≥ 0, got {}", self.sigma2));
        }
        if !self.a.value.is_finite() {
            errors.push(format!("a must be finite, got {}", self.a));
        }
        let theta = self.theta.value;
        if !(theta >= 0.0 && theta.is_finite()) {
            errors.push(format!("theta must be ≥ 0, got {}", self.theta));
        }
        let measure = self.measure(&mut errors);
        let horizon = self.horizon.value;
        if !(horizon > 0.0 && horizon.is_finite()) {
            errors.push(format!("horizon must be finite and > 0, got {}", self.horizon));
        }
        let query_times = self.query_times();
        check_times("query_times", &query_times, &mut errors);
        if query_times.iter().any(|&t| t > horizon) {
            errors.push("query_times must lie in [0, horizon]".into());
        }
        let truncation = self.truncation.as_ref().map(|n| n.value);
        if let Some(n) = truncation {
            if !(n > 0.0) {
                errors.push(format!("truncation must be > 0, got {n}"));
            }
        }
        if self.replicas == 0 {
            errors.push("replicas must be ≥ 1".into());
        }
        let sim = &self.simulation;
        let cutoff = sim.small_jump_cutoff.value;
        if !(cutoff > 0.0 && cutoff < 1.0) {
            errors.push(format!("small_jump_cutoff must lie in (0, 1), got {}", sim.small_jump_cutoff));
        }
        if sim.index_cap < 3 {
            errors.push("index_cap must be ≥ 3".into());
        }
        if !(sim.branch_rate_budget.value > 0.0) {
            errors.push("branch_rate_budget must be > 0".into());
        }
        if sim.max_particles == 0 || sim.max_events == 0 {
            errors.push("max_particles and max_events must be ≥ 1".into());
        }
        let ladder = values(&sim.ladder);
        for &l in &ladder {
            if !(l >= 1.0) || truncation.is_some_and(|n| l > n) {
                errors.push(format!("ladder level {l} must be ≥ 1 and not above the truncation"));
            }
        }
        for (k, e) in self.experiments.iter().enumerate() {
            self.check_experiment(k + 1, e, &ladder, &mut errors);
        }

        let triplet = match measure {
            Some(m) if errors.is_empty() => match Triplet::new(sigma2, self.a.value, m, theta) {
                Ok(t) => Some(t),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            },
            _ => None,
        };
        if let Some(t) = &triplet {
            match t.measure.levy_integral() {
                Ok(i) if i.value.is_finite() => {}
                Ok(_) => errors.push("(4) fails: the integral of 1 ∧ x_1² is infinite".into()),
                Err(e) => errors.push(format!("(4) fails: {e}")),
            }
            match t.measure.exponential_integral(theta) {
                Ok(i) if i.value.is_finite() => {}
                Ok(_) => errors.push(format!("(5) fails at theta = {theta}: the exponential integral is infinite")),
                Err(e) => errors.push(format!("(5) fails: {e}")),
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let options = SimOptions {
            truncation,
            small_jump_cutoff: cutoff,
            index_cap: sim.index_cap,
            branch_rate_budget: sim.branch_rate_budget.value,
            caps: Caps { max_particles: sim.max_particles, max_events: sim.max_events },
            record_positions: false,
            ladder,
        };
        Ok(Built { triplet: triplet.expect("no errors"), options, query_times })
    }

    fn check_experiment(&self, k: usize, e: &Experiment, ladder: &[f64], errors: &mut Vec<String>) {
        let at = |msg: &str| format!("experiment {k} ({}): {msg}", e.name());
        let positive = |x: &Number| x.value > 0.0 && x.value.is_finite();
        match e {
            Experiment::Criterion { .. } => {}
            Experiment::Lp { p, q, times, .. } => {
                if !(p.value > 1.0 && p.value <= 2.0) {
                    errors.push(at(&format!("p must lie in (1, 2], got {p}")));
                }
                match q {
                    None => errors.push(at("missing q (the exponent with κ(qθ) < ∞, q > p)")),
                    Some(q) if !(q.value > p.value) => errors.push(at(&format!("q must exceed p, got {q}"))),
                    _ => {}
                }
                if !times.is_empty() {
                    check_times(&at("times"), &values(times), errors);
                }
            }
            Experiment::MartingaleMean { t, .. } | Experiment::SpineSlope { t, .. } => {
                if !positive(t) {
                    errors.push(at("t must be > 0"));
                }
            }
            Experiment::Degeneracy { times, .. } | Experiment::TiltedExceedance { times, .. } => {
                check_times(&at("times"), &values(times), errors)
            }
            Experiment::YuleLaw { t, moment_times, .. } => {
                if !(t.value >= 0.0) {
                    errors.push(at("t must be ≥ 0"));
                }
                if !moment_times.is_empty() {
                    check_times(&at("moment_times"), &values(moment_times), errors);
                }
            }
            Experiment::ChangeOfMeasure { times, functionals, .. } => {
                check_times(&at("times"), &values(times), errors);
                if functionals.is_empty() {
                    errors.push(at("at least one functional is needed"));
                }
            }
            Experiment::SpineCharacteristic { t, r, .. } => {
                if !positive(t) {
                    errors.push(at("t must be > 0"));
                }
                if r.is_empty() {
                    errors.push(at("at least one r is needed"));
                }
            }
            Experiment::Wstar { t1, t2, q, .. } => {
                if !(positive(t1) && t2.value > t1.value) {
                    errors.push(at("need 0 < t1 < t2"));
                }
                if q.as_ref().is_some_and(|q| !(q.value > 0.0 && q.value < 1.0)) {
                    errors.push(at("q must lie in (0, 1)"));
                }
            }
            Experiment::TruncationCoupling { times, .. } => {
                check_times(&at("times"), &values(times), errors);
                if ladder.is_empty() {
                    errors.push(at("needs ladder levels in [simulation]"));
                }
                if self.truncation.is_none() && self.measure.family != "fragmentation" {
                    errors.push(at("needs a truncation"));
                }
            }
            Experiment::Censoring { level, t, .. } => {
                if !ladder.contains(&level.value) {
                    errors.push(at(&format!("level {level} must be one of the ladder levels")));
                }
                if !positive(t) {
                    errors.push(at("t must be > 0"));
                }
            }
        }
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    Scenario::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors_of(text: &str) -> Vec<String> {
        match Scenario::from_toml_str(text) {
            Err(CliError::Config(e)) => e,
            other => panic!("expected a configuration error, got {other:?}"),
        }
    }

    const YULE: &str = "name = \"y\"\n[measure]\nfamily = \"finite\"\natoms = [{ rate = 1, config = [0, 0] }]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let s = Scenario::from_toml_str(YULE).unwrap();
        assert_eq!(s.sigma2.value, 0.0);
        assert_eq!(s.theta.value, 1.0);
        assert_eq!(s.query_times.len(), 11);
        assert_eq!(s.replicas, 100);
        assert_eq!(s.simulation, SimulationDecl::default());
        let b = s.build().unwrap();
        assert_eq!(b.triplet.kappa_real(1.0).unwrap(), 1.0);
    }

    #[test]
    fn negative_sigma2_is_reported() {
        let e = errors_of(&format!("sigma2 = -1\n{YULE}"));
        assert!(e.iter().any(|m| m.contains("sigma2 must be ≥ 0")), "{e:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "name = \"x\"\nsigma2 = -1\ntheta = -2\n[measure]\nfamily = \"finite\"\natoms = [{ rate = -1, config = [0] }, { rate = 1, config = [0, 1] }]\n[[experiments]]\nkind = \"lp\"\np = 1.5\n";
        let e = errors_of(text);
        assert!(e.iter().any(|m| m.contains("sigma2")));
        assert!(e.iter().any(|m| m.contains("theta must be ≥ 0")));
        assert!(e.iter().any(|m| m.contains("atom 1: rate")));
        assert!(e.iter().any(|m| m.contains("atom 2")));
        assert!(e.iter().any(|m| m.contains("missing q")));
        assert!(e.len() >= 5, "{e:?}");
    }

    #[test]
    fn unknown_family() {
        let e = errors_of("name = \"x\"\n[measure]\nfamily = \"levy_flight\"\n");
        assert!(e[0].contains("unknown family `levy_flight`"));
    }

    #[test]
    fn fragmentation_needs_theta_above_alpha() {
        let e = errors_of("name = \"f\"\ntheta = 0.3\n[measure]\nfamily = \"fragmentation\"\nalpha = 0.5\n");
        assert!(e.iter().any(|m| m.starts_with("(5) fails") && m.contains("theta > alpha")), "{e:?}");
    }

    #[test]
    fn expressions_round_trip() {
        let text = "name = \"m\"\n[measure]\nfamily = \"finite\"\natoms = [{ rate = \"1/3\", config = [\"ln(2)\", \"-inf\"] }]\n";
        let s = Scenario::from_toml_str(text).unwrap();
        assert_eq!(s.measure.atoms[0].config[0].value, 2f64.ln());
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_toml_string(), s.to_toml_string());
    }
}
