//! Built-in scenarios, shipped verbatim from `scenarios/`.

use std::path::Path;

use crate::scenario::Scenario;
use crate::CliError;

const BUILTINS: [(&str, &str); 7] = [
    ("yule", include_str!("../scenarios/yule.toml")),
    ("bbm_ui", include_str!("../scenarios/bbm_ui.toml")),
    ("bbm_degenerate", include_str!("../scenarios/bbm_degenerate.toml")),
    ("heavy_offspring", include_str!("../scenarios/heavy_offspring.toml")),
    ("fragmentation", include_str!("../scenarios/fragmentation.toml")),
    ("log2_motion", include_str!("../scenarios/log2_motion.toml")),
    ("pure_drift", include_str!("../scenarios/pure_drift.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin(name: &str) -> Result<Scenario, CliError> {
    let text = source(name).ok_or_else(|| CliError::Config(vec![format!("no built-in scenario named `{name}`")]))?;
    Scenario::from_toml_str(text)
}

/// A path to a scenario file, or the name of a built-in one.
pub fn load(spec: &str) -> Result<Scenario, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        return crate::scenario::parse_scenario(path);
    }
    if source(spec).is_some() {
        return builtin(spec);
    }
    Err(CliError::Config(vec![format!(
        "`{spec}` is neither a scenario file nor a built-in scenario ({})",
        names().collect::<Vec<_>>().join(", ")
    )]))
}
