//! Bundled experiment specs for the standard figures, at n = 2000.

use crate::error::CliError;
use crate::spec::ExperimentSpec;

pub const FIGURES: [(&str, &str); 6] = [
    ("fig1-left", include_str!("../figures/fig1-left.toml")),
    ("fig1-right", include_str!("../figures/fig1-right.toml")),
    ("fig2-left", include_str!("../figures/fig2-left.toml")),
    ("fig2-right", include_str!("../figures/fig2-right.toml")),
    ("fig3-left", include_str!("../figures/fig3-left.toml")),
    ("fig3-right", include_str!("../figures/fig3-right.toml")),
];

pub fn figure_ids() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(|(id, _)| *id)
}

pub fn figure_spec(id: &str) -> Result<ExperimentSpec, CliError> {
    let text = FIGURES
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<_> = figure_ids().collect();
            CliError::Validation(format!("unknown figure `{id}`; available: {}", known.join(", ")))
        })?;
    ExperimentSpec::from_toml(text)
}
