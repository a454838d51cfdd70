//! Experiment description files (TOML, unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spiketrans_core::{MeasureSpec, NoiseMeasure, Setting, TransformSpec};
use spiketrans_sim::VectorScheme;

use crate::error::CliError;

/// A list of values, or `{ start, stop, points }` for an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace(Linspace),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Linspace(l) => linspace(l.start, l.stop, l.points),
        }
    }
}

pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialsRule {
    /// `m = ⌊√n⌋`.
    SqrtN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trials {
    Count(usize),
    Rule(TrialsRule),
}

impl Trials {
    pub fn resolve(&self, n: usize) -> usize {
        match self {
            Self::Count(m) => *m,
            Self::Rule(TrialsRule::SqrtN) => (n as f64).sqrt().floor() as usize,
        }
    }
}

fn default_grid_points() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// Cosines and outliers at the standard `√n` scaling, against the τ prediction.
    Standard {},
    /// τ = 0 transforms: alignment with Hadamard powers at scaling `n^{1−1/(2ℓ*)}`.
    EllStar {
        #[serde(default)]
        max_ell: Option<usize>,
    },
    /// Binomial counts through the logistic link.
    Binomial { trials: Trials },
    /// τ(f_c, μ) over truncation levels; no simulation.
    TruncationSweep { levels: Grid },
    /// η* against the best constant multiplier of the top singular value.
    Shrinkage {
        #[serde(default = "default_grid_points")]
        grid_points: usize,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Standard {} => "standard",
            Self::EllStar { .. } => "ell_star",
            Self::Binomial { .. } => "binomial",
            Self::TruncationSweep { .. } => "truncation_sweep",
            Self::Shrinkage { .. } => "shrinkage",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    /// KS distance of the bulk spectrum to its limiting law.
    #[serde(default)]
    pub esd: bool,
    /// `‖Y − A‖₂` (standard mode only).
    #[serde(default)]
    pub residual: bool,
    #[serde(default)]
    pub center_columns: bool,
}

impl Metrics {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Summary table: one row per (series, n, σ, metric).
    pub csv: String,
    pub json: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    /// Per-replicate table: one row per (series, n, σ, replicate, metric).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub setting: Setting,
    pub gamma: f64,
    pub n_grid: Vec<usize>,
    pub sigma_grid: Grid,
    pub reps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector_scheme: Option<VectorScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling_exponent: Option<f64>,
    /// Not needed by the binomial mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformSpec>,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Metrics::is_default")]
    pub metrics: Metrics,
    pub outputs: Outputs,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML of the effective spec (after command-line overrides).
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes to TOML")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }

    pub fn noise_measure(&self) -> Result<Option<NoiseMeasure>, CliError> {
        self.measure.clone().map(NoiseMeasure::try_from).transpose().map_err(CliError::from)
    }

    /// Column count for a given row count: `⌊γ n⌉`, or `n` in the symmetric setting.
    pub fn columns(&self, n: usize) -> usize {
        match self.setting {
            Setting::Asymmetric => (self.gamma * n as f64).round() as usize,
            Setting::Symmetric => n,
        }
    }

    pub fn vector_scheme(&self) -> VectorScheme {
        self.vector_scheme.unwrap_or(match self.mode {
            Mode::EllStar { .. } => VectorScheme::IidNormalNormalized,
            _ => VectorScheme::Haar,
        })
    }

    pub fn output_path(&self, out_dir: &Path, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            out_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        if self.name.trim().is_empty() {
            return bad("name must not be empty".into());
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive and finite, got {}", self.gamma));
        }
        if self.setting == Setting::Symmetric && self.gamma != 1.0 {
            return bad(format!("symmetric setting requires gamma = 1, got {}", self.gamma));
        }
        if self.n_grid.is_empty() {
            return bad("n_grid must not be empty".into());
        }
        for &n in &self.n_grid {
            if n < 2 || self.columns(n) < 2 {
                return bad(format!("n = {n} gives a degenerate {n} x {} matrix", self.columns(n)));
            }
        }
        let sigmas = self.sigma_grid.values();
        if sigmas.is_empty() {
            return bad("sigma_grid must not be empty".into());
        }
        if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return bad(format!("sigma_grid entries must be finite and nonnegative, got {s}"));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if let Some(e) = self.scaling_exponent {
            if !(e > 0.0 && e < 1.0) {
                return bad(format!("scaling_exponent must lie in (0, 1), got {e}"));
            }
        }
        let needs_transforms = !matches!(self.mode, Mode::Binomial { .. } | Mode::TruncationSweep { .. });
        if needs_transforms && self.transforms.is_empty() {
            return bad(format!("mode `{}` needs at least one transform", self.mode.name()));
        }
        if !matches!(self.mode, Mode::Binomial { .. }) && self.measure.is_none() {
            return bad(format!("mode `{}` needs a measure", self.mode.name()));
        }
        match &self.mode {
            Mode::Binomial { trials } => {
                if self.setting != Setting::Asymmetric {
                    return bad("binomial mode is rectangular only; use setting = \"asymmetric\"".into());
                }
                if self.n_grid.iter().any(|&n| trials.resolve(n) == 0) {
                    return bad("binomial mode needs at least one trial".into());
                }
            }
            Mode::TruncationSweep { levels } => {
                let levels = levels.values();
                if levels.is_empty() {
                    return bad("truncation levels must not be empty".into());
                }
                if let Some(c) = levels.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
                    return bad(format!("truncation levels must be positive, got {c}"));
                }
            }
            Mode::Shrinkage { grid_points } => {
                if *grid_points < 2 {
                    return bad("shrinkage grid needs at least 2 points".into());
                }
                if self.setting != Setting::Asymmetric {
                    return bad("shrinkage mode is rectangular only".into());
                }
            }
            Mode::EllStar { max_ell } => {
                if self.setting != Setting::Asymmetric {
                    return bad("ell_star mode is rectangular only".into());
                }
                if max_ell == &Some(0) {
                    return bad("max_ell must be at least 1".into());
                }
            }
            Mode::Standard {} => {}
        }
        if self.metrics.residual && !matches!(self.mode, Mode::Standard {}) {
            return bad("the residual metric is only available in standard mode".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
setting = "asymmetric"
gamma = 0.5
n_grid = [200]
sigma_grid = { start = 0.5, stop = 2.0, points = 4 }
reps = 2
seed = 1
measure = { kind = "gaussian" }
transforms = [{ kind = "relu" }]
mode = { kind = "standard" }
outputs = { csv = "t.csv", json = "t.json" }
"#;

    #[test]
    fn parses_and_round_trips() {
        let spec = ExperimentSpec::from_toml(MINIMAL).unwrap();
        assert_eq!(spec.sigma_grid.values(), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(spec.columns(200), 100);
        let again = ExperimentSpec::from_toml(&spec.canonical_toml()).unwrap();
        assert_eq!(again, spec);
        assert_eq!(again.sha256(), spec.sha256());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("reps = 2", "reps = 2\nrepz = 3");
        assert!(matches!(ExperimentSpec::from_toml(&text), Err(CliError::Validation(_))));
        let text = MINIMAL.replace(r#"{ kind = "relu" }"#, r#"{ kind = "relu", level = 1 }"#);
        assert!(ExperimentSpec::from_toml(&text).is_err());
        let text = MINIMAL.replace(r#"{ kind = "gaussian" }"#, r#"{ kind = "gausian" }"#);
        assert!(ExperimentSpec::from_toml(&text).is_err());
    }

    #[test]
    fn empty_grids_rejected() {
        let text = MINIMAL.replace("{ start = 0.5, stop = 2.0, points = 4 }", "[]");
        assert!(matches!(ExperimentSpec::from_toml(&text), Err(CliError::Validation(_))));
        let text = MINIMAL.replace("n_grid = [200]", "n_grid = []");
        assert!(ExperimentSpec::from_toml(&text).is_err());
    }

    #[test]
    fn seed_is_required() {
        let text = MINIMAL.replace("seed = 1\n", "");
        assert!(ExperimentSpec::from_toml(&text).is_err());
    }

    #[test]
    fn trials_rule() {
        let text = MINIMAL
            .replace(r#"mode = { kind = "standard" }"#, r#"mode = { kind = "binomial", trials = "sqrt_n" }"#)
            .replace("n_grid = [200]", "n_grid = [2000]");
        let spec = ExperimentSpec::from_toml(&text).unwrap();
        match spec.mode {
            Mode::Binomial { trials } => assert_eq!(trials.resolve(2000), 44),
            _ => unreachable!(),
        }
    }

    #[test]
    fn symmetric_needs_square() {
        let text = MINIMAL.replace(r#"setting = "asymmetric""#, r#"setting = "symmetric""#);
        assert!(ExperimentSpec::from_toml(&text).is_err());
    }
}
