//! One-shot commands: thin wrappers over the core library returning their output text.

use std::fmt::Write as _;

use serde::Serialize;

use spiketrans_core::orthopoly::tau_for;
use spiketrans_core::rmt::{mp_atom, mp_bulk_edge, mp_bulk_lower, mp_density, predict, predict_ell_star, semicircle_density};
use spiketrans_core::shrinkage::denoise;
use spiketrans_core::transforms::optimize_truncation;
use spiketrans_core::{MeasureSpec, NoiseMeasure, Setting, ShrinkageKind, ShrinkageRule, TauOptions, TransformSpec};

use crate::error::CliError;
use crate::output::{with_provenance, Provenance};
use crate::spec::linspace;

/// Named measure (`gaussian`, `cauchy`, `bimodal`) or an inline JSON measure spec.
pub fn parse_measure(s: &str) -> Result<NoiseMeasure, CliError> {
    let s = s.trim();
    if s.starts_with('{') {
        let spec: MeasureSpec =
            serde_json::from_str(s).map_err(|e| CliError::Validation(format!("invalid measure spec: {e}")))?;
        return Ok(NoiseMeasure::try_from(spec)?);
    }
    match s {
        "gaussian" => Ok(NoiseMeasure::gaussian()),
        "cauchy" => Ok(NoiseMeasure::cauchy()),
        "bimodal" => Ok(NoiseMeasure::bimodal()),
        _ => Err(CliError::Validation(format!(
            "unknown measure `{s}`; expected gaussian, cauchy, bimodal or a JSON spec"
        ))),
    }
}

fn parse_arg<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, CliError> {
    s.parse().map_err(|_| CliError::Validation(format!("invalid {what} `{s}`")))
}

/// Named transform, `name:parameter`, or an inline JSON transform spec.
///
/// Names: `identity`, `relu`, `heaviside`, `score`, `truncate:<c>`, `hermite:<k>`,
/// `optimal_series:<K>`, `optimal_truncation[:<lo>:<hi>]`.
pub fn parse_transform(s: &str) -> Result<TransformSpec, CliError> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| CliError::Validation(format!("invalid transform spec: {e}")));
    }
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let arity = |k: usize| {
        if args.len() == k {
            Ok(())
        } else {
            Err(CliError::Validation(format!("transform `{name}` takes {k} parameter(s), got `{s}`")))
        }
    };
    Ok(match name {
        "identity" => arity(0).map(|_| TransformSpec::Identity {})?,
        "relu" => arity(0).map(|_| TransformSpec::Relu {})?,
        "heaviside" => arity(0).map(|_| TransformSpec::Heaviside {})?,
        "score" => arity(0).map(|_| TransformSpec::Score {})?,
        "truncate" => {
            arity(1)?;
            TransformSpec::Truncate {
                level: parse_arg("truncation level", args[0])?,
            }
        }
        "hermite" => {
            arity(1)?;
            TransformSpec::Hermite {
                degree: parse_arg("Hermite degree", args[0])?,
            }
        }
        "optimal_series" => {
            arity(1)?;
            TransformSpec::OptimalSeries {
                degree: parse_arg("series degree", args[0])?,
            }
        }
        "optimal_truncation" if args.is_empty() => TransformSpec::OptimalTruncation { lo: 0.1, hi: 20.0 },
        "optimal_truncation" => {
            arity(2)?;
            TransformSpec::OptimalTruncation {
                lo: parse_arg("bracket", args[0])?,
                hi: parse_arg("bracket", args[1])?,
            }
        }
        _ => return Err(CliError::Validation(format!("unknown transform `{s}`"))),
    })
}

fn to_json<T: Serialize>(value: &T, prov: &Provenance) -> String {
    serde_json::to_string_pretty(&with_provenance(value, prov)).expect("output serializes")
}

/// `τ(f, μ)` from the orthonormal-polynomial series.
pub fn cmd_tau(measure: &str, transform: &str, degree: usize, max_ell: usize) -> Result<String, CliError> {
    let args = serde_json::json!({ "measure": measure, "transform": transform, "degree": degree, "max_ell": max_ell });
    let m = parse_measure(measure)?;
    let t = parse_transform(transform)?.resolve(&m)?;
    let report = tau_for(&t, &m, degree, max_ell, TauOptions { auto_center: true })?;
    Ok(to_json(&report, &Provenance::for_command("tau", &args)))
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictArgs {
    pub gamma: f64,
    pub tau: f64,
    pub sigmas: Vec<f64>,
    pub setting: Setting,
    /// Leading nonzero order; `None` for the standard scaling.
    pub ell: Option<usize>,
    pub m2l_u: f64,
    pub m2l_v: f64,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<String, CliError> {
    let prov = Provenance::for_command("predict", args);
    match args.ell {
        None => {
            let mut sigmas = args.sigmas.clone();
            sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            let pred = predict(args.tau, args.gamma, &sigmas, args.setting)?;
            Ok(to_json(&pred, &prov))
        }
        Some(ell) => {
            if args.setting != Setting::Asymmetric {
                return Err(CliError::Validation("the ell* prediction is rectangular only".into()));
            }
            let preds = args
                .sigmas
                .iter()
                .map(|&s| predict_ell_star(args.tau, ell, args.gamma, s, args.m2l_u, args.m2l_v))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(to_json(&serde_json::json!({ "predictions": preds }), &prov))
        }
    }
}

/// Density table of the Marchenko–Pastur law (or the semicircle) as CSV.
///
/// Abscissae are Chebyshev-spaced so the square-root edges are resolved.
pub fn cmd_law(gamma: f64, points: usize, semicircle: bool) -> Result<String, CliError> {
    if points < 2 {
        return Err(CliError::Validation("law needs at least 2 points".into()));
    }
    if !semicircle && !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CliError::Validation(format!("gamma must be positive and finite, got {gamma}")));
    }
    let args = serde_json::json!({ "gamma": gamma, "points": points, "semicircle": semicircle });
    let prov = Provenance::for_command("law", &args);
    let (a, b) = if semicircle { (-2.0, 2.0) } else { (mp_bulk_lower(gamma), mp_bulk_edge(gamma)) };
    let mut s = prov.csv_header();
    if !semicircle {
        let _ = writeln!(s, "# atom_at_zero {}", mp_atom(gamma));
    }
    s.push_str("x,density\n");
    for (i, t) in linspace(0.0, 1.0, points).into_iter().enumerate() {
        let x = if i == 0 {
            a
        } else if i == points - 1 {
            b
        } else {
            a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * t).cos())
        };
        let d = if semicircle { semicircle_density(x) } else { mp_density(x, gamma) };
        let _ = writeln!(s, "{x},{d}");
    }
    Ok(s)
}

pub fn cmd_truncation_opt(measure: &str, lo: f64, hi: f64) -> Result<String, CliError> {
    let args = serde_json::json!({ "measure": measure, "lo": lo, "hi": hi });
    let m = parse_measure(measure)?;
    let report = optimize_truncation(&m, lo, hi)?;
    Ok(to_json(&report, &Provenance::for_command("truncation-opt", &args)))
}

/// `eta_star`, `identity`, or `hard:<level>`.
pub fn parse_rule(s: &str) -> Result<ShrinkageKind, CliError> {
    match s.split_once(':') {
        None if s == "eta_star" => Ok(ShrinkageKind::EtaStar),
        None if s == "identity" => Ok(ShrinkageKind::Identity),
        Some(("hard", level)) => Ok(ShrinkageKind::HardThreshold {
            level: parse_arg("threshold", level)?,
        }),
        _ => Err(CliError::Validation(format!("unknown shrinkage rule `{s}`; expected eta_star, identity or hard:<level>"))),
    }
}

pub fn cmd_shrink(gamma: f64, values: &[f64], rule: &str, bulk: Option<&[f64]>) -> Result<String, CliError> {
    let args = serde_json::json!({ "gamma": gamma, "values": values, "rule": rule, "bulk": bulk });
    let rule = ShrinkageRule::new(gamma, parse_rule(rule)?)?;
    let result = denoise(values, &rule, bulk)?;
    let out = serde_json::json!({ "rule": rule, "retained": result.retained, "warnings": result.warnings });
    Ok(to_json(&out, &Provenance::for_command("shrink", &args)))
}
