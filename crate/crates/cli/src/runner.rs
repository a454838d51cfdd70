//! Executes an [`ExperimentSpec`]: Monte Carlo at every (series, n, σ) point and the
//! matching limiting prediction.

use serde::Serialize;

use spiketrans_core::orthopoly::{tau_for, tau_via_score, DEFAULT_DEGREE, DEFAULT_MAX_ELL};
use spiketrans_core::quad::QuadConfig;
use spiketrans_core::rmt::{predict, predict_ell_star, SpikePrediction};
use spiketrans_core::transforms::{optimize_truncation, tau_trunc, TransformKind};
use spiketrans_core::{BinomialLink, NoiseMeasure, Setting, TauOptions, Transform, TransformSpec, TruncationReport};
use spiketrans_sim::{monte_carlo, Model, MonteCarlo, RunOptions, SpikeConfig};

use crate::error::CliError;
use crate::spec::{linspace, ExperimentSpec, Mode};

/// Points on each theory curve drawn in the SVG.
const CURVE_POINTS: usize = 200;
/// Means below this are treated as already centered.
const CENTER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub series: String,
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub metric: String,
    pub mean: f64,
    pub se: Option<f64>,
    pub theory: Option<f64>,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub series: String,
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub rep: u64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesInfo {
    pub label: String,
    pub transform: Option<String>,
    /// Multiplier of σ in the effective SNR (τ, τ̃ or the binomial factor 0.5).
    pub effective_tau: Option<f64>,
    pub f_norm: Option<f64>,
    pub ell_star: Option<usize>,
    pub trials: Option<usize>,
    /// σ at which the spike separates from the bulk.
    pub threshold_sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub series: String,
    pub metric: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub c: f64,
    pub tau_c: f64,
    pub var_fc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub measure: String,
    pub rows: Vec<SweepRow>,
    pub optimum: TruncationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub mode: String,
    pub setting: Setting,
    pub gamma: f64,
    pub series: Vec<SeriesInfo>,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    /// Metric plotted against σ (or the truncation level).
    pub primary_metric: Option<String>,
    #[serde(skip)]
    pub runs: Vec<RunRecord>,
    #[serde(skip)]
    pub curves: Vec<Curve>,
}

/// A transform ready for simulation: centered under the measure, with its norm and τ.
#[derive(Debug, Clone)]
pub struct PreparedTransform {
    pub label: String,
    pub transform: Transform,
    pub f_norm: f64,
    pub tau: f64,
}

fn moment_config() -> QuadConfig<f64> {
    QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 8000,
    }
}

fn label_for(spec: &TransformSpec, transform: &Transform) -> String {
    match (spec, transform.kind()) {
        (TransformSpec::OptimalTruncation { .. }, TransformKind::Truncate { level }) => format!("truncate(c*={level:.4})"),
        (TransformSpec::Score {}, _) => "score".into(),
        _ => transform.name().to_string(),
    }
}

/// Resolves `spec` under `measure`, centers it, and evaluates `‖f‖_μ` and `τ(f, μ)`.
///
/// τ uses the score form `−⟨f, ω'/ω⟩/‖f‖` when the measure has a score, which also
/// covers heavy-tailed laws with bounded transforms; otherwise the series.
pub fn prepare_transform(spec: &TransformSpec, measure: &NoiseMeasure) -> Result<PreparedTransform, CliError> {
    let mut transform = spec.resolve(measure)?;
    let bounded = transform.growth_degree() == 0 || matches!(transform.kind(), TransformKind::Score { .. });
    if !measure.has_finite_moments() && !bounded {
        return Err(CliError::Validation(format!(
            "transform `{}` is unbounded and `{}` has infinite moments, so ‖f‖ is infinite",
            transform.name(),
            measure.label()
        )));
    }
    let breaks = transform.breakpoints();
    let cfg = moment_config();
    let mean = measure.expect(|z| transform.eval(z), &breaks, &cfg).map_err(|e| CliError::Numerical(e.to_string()))?;
    if mean.abs() > CENTER_TOL {
        transform = transform.with_centering(measure)?;
    }
    let second = measure
        .expect(|z| transform.eval(z).powi(2), &breaks, &cfg)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let f_norm = second.sqrt();
    if !(f_norm > 0.0 && f_norm.is_finite()) {
        return Err(CliError::Validation(format!("transform `{}` has zero or infinite norm", transform.name())));
    }
    let mut tau = if measure.has_score() {
        tau_via_score(&transform, measure)?
    } else {
        tau_for(&transform, measure, DEFAULT_DEGREE, 1, TauOptions { auto_center: true })?.tau
    };
    // A negative τ puts a symmetric outlier below the bulk; −f has the same cosines.
    if tau < 0.0 {
        transform = transform.scaled(-1.0);
        tau = -tau;
    }
    Ok(PreparedTransform {
        label: label_for(spec, &transform),
        transform,
        f_norm,
        tau,
    })
}

fn sv_theory(setting: Setting, s: &SpikePrediction<f64>) -> f64 {
    match setting {
        Setting::Asymmetric => s.predicted_sq_singular_value.sqrt(),
        Setting::Symmetric => s.predicted_sq_singular_value,
    }
}

fn theory_for(metric: &str, setting: Setting, s: &SpikePrediction<f64>, hadamard: bool) -> Option<f64> {
    match metric {
        "sv_1" => Some(sv_theory(setting, s)),
        "cos_left_sq_1" if !hadamard => Some(s.cos_left_sq),
        "cos_right_sq_1" if !hadamard => Some(s.cos_right_sq),
        "hadamard_left" if hadamard => Some(s.cos_left_sq),
        "hadamard_right" if hadamard => Some(s.cos_right_sq),
        _ => None,
    }
}

/// `(2ℓ − 1)!!`, the limit of `n^{ℓ−1} Σ u_i^{2ℓ}` for Gaussian-like unit vectors.
pub fn gaussian_moment(ell: usize) -> f64 {
    (1..=ell).map(|i| (2 * i - 1) as f64).product()
}

struct Point<'a> {
    series: &'a str,
    n: usize,
    p: usize,
    sigma: f64,
}

fn collect(
    out: &mut ExperimentResult,
    point: &Point<'_>,
    mc: &MonteCarlo,
    theory: impl Fn(&str) -> Option<f64>,
) {
    for m in &mc.summary {
        out.rows.push(Row {
            series: point.series.to_string(),
            n: point.n,
            p: point.p,
            sigma: point.sigma,
            metric: m.name.clone(),
            mean: m.mean,
            se: m.se,
            theory: theory(&m.name),
            reps: m.count,
        });
    }
    for run in &mc.runs {
        for (metric, value) in run.scalar_metrics() {
            out.runs.push(RunRecord {
                series: point.series.to_string(),
                n: point.n,
                p: point.p,
                sigma: point.sigma,
                rep: run.rep,
                seed: run.seed,
                metric,
                value,
            });
        }
    }
}

fn curve_grid(sigmas: &[f64]) -> Vec<f64> {
    let lo = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sigmas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        linspace(lo, hi, CURVE_POINTS)
    } else {
        vec![lo]
    }
}

fn spike_config(spec: &ExperimentSpec, n: usize, p: usize, sigma: f64, exponent: f64) -> SpikeConfig {
    let base = match spec.setting {
        Setting::Asymmetric => SpikeConfig::asymmetric(n, p, vec![sigma], spec.seed),
        Setting::Symmetric => SpikeConfig::symmetric(n, vec![sigma], spec.seed),
    };
    base.with_scheme(spec.vector_scheme()).with_exponent(exponent)
}

/// Runs every point of `spec` on at most `jobs` workers (0 = all cores), reporting
/// progress through `progress`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    jobs: usize,
    progress: &mut dyn FnMut(&str),
) -> Result<ExperimentResult, CliError> {
    spec.validate()?;
    let measure = spec.noise_measure()?;
    let sigmas = spec.sigma_grid.values();
    let mut out = ExperimentResult {
        name: spec.name.clone(),
        mode: spec.mode.name().to_string(),
        setting: spec.setting,
        gamma: spec.gamma,
        series: Vec::new(),
        rows: Vec::new(),
        sweep: None,
        primary_metric: None,
        runs: Vec::new(),
        curves: Vec::new(),
    };
    let mut report = |series: &str, n: usize, sigma: f64| progress(&format!("{}: {series} n={n} sigma={sigma}", spec.name));

    match &spec.mode {
        Mode::Standard {} | Mode::Shrinkage { .. } => {
            let measure = measure.expect("validated");
            let shrinkage_grid = match spec.mode {
                Mode::Shrinkage { grid_points } => Some(grid_points),
                _ => None,
            };
            let exponent = spec.scaling_exponent.unwrap_or(0.5);
            out.primary_metric = Some(if shrinkage_grid.is_some() { "eta_star_loss" } else { "cos_right_sq_1" }.into());
            for ts in &spec.transforms {
                let prepared = prepare_transform(ts, &measure)?;
                let tau = prepared.tau;
                let model = Model::Transformed {
                    measure: measure.clone(),
                    transform: prepared.transform.clone(),
                    f_norm: prepared.f_norm,
                    tau,
                };
                let opts = RunOptions {
                    esd: spec.metrics.esd,
                    residual: spec.metrics.residual,
                    center_columns: spec.metrics.center_columns,
                    shrinkage_grid,
                    ..RunOptions::default()
                };
                let head = predict(tau, spec.gamma, &[0.0], spec.setting)?;
                out.series.push(SeriesInfo {
                    label: prepared.label.clone(),
                    transform: Some(prepared.transform.name().to_string()),
                    effective_tau: Some(tau.abs()),
                    f_norm: Some(prepared.f_norm),
                    ell_star: None,
                    trials: None,
                    threshold_sigma: head.threshold_sigma,
                });
                for &n in &spec.n_grid {
                    let p = spec.columns(n);
                    for &sigma in &sigmas {
                        report(&prepared.label, n, sigma);
                        let cfg = spike_config(spec, n, p, sigma, exponent);
                        let mc = monte_carlo(&cfg, &model, &opts, spec.reps, jobs)?;
                        let pred = predict(tau, spec.gamma, &[sigma], spec.setting)?;
                        let s = &pred.per_spike[0];
                        let point = Point { series: &prepared.label, n, p, sigma };
                        collect(&mut out, &point, &mc, |m| theory_for(m, spec.setting, s, false));
                        if shrinkage_grid.is_some() {
                            let excess: Vec<f64> = mc
                                .runs
                                .iter()
                                .filter_map(|r| r.shrinkage.as_ref())
                                .map(|s| s.eta_star_loss - s.best_grid_loss)
                                .collect();
                            out.rows.push(summary_row(&point, "eta_star_excess", &excess));
                        }
                    }
                }
                if shrinkage_grid.is_none() {
                    let mut points = Vec::new();
                    for x in curve_grid(&sigmas) {
                        let pred = predict(tau, spec.gamma, &[x], spec.setting)?;
                        points.push((x, pred.per_spike[0].cos_right_sq));
                    }
                    out.curves.push(Curve {
                        series: prepared.label.clone(),
                        metric: "cos_right_sq_1".into(),
                        points,
                    });
                }
            }
        }
        Mode::EllStar { max_ell } => {
            let measure = measure.expect("validated");
            out.primary_metric = Some("hadamard_right".into());
            let max_ell = max_ell.unwrap_or(DEFAULT_MAX_ELL);
            for ts in &spec.transforms {
                let mut transform = ts.resolve(&measure)?;
                let tau_report = tau_for(&transform, &measure, DEFAULT_DEGREE, max_ell, TauOptions { auto_center: true })?;
                let ell = tau_report.ell_star.ok_or_else(|| {
                    CliError::Validation(format!("all τ_ℓ vanish up to ℓ = {max_ell} for `{}`", transform.name()))
                })?;
                let tau_ell = tau_report.tau_at(ell).expect("ell_star indexes tau_ell");
                if tau_report.a0.abs() > CENTER_TOL {
                    transform = transform.with_centering(&measure)?;
                }
                let label = transform.name().to_string();
                let exponent = spec.scaling_exponent.unwrap_or(1.0 - 1.0 / (2.0 * ell as f64));
                let m2l = gaussian_moment(ell);
                let model = Model::Transformed {
                    measure: measure.clone(),
                    transform: transform.clone(),
                    f_norm: tau_report.f_norm,
                    tau: tau_report.tau,
                };
                let opts = RunOptions {
                    hadamard_ell: Some(ell),
                    esd: spec.metrics.esd,
                    center_columns: spec.metrics.center_columns,
                    ..RunOptions::default()
                };
                let head = predict_ell_star(tau_ell, ell, spec.gamma, 0.0, m2l, m2l)?;
                out.series.push(SeriesInfo {
                    label: label.clone(),
                    transform: Some(label.clone()),
                    effective_tau: Some(head.tau_effective),
                    f_norm: Some(tau_report.f_norm),
                    ell_star: Some(ell),
                    trials: None,
                    threshold_sigma: head.threshold_sigma,
                });
                for &n in &spec.n_grid {
                    let p = spec.columns(n);
                    for &sigma in &sigmas {
                        report(&label, n, sigma);
                        let cfg = spike_config(spec, n, p, sigma, exponent);
                        let mc = monte_carlo(&cfg, &model, &opts, spec.reps, jobs)?;
                        let pred = predict_ell_star(tau_ell, ell, spec.gamma, sigma, m2l, m2l)?;
                        let s = &pred.per_spike[0];
                        let point = Point { series: &label, n, p, sigma };
                        collect(&mut out, &point, &mc, |m| theory_for(m, spec.setting, s, true));
                    }
                }
                let mut points = Vec::new();
                for x in curve_grid(&sigmas) {
                    let pred = predict_ell_star(tau_ell, ell, spec.gamma, x, m2l, m2l)?;
                    points.push((x, pred.per_spike[0].cos_right_sq));
                }
                out.curves.push(Curve {
                    series: label,
                    metric: "hadamard_right".into(),
                    points,
                });
            }
        }
        Mode::Binomial { trials } => {
            out.primary_metric = Some("cos_right_sq_1".into());
            let exponent = spec.scaling_exponent.unwrap_or(0.5);
            let opts = RunOptions {
                esd: spec.metrics.esd,
                center_columns: spec.metrics.center_columns,
                ..RunOptions::default()
            };
            for &n in &spec.n_grid {
                let m = trials.resolve(n);
                let link = BinomialLink::new(m)?;
                let factor = link.effective_snr_factor();
                let label = format!("binomial(m={m})");
                let model = Model::Binomial { link };
                let head = predict(factor, spec.gamma, &[0.0], spec.setting)?;
                out.series.push(SeriesInfo {
                    label: label.clone(),
                    transform: None,
                    effective_tau: Some(factor),
                    f_norm: None,
                    ell_star: None,
                    trials: Some(m),
                    threshold_sigma: head.threshold_sigma,
                });
                let p = spec.columns(n);
                for &sigma in &sigmas {
                    report(&label, n, sigma);
                    let cfg = spike_config(spec, n, p, sigma, exponent);
                    let mc = monte_carlo(&cfg, &model, &opts, spec.reps, jobs)?;
                    let pred = predict(factor, spec.gamma, &[sigma], spec.setting)?;
                    let s = &pred.per_spike[0];
                    let point = Point { series: &label, n, p, sigma };
                    collect(&mut out, &point, &mc, |m| theory_for(m, spec.setting, s, false));
                }
                let mut points = Vec::new();
                for x in curve_grid(&sigmas) {
                    let pred = predict(factor, spec.gamma, &[x], spec.setting)?;
                    points.push((x, pred.per_spike[0].cos_right_sq));
                }
                out.curves.push(Curve {
                    series: label,
                    metric: "cos_right_sq_1".into(),
                    points,
                });
            }
        }
        Mode::TruncationSweep { levels } => {
            let measure = measure.expect("validated");
            out.primary_metric = Some("tau_c".into());
            let levels = levels.values();
            let mut rows = Vec::with_capacity(levels.len());
            for &c in &levels {
                let r = tau_trunc(&measure, c)?;
                rows.push(SweepRow {
                    c,
                    tau_c: r.tau_c,
                    var_fc: r.var_fc,
                });
            }
            let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let optimum = optimize_truncation(&measure, lo, hi)?;
            out.curves.push(Curve {
                series: measure.label(),
                metric: "tau_c".into(),
                points: rows.iter().map(|r| (r.c, r.tau_c)).collect(),
            });
            out.sweep = Some(Sweep {
                measure: measure.label(),
                rows,
                optimum,
            });
        }
    }
    Ok(out)
}

fn summary_row(point: &Point<'_>, metric: &str, values: &[f64]) -> Row {
    let count = values.len();
    let mean = values.iter().sum::<f64>() / count.max(1) as f64;
    let se = (count > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    });
    Row {
        series: point.series.to_string(),
        n: point.n,
        p: point.p,
        sigma: point.sigma,
        metric: metric.into(),
        mean,
        se,
        theory: None,
        reps: count,
    }
}
