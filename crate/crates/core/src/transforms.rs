//! Elementwise transformations `f` applied to the observed matrix.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use thiserror::Error;

use crate::measures::{hermite_he, MeasureError, NoiseMeasure};
use crate::orthopoly::{self, OrthoBasis, OrthoError};
use crate::quad::{self, QuadConfig, QuadError};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformError {
    #[error("truncation level must be positive and finite, got {0}")]
    BadLevel(f64),
    #[error("empty or invalid bracket ({lo}, {hi}); need 0 < lo < hi")]
    EmptyBracket { lo: f64, hi: f64 },
    #[error("distribution function or density of `{measure}` is discontinuous at ±{level}")]
    Discontinuous { measure: String, level: f64 },
    #[error("truncated transform has zero variance at level {0}")]
    DegenerateVariance(f64),
    #[error("binomial link needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Ortho(#[from] OrthoError),
}

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum TransformKind {
    Identity,
    Zero,
    Relu,
    Heaviside,
    /// `z · 1(|z| ≤ level)`.
    Truncate { level: f64 },
    /// Monomial coefficients, constant term first.
    Polynomial { coeffs: Vec<f64> },
    /// Normalized Hermite polynomial `He_k / √k!`.
    Hermite { degree: usize },
    /// Score `ω'(z)/ω(z)` of a measure.
    Score { measure: NoiseMeasure },
    /// `Σ_k c_k q_k(z)` in an orthonormal basis.
    Series { coeffs: Vec<f64>, basis: Arc<OrthoBasis> },
    Custom {
        func: Func,
        breakpoints: Vec<f64>,
        growth: usize,
    },
}

impl fmt::Debug for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Zero => write!(f, "Zero"),
            Self::Relu => write!(f, "Relu"),
            Self::Heaviside => write!(f, "Heaviside"),
            Self::Truncate { level } => write!(f, "Truncate({level})"),
            Self::Polynomial { coeffs } => write!(f, "Polynomial({coeffs:?})"),
            Self::Hermite { degree } => write!(f, "Hermite({degree})"),
            Self::Score { measure } => write!(f, "Score({})", measure.label()),
            Self::Series { coeffs, .. } => write!(f, "Series({} terms)", coeffs.len()),
            Self::Custom { breakpoints, growth, .. } => {
                write!(f, "Custom(breaks={breakpoints:?}, growth={growth})")
            }
        }
    }
}

/// A transformation `z ↦ scale · (raw(z) − offset)`.
#[derive(Debug, Clone)]
pub struct Transform {
    name: String,
    kind: TransformKind,
    offset: f64,
    scale: f64,
    centered_for: Option<String>,
}

impl Transform {
    fn new(name: impl Into<String>, kind: TransformKind) -> Self {
        Self {
            name: name.into(),
            kind,
            offset: 0.0,
            scale: 1.0,
            centered_for: None,
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", TransformKind::Identity)
    }

    pub fn zero() -> Self {
        Self::new("zero", TransformKind::Zero)
    }

    /// `max(z, 0) − (2π)^{-1/2}`, centered under the standard Gaussian.
    pub fn relu_centered() -> Self {
        let mut t = Self::new("relu", TransformKind::Relu);
        t.offset = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        t.centered_for = Some(NoiseMeasure::gaussian().label());
        t
    }

    /// `1(z ≥ 0) − 1/2`, centered under any law symmetric about 0.
    pub fn heaviside_centered() -> Self {
        let mut t = Self::new("heaviside", TransformKind::Heaviside);
        t.offset = 0.5;
        t.centered_for = Some(NoiseMeasure::gaussian().label());
        t
    }

    /// `f_c(z) = z · 1(|z| ≤ c)`.
    pub fn truncate(level: f64) -> Result<Self, TransformError> {
        if !(level > 0.0 && level.is_finite()) {
            return Err(TransformError::BadLevel(level));
        }
        Ok(Self::new(format!("truncate({level})"), TransformKind::Truncate { level }))
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new("polynomial", TransformKind::Polynomial { coeffs })
    }

    /// `q_k` of the standard Gaussian.
    pub fn hermite(degree: usize) -> Self {
        let mut t = Self::new(format!("hermite({degree})"), TransformKind::Hermite { degree });
        if degree > 0 {
            t.centered_for = Some(NoiseMeasure::gaussian().label());
        }
        t
    }

    /// `f*(z) = ω'(z)/ω(z)`.
    pub fn score_transform(measure: &NoiseMeasure) -> Result<Self, TransformError> {
        if !measure.has_score() {
            return Err(MeasureError::NoScore(measure.label()).into());
        }
        let mut t = Self::new(
            format!("score({})", measure.label()),
            TransformKind::Score {
                measure: measure.clone(),
            },
        );
        t.centered_for = Some(measure.label());
        Ok(t)
    }

    pub fn series(name: impl Into<String>, coeffs: Vec<f64>, basis: Arc<OrthoBasis>) -> Self {
        Self::new(name, TransformKind::Series { coeffs, basis })
    }

    /// User-supplied function; `breakpoints` are its discontinuities and `growth`
    /// a polynomial degree bounding `|f(z)|` for large `|z|`.
    pub fn custom<F>(name: impl Into<String>, func: F, breakpoints: Vec<f64>, growth: usize) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            name,
            TransformKind::Custom {
                func: Arc::new(func),
                breakpoints,
                growth,
            },
        )
    }

    /// Marks the transform as centered under `measure` without checking.
    pub fn centered_under(mut self, measure: &NoiseMeasure) -> Self {
        self.centered_for = Some(measure.label());
        self
    }

    /// Subtracts `E_μ f(z)` so the result is centered under `measure`.
    pub fn with_centering(mut self, measure: &NoiseMeasure) -> Result<Self, TransformError> {
        let breaks = self.breakpoints();
        let mean = measure.expect(|z| self.eval(z), &breaks, &QuadConfig::tight())?;
        self.offset += mean / self.scale;
        self.centered_for = Some(measure.label());
        Ok(self)
    }

    /// Multiplies the transform by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn centered_for(&self) -> Option<&str> {
        self.centered_for.as_deref()
    }

    fn raw(&self, z: f64) -> f64 {
        match &self.kind {
            TransformKind::Identity => z,
            TransformKind::Zero => 0.0,
            TransformKind::Relu => z.max(0.0),
            TransformKind::Heaviside => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            TransformKind::Truncate { level } => {
                if z.abs() <= *level {
                    z
                } else {
                    0.0
                }
            }
            TransformKind::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c),
            TransformKind::Hermite { degree } => {
                let fact: f64 = (1..=*degree).map(|i| i as f64).product();
                hermite_he(*degree, z) / fact.sqrt()
            }
            TransformKind::Score { measure } => measure.score(z).unwrap_or(0.0),
            TransformKind::Series { coeffs, basis } => basis.eval_series(coeffs, z),
            TransformKind::Custom { func, .. } => func(z),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.scale * (self.raw(z) - self.offset)
    }

    /// Applies the transform to every entry of `values`.
    pub fn apply_in_place(&self, values: &mut [f64]) {
        values.iter_mut().for_each(|v| *v = self.eval(*v));
    }

    /// Points where `f` may be discontinuous or non-smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            TransformKind::Relu | TransformKind::Heaviside => vec![0.0],
            TransformKind::Truncate { level } => vec![-level, *level],
            TransformKind::Custom { breakpoints, .. } => breakpoints.clone(),
            TransformKind::Score { measure } => measure.singular_points(),
            _ => Vec::new(),
        }
    }

    /// Polynomial degree bounding the growth of `|f|` at infinity.
    pub fn growth_degree(&self) -> usize {
        match &self.kind {
            TransformKind::Zero | TransformKind::Heaviside | TransformKind::Truncate { .. } => 0,
            TransformKind::Identity | TransformKind::Relu | TransformKind::Score { .. } => 1,
            TransformKind::Polynomial { coeffs } => coeffs.len().saturating_sub(1),
            TransformKind::Hermite { degree } => *degree,
            TransformKind::Series { coeffs, .. } => coeffs.len().saturating_sub(1),
            TransformKind::Custom { growth, .. } => *growth,
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(
            self.kind,
            TransformKind::Identity
                | TransformKind::Zero
                | TransformKind::Polynomial { .. }
                | TransformKind::Hermite { .. }
                | TransformKind::Series { .. }
        )
    }
}

/// Configuration-level description of a transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Identity {},
    Relu {},
    Heaviside {},
    Truncate { level: f64 },
    /// Truncation at the level maximizing τ within `(lo, hi)`.
    OptimalTruncation { lo: f64, hi: f64 },
    Polynomial { coeffs: Vec<f64> },
    Hermite { degree: usize },
    Score {},
    OptimalSeries { degree: usize },
}

impl TransformSpec {
    pub fn resolve(&self, measure: &NoiseMeasure) -> Result<Transform, TransformError> {
        Ok(match self {
            Self::Identity {} => Transform::identity(),
            Self::Relu {} => Transform::relu_centered(),
            Self::Heaviside {} => Transform::heaviside_centered(),
            Self::Truncate { level } => Transform::truncate(*level)?,
            Self::OptimalTruncation { lo, hi } => {
                let report = optimize_truncation(measure, *lo, *hi)?;
                Transform::truncate(report.c)?
            }
            Self::Polynomial { coeffs } => Transform::polynomial(coeffs.clone()),
            Self::Hermite { degree } => Transform::hermite(*degree),
            Self::Score {} => Transform::score_transform(measure)?,
            Self::OptimalSeries { degree } => orthopoly::optimal_series_preprocessor(measure, *degree)?,
        })
    }
}

/// Truncation diagnostics at a single level, or at the optimum of a search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub c: f64,
    pub tau_c: f64,
    pub var_fc: f64,
    pub c_star: Option<f64>,
    pub tau_at_c_star: Option<f64>,
    pub warnings: Vec<String>,
}

fn truncation_tau(measure: &NoiseMeasure, c: f64) -> Result<(f64, f64), TransformError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(TransformError::BadLevel(c));
    }
    if !(measure.is_continuous_at(c) && measure.is_continuous_at(-c)) {
        return Err(TransformError::Discontinuous {
            measure: measure.label(),
            level: c,
        });
    }
    let (slo, shi) = measure.support();
    let (lo, hi) = (slo.max(-c), shi.min(c));
    let numerator = measure.cdf(c) - measure.cdf(-c) - c * (measure.density(c) + measure.density(-c));
    if lo >= hi {
        return Err(TransformError::DegenerateVariance(c));
    }
    let mut breaks = measure.singular_points();
    breaks.push(measure.center());
    let cfg = QuadConfig::tight();
    let m1 = quad::integrate_with_breaks(|z| z * measure.density(z), lo, hi, &breaks, &cfg)?.value;
    let m2 = quad::integrate_with_breaks(|z| z * z * measure.density(z), lo, hi, &breaks, &cfg)?.value;
    let var = m2 - m1 * m1;
    if !(var > 1e-300) {
        return Err(TransformError::DegenerateVariance(c));
    }
    Ok((numerator / var.sqrt(), var))
}

/// `τ(f_c, μ) = [F(c) − F(−c) − c(ω(c) + ω(−c))] / √Var f_c(z)`.
pub fn tau_trunc(measure: &NoiseMeasure, c: f64) -> Result<TruncationReport, TransformError> {
    let (tau_c, var_fc) = truncation_tau(measure, c)?;
    Ok(TruncationReport {
        c,
        tau_c,
        var_fc,
        c_star: None,
        tau_at_c_star: None,
        warnings: Vec::new(),
    })
}

const TRUNCATION_GRID: usize = 400;

/// Maximizes `τ(f_c, μ)` over `c ∈ [lo, hi]`: log-spaced grid scan, then golden
/// section around the best grid point.
pub fn optimize_truncation(measure: &NoiseMeasure, lo: f64, hi: f64) -> Result<TruncationReport, TransformError> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(TransformError::EmptyBracket { lo, hi });
    }
    let ratio = (hi / lo).ln();
    let grid: Vec<f64> = (0..TRUNCATION_GRID)
        .map(|i| lo * (ratio * i as f64 / (TRUNCATION_GRID - 1) as f64).exp())
        .collect();
    let values = grid
        .iter()
        .map(|&c| truncation_tau(measure, c).map(|(t, _)| t))
        .collect::<Result<Vec<_>, _>>()?;
    // Rounding-level ties on a plateau resolve to the largest level.
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best = (0..grid.len()).rev().find(|&i| values[i] >= top - 1e-12).unwrap();
    let mut warnings = Vec::new();
    let peaks = (1..grid.len() - 1)
        .filter(|&i| values[i] > values[i - 1] + 1e-9 && values[i] > values[i + 1] + 1e-9)
        .count();
    if peaks > 1 {
        warnings.push(format!("multimodal: {peaks} local maxima on the search grid; returning the largest"));
    }
    let c_star = if best == 0 || best == grid.len() - 1 {
        warnings.push(format!("maximum at bracket edge c = {}", grid[best]));
        grid[best]
    } else {
        golden_section(|c| truncation_tau(measure, c).map(|(t, _)| t).unwrap_or(f64::NEG_INFINITY), grid[best - 1], grid[best + 1], 1e-7)
    };
    let (tau_star, var_star) = truncation_tau(measure, c_star)?;
    Ok(TruncationReport {
        c: c_star,
        tau_c: tau_star,
        var_fc: var_star,
        c_star: Some(c_star),
        tau_at_c_star: Some(tau_star),
        warnings,
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `g(x) = √2 erfinv(tanh(x/2))`, so that `Φ(g(x)) = logistic(x)`.
///
/// Evaluated as `√2 erfc⁻¹(2 logistic(−|x|))` to keep precision in the tails.
pub fn binomial_link_g(x: f64) -> f64 {
    if x == 0.0 || x.is_nan() {
        return x;
    }
    let v = std::f64::consts::SQRT_2 * erfc_inv(2.0 * logistic(-x.abs()));
    v.copysign(x)
}

/// Binomial observations `Bin(m, logistic(x))` written as `Σ_{k≤m} 1(g(x) + z_k ≥ 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialLink {
    pub trials: usize,
}

impl BinomialLink {
    pub fn new(trials: usize) -> Result<Self, TransformError> {
        if trials == 0 {
            return Err(TransformError::NoTrials);
        }
        Ok(Self { trials })
    }

    pub fn g(&self, x: f64) -> f64 {
        binomial_link_g(x)
    }

    /// Number of successes given the latent value and `m` standard normal draws.
    pub fn count(&self, x: f64, noise: &[f64]) -> usize {
        let gx = self.g(x);
        noise.iter().take(self.trials).filter(|&&z| gx + z >= 0.0).count()
    }

    /// Signal scale `σ` at which PCA of the centered counts starts to recover the spike,
    /// `2 √(n/m) γ^{1/4}`.
    pub fn recovery_threshold(&self, n: usize, gamma: f64) -> f64 {
        2.0 * (n as f64 / self.trials as f64).sqrt() * gamma.powf(0.25)
    }

    /// Multiplier mapping `σ √(m/n)` to the effective signal-to-noise ratio.
    pub fn effective_snr_factor(&self) -> f64 {
        0.5
    }
}
