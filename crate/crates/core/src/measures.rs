//! Noise laws for the entries of the noise matrix.
//!
//! A [`NoiseMeasure`] carries everything the downstream math touches: density,
//! CDF, seeded sampling, raw moments, the score `ω'/ω`, density derivatives and
//! Fisher information. The Cauchy law is normalized (`1 / (π (1 + z²))`).

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

use crate::quad::{self, QuadConfig, QuadError};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MeasureError {
    #[error("mixture needs at least one component")]
    EmptyMixture,
    #[error("mixture parameter lists differ in length ({weights} weights, {means} means, {scales} scales)")]
    LengthMismatch {
        weights: usize,
        means: usize,
        scales: usize,
    },
    #[error("mixture weights must be positive and sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("location must be finite, got {0}")]
    BadLocation(f64),
    #[error("uniform support [{lo}, {hi}] is empty")]
    EmptySupport { lo: f64, hi: f64 },
    #[error("measure `{0}` has no score function")]
    NoScore(String),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("Fisher information cross-check failed: adaptive {adaptive} vs Gauss-Hermite {hermite}")]
    CrossCheck { adaptive: f64, hermite: f64 },
}

/// Configuration-level description of a measure (string id plus parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
    },
    Cauchy {
        #[serde(default)]
        location: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        scales: Vec<f64>,
    },
    Uniform { lo: f64, hi: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Gaussian { mean: f64, std: f64 },
    Cauchy { location: f64, scale: f64 },
    Mixture { weights: Vec<f64>, means: Vec<f64>, scales: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

/// A validated noise law μ. Immutable and cheap to clone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureSpec", into = "MeasureSpec")]
pub struct NoiseMeasure {
    law: Law,
}

impl TryFrom<MeasureSpec> for NoiseMeasure {
    type Error = MeasureError;

    fn try_from(spec: MeasureSpec) -> Result<Self, MeasureError> {
        match spec {
            MeasureSpec::Gaussian { mean, std } => NoiseMeasure::gaussian_with(mean, std),
            MeasureSpec::Cauchy { location, scale } => NoiseMeasure::cauchy_with(location, scale),
            MeasureSpec::GaussianMixture {
                weights,
                means,
                scales,
            } => NoiseMeasure::gaussian_mixture(&weights, &means, &scales),
            MeasureSpec::Uniform { lo, hi } => NoiseMeasure::uniform(lo, hi),
        }
    }
}

impl From<NoiseMeasure> for MeasureSpec {
    fn from(m: NoiseMeasure) -> Self {
        match m.law {
            Law::Gaussian { mean, std } => MeasureSpec::Gaussian { mean, std },
            Law::Cauchy { location, scale } => MeasureSpec::Cauchy { location, scale },
            Law::Mixture {
                weights,
                means,
                scales,
            } => MeasureSpec::GaussianMixture {
                weights,
                means,
                scales,
            },
            Law::Uniform { lo, hi } => MeasureSpec::Uniform { lo, hi },
        }
    }
}

fn check_scale(s: f64) -> Result<(), MeasureError> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(MeasureError::BadScale(s))
    }
}

fn check_location(m: f64) -> Result<(), MeasureError> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(MeasureError::BadLocation(m))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite_he(n: usize, x: f64) -> f64 {
    let mut p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let mut p1 = x;
    for k in 1..n {
        let p2 = x * p1 - k as f64 * p0;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn double_factorial_odd(k: u32) -> f64 {
    // (k-1)!! for even k: E[N^k]
    let mut acc = 1.0;
    let mut j = k as i64 - 1;
    while j > 1 {
        acc *= j as f64;
        j -= 2;
    }
    acc
}

fn gaussian_raw_moment(mean: f64, std: f64, k: u32) -> f64 {
    // E[(mean + std N)^k] = sum_i C(k, i) mean^(k-i) std^i E[N^i]
    let mut total = 0.0;
    let mut binom = 1.0;
    for i in 0..=k {
        if i > 0 {
            binom = binom * (k - i + 1) as f64 / i as f64;
        }
        if i % 2 == 0 {
            total += binom * mean.powi((k - i) as i32) * std.powi(i as i32) * double_factorial_odd(i);
        }
    }
    total
}

impl NoiseMeasure {
    /// Standard normal law.
    pub fn gaussian() -> Self {
        Self {
            law: Law::Gaussian { mean: 0.0, std: 1.0 },
        }
    }

    pub fn gaussian_with(mean: f64, std: f64) -> Result<Self, MeasureError> {
        check_location(mean)?;
        check_scale(std)?;
        Ok(Self {
            law: Law::Gaussian { mean, std },
        })
    }

    /// Standard Cauchy law with density `1 / (π (1 + z²))`.
    pub fn cauchy() -> Self {
        Self {
            law: Law::Cauchy {
                location: 0.0,
                scale: 1.0,
            },
        }
    }

    pub fn cauchy_with(location: f64, scale: f64) -> Result<Self, MeasureError> {
        check_location(location)?;
        check_scale(scale)?;
        Ok(Self {
            law: Law::Cauchy { location, scale },
        })
    }

    /// Finite Gaussian mixture `Σ_j w_j s_j⁻¹ φ((z - m_j) / s_j)`.
    pub fn gaussian_mixture(weights: &[f64], means: &[f64], scales: &[f64]) -> Result<Self, MeasureError> {
        if weights.is_empty() {
            return Err(MeasureError::EmptyMixture);
        }
        if weights.len() != means.len() || weights.len() != scales.len() {
            return Err(MeasureError::LengthMismatch {
                weights: weights.len(),
                means: means.len(),
                scales: scales.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(MeasureError::BadWeights(sum));
        }
        for &m in means {
            check_location(m)?;
        }
        for &s in scales {
            check_scale(s)?;
        }
        Ok(Self {
            law: Law::Mixture {
                weights: weights.iter().map(|w| w / sum).collect(),
                means: means.to_vec(),
                scales: scales.to_vec(),
            },
        })
    }

    /// The bimodal law `½ (N(1, ¼) + N(-1, ¼))`, i.e. density `φ(2(z-1)) + φ(2(z+1))`.
    pub fn bimodal() -> Self {
        Self::gaussian_mixture(&[0.5, 0.5], &[1.0, -1.0], &[0.5, 0.5]).expect("valid mixture")
    }

    /// Uniform law on `[lo, hi]` (compact support; no score).
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, MeasureError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(MeasureError::EmptySupport { lo, hi });
        }
        Ok(Self {
            law: Law::Uniform { lo, hi },
        })
    }

    pub fn spec(&self) -> MeasureSpec {
        self.clone().into()
    }

    /// Identifier used in configuration files.
    pub fn name(&self) -> &'static str {
        match self.law {
            Law::Gaussian { .. } => "gaussian",
            Law::Cauchy { .. } => "cauchy",
            Law::Mixture { .. } => "gaussian_mixture",
            Law::Uniform { .. } => "uniform",
        }
    }

    /// Human-readable label including parameters.
    pub fn label(&self) -> String {
        match &self.law {
            Law::Gaussian { mean, std } if *mean == 0.0 && *std == 1.0 => "gaussian".into(),
            Law::Gaussian { mean, std } => format!("gaussian(mean={mean}, std={std})"),
            Law::Cauchy { location, scale } if *location == 0.0 && *scale == 1.0 => "cauchy".into(),
            Law::Cauchy { location, scale } => format!("cauchy(location={location}, scale={scale})"),
            Law::Mixture {
                weights,
                means,
                scales,
            } => format!("gaussian_mixture(weights={weights:?}, means={means:?}, scales={scales:?})"),
            Law::Uniform { lo, hi } => format!("uniform({lo}, {hi})"),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.law, Law::Gaussian { .. })
    }

    /// Mean and standard deviation for Gaussian laws.
    pub fn gaussian_params(&self) -> Option<(f64, f64)> {
        match self.law {
            Law::Gaussian { mean, std } => Some((mean, std)),
            _ => None,
        }
    }

    pub fn log_density_available(&self) -> bool {
        true
    }

    pub fn density(&self, z: f64) -> f64 {
        match &self.law {
            Law::Uniform { lo, hi } => {
                if z >= *lo && z <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            _ => self.log_density(z).exp(),
        }
    }

    pub fn log_density(&self, z: f64) -> f64 {
        match &self.law {
            Law::Gaussian { mean, std } => {
                let u = (z - mean) / std;
                -0.5 * u * u - LN_SQRT_2PI - std.ln()
            }
            Law::Cauchy { location, scale } => {
                let u = (z - location) / scale;
                -(PI * scale).ln() - u.mul_add(u, 1.0).ln()
            }
            Law::Mixture {
                weights,
                means,
                scales,
            } => {
                let terms = weights.iter().zip(means).zip(scales).map(|((w, m), s)| {
                    let u = (z - m) / s;
                    w.ln() - s.ln() - 0.5 * u * u - LN_SQRT_2PI
                });
                log_sum_exp(terms)
            }
            Law::Uniform { lo, hi } => {
                if z >= *lo && z <= *hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match &self.law {
            Law::Gaussian { mean, std } => normal_cdf((z - mean) / std),
            Law::Cauchy { location, scale } => 0.5 + ((z - location) / scale).atan() / PI,
            Law::Mixture {
                weights,
                means,
                scales,
            } => weights
                .iter()
                .zip(means)
                .zip(scales)
                .map(|((w, m), s)| w * normal_cdf((z - m) / s))
                .sum(),
            Law::Uniform { lo, hi } => ((z - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// Whether both `F` and `ω` are continuous at `z`.
    pub fn is_continuous_at(&self, z: f64) -> bool {
        match &self.law {
            Law::Uniform { lo, hi } => z != *lo && z != *hi,
            _ => true,
        }
    }

    /// Draws one variate.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Gaussian { mean, std } => {
                let n: f64 = rng.sample(StandardNormal);
                mean + std * n
            }
            Law::Cauchy { location, scale } => {
                let u: f64 = rng.gen();
                location + scale * (PI * (u - 0.5)).tan()
            }
            Law::Mixture {
                weights,
                means,
                scales,
            } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut j = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        j = i;
                        break;
                    }
                }
                let n: f64 = rng.sample(StandardNormal);
                means[j] + scales[j] * n
            }
            Law::Uniform { lo, hi } => {
                let u: f64 = rng.gen();
                lo + (hi - lo) * u
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out.iter_mut() {
            *x = self.sample_one(rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let mut v = vec![0.0; count];
        self.fill(rng, &mut v);
        v
    }

    /// Raw moment `E[z^k]`; `+inf` where it does not exist.
    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match &self.law {
            Law::Gaussian { mean, std } => gaussian_raw_moment(*mean, *std, k),
            Law::Cauchy { .. } => f64::INFINITY,
            Law::Mixture {
                weights,
                means,
                scales,
            } => weights
                .iter()
                .zip(means)
                .zip(scales)
                .map(|((w, m), s)| w * gaussian_raw_moment(*m, *s, k))
                .sum(),
            Law::Uniform { lo, hi } => {
                let e = k as i32 + 1;
                (hi.powi(e) - lo.powi(e)) / ((k + 1) as f64 * (hi - lo))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m1 = self.moment(1);
        self.moment(2) - m1 * m1
    }

    pub fn has_finite_moments(&self) -> bool {
        !matches!(self.law, Law::Cauchy { .. })
    }

    pub fn has_finite_mgf_near_zero(&self) -> bool {
        !matches!(self.law, Law::Cauchy { .. })
    }

    pub fn support(&self) -> (f64, f64) {
        match self.law {
            Law::Uniform { lo, hi } => (lo, hi),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Smallest length scale of the density (component width).
    pub fn feature_scale(&self) -> f64 {
        match &self.law {
            Law::Gaussian { std, .. } => *std,
            Law::Cauchy { scale, .. } => *scale,
            Law::Mixture { scales, .. } => scales.iter().copied().fold(f64::INFINITY, f64::min),
            Law::Uniform { lo, hi } => hi - lo,
        }
    }

    /// Location around which the mass is concentrated.
    pub fn center(&self) -> f64 {
        match &self.law {
            Law::Cauchy { location, .. } => *location,
            _ => self.mean(),
        }
    }

    /// Points where the density is not smooth (only the uniform edges).
    pub fn singular_points(&self) -> Vec<f64> {
        match self.law {
            Law::Uniform { lo, hi } => vec![lo, hi],
            _ => Vec::new(),
        }
    }

    pub fn has_score(&self) -> bool {
        !matches!(self.law, Law::Uniform { .. })
    }

    /// Score `ω'(z) / ω(z)`.
    pub fn score(&self, z: f64) -> Option<f64> {
        match &self.law {
            Law::Gaussian { mean, std } => Some(-(z - mean) / (std * std)),
            Law::Cauchy { location, scale } => {
                let d = z - location;
                Some(-2.0 * d / (scale * scale + d * d))
            }
            Law::Mixture { .. } => self.density_derivative_ratio(z, 1),
            Law::Uniform { .. } => None,
        }
    }

    /// `ω^{(ℓ)}(z) / ω(z)` for Gaussian laws and mixtures, evaluated without
    /// underflow in the tails.
    pub fn density_derivative_ratio(&self, z: f64, order: usize) -> Option<f64> {
        match &self.law {
            Law::Gaussian { mean, std } => {
                let u = (z - mean) / std;
                Some(sign_pow(order) * hermite_he(order, u) / std.powi(order as i32))
            }
            Law::Mixture {
                weights,
                means,
                scales,
            } => {
                let logs: Vec<f64> = weights
                    .iter()
                    .zip(means)
                    .zip(scales)
                    .map(|((w, m), s)| {
                        let u = (z - m) / s;
                        w.ln() - s.ln() - 0.5 * u * u
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut num = 0.0;
                let mut den = 0.0;
                for (j, l) in logs.iter().enumerate() {
                    let r = (l - top).exp();
                    let u = (z - means[j]) / scales[j];
                    num += r * sign_pow(order) * hermite_he(order, u) / scales[j].powi(order as i32);
                    den += r;
                }
                Some(num / den)
            }
            _ => None,
        }
    }

    /// `ω^{(ℓ)}(z)` where available.
    pub fn density_derivative(&self, z: f64, order: usize) -> Option<f64> {
        self.density_derivative_ratio(z, order).map(|r| r * self.density(z))
    }

    /// `E[g(z)]` by adaptive quadrature over the support, split at `breaks`.
    pub fn expect<F: FnMut(f64) -> f64>(
        &self,
        mut g: F,
        breaks: &[f64],
        cfg: &QuadConfig<f64>,
    ) -> Result<f64, QuadError> {
        let (lo, hi) = self.support();
        if lo.is_finite() && hi.is_finite() {
            let v = quad::integrate_with_breaks(|z| g(z) * self.density(z), lo, hi, breaks, cfg)?;
            return Ok(v.value);
        }
        let mut points: Vec<f64> = breaks.to_vec();
        points.push(self.center());
        if let Law::Mixture { means, .. } = &self.law {
            points.extend(means.iter().copied());
        }
        let v = quad::integrate_real_line(
            |z| {
                let d = self.density(z);
                if d == 0.0 {
                    0.0
                } else {
                    g(z) * d
                }
            },
            &points,
            cfg,
        )?;
        Ok(v.value)
    }

    /// `E[g(z)]` by a 200-node Gauss–Hermite rule per Gaussian component.
    /// `None` for non-Gaussian laws.
    pub fn expect_gauss_hermite<F: FnMut(f64) -> f64>(&self, mut g: F) -> Option<f64> {
        let components: Vec<(f64, f64, f64)> = match &self.law {
            Law::Gaussian { mean, std } => vec![(1.0, *mean, *std)],
            Law::Mixture {
                weights,
                means,
                scales,
            } => weights
                .iter()
                .zip(means)
                .zip(scales)
                .map(|((w, m), s)| (*w, *m, *s))
                .collect(),
            _ => return None,
        };
        let rule = hermite_200();
        Some(
            components
                .iter()
                .map(|&(w, m, s)| w * rule.apply(|x| g(m + s * x)))
                .sum(),
        )
    }
}

fn hermite_200() -> &'static quad::GaussRule<f64> {
    static RULE: std::sync::OnceLock<quad::GaussRule<f64>> = std::sync::OnceLock::new();
    RULE.get_or_init(|| quad::gauss_hermite(200))
}

fn sign_pow(order: usize) -> f64 {
    if order % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn log_sum_exp<I: Iterator<Item = f64>>(terms: I) -> f64 {
    let v: Vec<f64> = terms.collect();
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Fisher information for translation, `∫ ω'(z)² / ω(z) dz`.
///
/// Gaussian laws and mixtures are integrated twice (adaptive Gauss–Kronrod and
/// Gauss–Hermite per component) and must agree to 1e-6 relative.
pub fn fisher_information(measure: &NoiseMeasure) -> Result<f64, MeasureError> {
    if !measure.has_score() {
        return Err(MeasureError::NoScore(measure.label()));
    }
    let score = |z: f64| measure.score(z).expect("score available");
    let adaptive = measure.expect(|z| score(z).powi(2), &[], &QuadConfig::default())?;
    if let Some(hermite) = measure.expect_gauss_hermite(|z| score(z).powi(2)) {
        if (adaptive - hermite).abs() > 1e-6 * adaptive.abs().max(1.0) {
            return Err(MeasureError::CrossCheck { adaptive, hermite });
        }
    }
    Ok(adaptive)
}
