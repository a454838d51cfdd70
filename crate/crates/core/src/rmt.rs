//! Limiting spectral laws and outlier formulas for spiked rectangular and
//! symmetric matrices, evaluated at the effective signal strength `τσ`.

use num_complex::Complex;
use serde::Serialize;
use thiserror::Error;

use crate::orthopoly::TauReport;
use crate::quad::{self, QuadConfig};
use crate::scalar::{sign0, Real};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RmtError {
    #[error("aspect ratio gamma must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("signal strength must be finite (and nonnegative for rectangular spikes), got {0}")]
    BadSigma(f64),
    #[error("signal strengths must be listed in descending order")]
    NotDescending,
    #[error("Stieltjes transform needs Im z > 0, got {0}")]
    NotUpperHalfPlane(f64),
    #[error("no finite ell* detected up to the requested order")]
    NoEllStar,
    #[error("moment m_2ell must be positive and finite, got {0}")]
    BadMoment(f64),
}

fn check_gamma<T: Real>(gamma: T) -> Result<(), RmtError> {
    if gamma > T::zero() && gamma.is_finite() {
        Ok(())
    } else {
        Err(RmtError::BadGamma(gamma.to_f64_lossy()))
    }
}

/// `γ^{1/4}`, the signal strength at which a rectangular spike separates from the bulk.
pub fn mp_threshold<T: Real>(gamma: T) -> T {
    gamma.sqrt().sqrt()
}

/// `(1 + √γ)²`.
pub fn mp_bulk_edge<T: Real>(gamma: T) -> T {
    (T::one() + gamma.sqrt()).powi(2)
}

/// `(1 − √γ)²`.
pub fn mp_bulk_lower<T: Real>(gamma: T) -> T {
    (T::one() - gamma.sqrt()).powi(2)
}

/// Limit of the squared top singular value: `(1+σ²)(γ+σ²)/σ²` above threshold, else the bulk edge.
pub fn mp_lambda<T: Real>(sigma: T, gamma: T) -> T {
    if sigma > mp_threshold(gamma) {
        let s2 = sigma * sigma;
        (T::one() + s2) * (gamma + s2) / s2
    } else {
        mp_bulk_edge(gamma)
    }
}

/// Limits `(c1², c2²)` of the squared cosines between left/right singular vectors and the spike.
pub fn mp_cos_sq<T: Real>(sigma: T, gamma: T) -> (T, T) {
    if sigma > mp_threshold(gamma) {
        let s2 = sigma * sigma;
        let one = T::one();
        let c1 = one - (gamma + s2) / (s2 * (one + s2));
        let c2 = one - gamma * (one + s2) / (s2 * (gamma + s2));
        (c1.max(T::zero()), c2.max(T::zero()))
    } else {
        (T::zero(), T::zero())
    }
}

/// Limit of the top eigenvalue of a spiked Wigner matrix: `λ + 1/λ` for `|λ| > 1`,
/// else `2·sign(λ)` with `sign(0) = 0`.
pub fn wigner_lambda_bar<T: Real>(lambda: T) -> T {
    if lambda.abs() > T::one() {
        lambda + lambda.recip()
    } else {
        T::two() * sign0(lambda)
    }
}

/// `c̄² = 1 − 1/λ²` for `|λ| > 1`, else 0.
pub fn wigner_cos_sq<T: Real>(lambda: T) -> T {
    if lambda.abs() > T::one() {
        T::one() - (lambda * lambda).recip()
    } else {
        T::zero()
    }
}

/// Absolutely continuous part of the Marchenko–Pastur law with ratio `γ`.
/// For `γ > 1` this part has mass `1/γ`; the rest is an atom at 0.
pub fn mp_density<T: Real>(x: T, gamma: T) -> T {
    let (a, b) = (mp_bulk_lower(gamma), mp_bulk_edge(gamma));
    if x <= a || x >= b || x <= T::zero() {
        return T::zero();
    }
    ((b - x) * (x - a)).sqrt() / (T::two() * T::PI() * gamma * x)
}

/// Mass of the atom at zero: `max(0, 1 − 1/γ)`.
pub fn mp_atom<T: Real>(gamma: T) -> T {
    (T::one() - gamma.recip()).max(T::zero())
}

/// Distribution function of the Marchenko–Pastur law, including the atom.
pub fn mp_cdf<T: Real>(x: T, gamma: T) -> T {
    let (a, b) = (mp_bulk_lower(gamma), mp_bulk_edge(gamma));
    let atom = if x >= T::zero() { mp_atom(gamma) } else { T::zero() };
    if x <= a {
        return atom;
    }
    if x >= b {
        return T::one();
    }
    // x = 1 + γ − 2√γ cos θ turns the density into 2 sin²θ / (π x) dθ.
    let sg = gamma.sqrt();
    let theta = ((T::one() + gamma - x) / (T::two() * sg)).max(-T::one()).min(T::one()).acos();
    let cfg = QuadConfig {
        abs_tol: T::lit(1e-14).max(T::epsilon() * T::lit(4.0)),
        rel_tol: T::lit(1e-12).max(T::epsilon() * T::lit(4.0)),
        max_intervals: 200,
    };
    let integrand = |t: T| {
        let s = t.sin();
        T::two() * s * s / (T::PI() * (T::one() + gamma - T::two() * sg * t.cos()))
    };
    let v = quad::integrate(integrand, T::zero(), theta, &cfg)
        .map(|r| r.value)
        .unwrap_or_else(|e| match e {
            quad::QuadError::MaxSubdivisions { value, .. } => T::lit(value),
            _ => T::nan(),
        });
    (atom + v).min(T::one())
}

/// Quantile of the Marchenko–Pastur law by bisection on [`mp_cdf`].
pub fn mp_quantile<T: Real>(p: T, gamma: T) -> T {
    if p <= mp_atom(gamma) {
        return T::zero();
    }
    let (mut lo, mut hi) = (mp_bulk_lower(gamma), mp_bulk_edge(gamma));
    for _ in 0..200 {
        let mid = T::half() * (lo + hi);
        if mp_cdf(mid, gamma) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    T::half() * (lo + hi)
}

/// Semicircle density on `[−2, 2]`.
pub fn semicircle_density<T: Real>(x: T) -> T {
    let four = T::lit(4.0);
    if x.abs() >= T::two() {
        T::zero()
    } else {
        (four - x * x).sqrt() / (T::two() * T::PI())
    }
}

pub fn semicircle_cdf<T: Real>(x: T) -> T {
    if x <= -T::two() {
        return T::zero();
    }
    if x >= T::two() {
        return T::one();
    }
    T::half() + x * (T::lit(4.0) - x * x).sqrt() / (T::lit(4.0) * T::PI()) + (x / T::two()).asin() / T::PI()
}

/// Stieltjes transform `m(z) = ∫ dF_γ(λ)/(λ − z)` of the Marchenko–Pastur law
/// (atom included for `γ > 1`), on the branch with `Im m > 0` for `Im z > 0`.
pub fn mp_stieltjes<T: Real>(z: Complex<T>, gamma: T) -> Result<Complex<T>, RmtError> {
    check_gamma(gamma)?;
    if !(z.im > T::zero()) {
        return Err(RmtError::NotUpperHalfPlane(z.im.to_f64_lossy()));
    }
    let (a, b) = (mp_bulk_lower(gamma), mp_bulk_edge(gamma));
    // Product of principal roots has the cut exactly on [a, b].
    let root = (z - a).sqrt() * (z - b).sqrt();
    let one = Complex::new(T::one(), T::zero());
    Ok((one * (T::one() - gamma) - z + root) / (z * (T::two() * gamma)))
}

/// Companion transform `γ m_γ(z) − (1 − γ)/z`, the Stieltjes transform of the
/// law with ratio `1/γ` (the transposed matrix).
pub fn mp_stieltjes_companion<T: Real>(z: Complex<T>, gamma: T) -> Result<Complex<T>, RmtError> {
    let m = mp_stieltjes(z, gamma)?;
    Ok(m * gamma - Complex::new(T::one() - gamma, T::zero()) / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Rectangular `n × p` observations, singular values and vectors.
    Asymmetric,
    /// Symmetric `n × n` observations, eigenvalues and eigenvectors.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionOutcome {
    Ok,
    /// `τ = 0`: no spike is visible at the √n scaling; use the `ℓ*` prediction instead.
    AllSubcriticalUseEllStar,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikePrediction<T> {
    pub sigma: T,
    pub effective_snr: T,
    pub supercritical: bool,
    /// Squared singular value limit (rectangular) or eigenvalue limit (symmetric).
    pub predicted_sq_singular_value: T,
    pub cos_left_sq: T,
    pub cos_right_sq: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralPrediction<T> {
    pub gamma: T,
    pub setting: Setting,
    /// `|τ|` (or `τ̃` for the `ℓ*` path).
    pub tau_effective: T,
    /// Sign of τ; cosines and outliers depend only on `|τσ|`.
    pub tau_sign: i8,
    /// Power of σ entering the effective SNR (1 except on the `ℓ*` path).
    pub sigma_power: usize,
    pub per_spike: Vec<SpikePrediction<T>>,
    pub bulk_edge: T,
    /// Signal strength at the phase transition; `None` when τ = 0.
    pub threshold_sigma: Option<T>,
    pub outcome: PredictionOutcome,
}

fn check_sigmas<T: Real>(sigmas: &[T], setting: Setting) -> Result<(), RmtError> {
    for &s in sigmas {
        if !s.is_finite() || (setting == Setting::Asymmetric && s < T::zero()) {
            return Err(RmtError::BadSigma(s.to_f64_lossy()));
        }
    }
    if sigmas.windows(2).any(|w| w[0] < w[1]) {
        return Err(RmtError::NotDescending);
    }
    Ok(())
}

fn spike<T: Real>(sigma: T, snr: T, gamma: T, setting: Setting) -> SpikePrediction<T> {
    match setting {
        Setting::Asymmetric => {
            let (c1, c2) = mp_cos_sq(snr, gamma);
            SpikePrediction {
                sigma,
                effective_snr: snr,
                supercritical: snr > mp_threshold(gamma),
                predicted_sq_singular_value: mp_lambda(snr, gamma),
                cos_left_sq: c1,
                cos_right_sq: c2,
            }
        }
        Setting::Symmetric => {
            let c = wigner_cos_sq(snr);
            SpikePrediction {
                sigma,
                effective_snr: snr,
                supercritical: snr.abs() > T::one(),
                predicted_sq_singular_value: wigner_lambda_bar(snr),
                cos_left_sq: c,
                cos_right_sq: c,
            }
        }
    }
}

/// Outlier and cosine limits for the transformed spiked model with effective
/// constant `tau`, at signal strengths `sigmas` (descending).
pub fn predict<T: Real>(tau: T, gamma: T, sigmas: &[T], setting: Setting) -> Result<SpectralPrediction<T>, RmtError> {
    check_gamma(gamma)?;
    check_sigmas(sigmas, setting)?;
    let t = tau.abs();
    let tau_sign = if tau > T::zero() {
        1
    } else if tau < T::zero() {
        -1
    } else {
        0
    };
    let (bulk_edge, critical) = match setting {
        Setting::Asymmetric => (mp_bulk_edge(gamma), mp_threshold(gamma)),
        Setting::Symmetric => (T::two(), T::one()),
    };
    let per_spike = sigmas.iter().map(|&s| spike(s, t * s, gamma, setting)).collect();
    let zero = t == T::zero();
    Ok(SpectralPrediction {
        gamma,
        setting,
        tau_effective: t,
        tau_sign,
        sigma_power: 1,
        per_spike,
        bulk_edge,
        threshold_sigma: (!zero).then(|| critical / t),
        outcome: if zero {
            PredictionOutcome::AllSubcriticalUseEllStar
        } else {
            PredictionOutcome::Ok
        },
    })
}

/// `τ̃ = τ_ℓ √(m_2ℓ^u m_2ℓ^v) / (ℓ! γ^{(ℓ−1)/2})`.
pub fn tau_tilde<T: Real>(tau_ell: T, ell: usize, gamma: T, m2l_u: T, m2l_v: T) -> Result<T, RmtError> {
    check_gamma(gamma)?;
    for m in [m2l_u, m2l_v] {
        if !(m > T::zero() && m.is_finite()) {
            return Err(RmtError::BadMoment(m.to_f64_lossy()));
        }
    }
    if ell == 0 {
        return Err(RmtError::NoEllStar);
    }
    let fact = (1..=ell).fold(T::one(), |acc, i| acc * T::from_usize(i).unwrap());
    let expo = T::from_usize(ell - 1).unwrap() * T::half();
    Ok(tau_ell * (m2l_u * m2l_v).sqrt() / (fact * gamma.powf(expo)))
}

/// Prediction for the Hadamard-power directions when the leading nonzero order is `ell`:
/// effective SNR `τ̃ σ^ℓ` (rectangular setting).
pub fn predict_ell_star<T: Real>(
    tau_ell: T,
    ell: usize,
    gamma: T,
    sigma: T,
    m2l_u: T,
    m2l_v: T,
) -> Result<SpectralPrediction<T>, RmtError> {
    let tt = tau_tilde(tau_ell, ell, gamma, m2l_u, m2l_v)?;
    if !(sigma >= T::zero() && sigma.is_finite()) {
        return Err(RmtError::BadSigma(sigma.to_f64_lossy()));
    }
    let t = tt.abs();
    let snr = t * sigma.powi(ell as i32);
    let zero = t == T::zero();
    let root = T::from_usize(ell).unwrap().recip();
    Ok(SpectralPrediction {
        gamma,
        setting: Setting::Asymmetric,
        tau_effective: t,
        tau_sign: if tt < T::zero() { -1 } else { 1 },
        sigma_power: ell,
        per_spike: vec![spike(sigma, snr, gamma, Setting::Asymmetric)],
        bulk_edge: mp_bulk_edge(gamma),
        threshold_sigma: (!zero).then(|| (mp_threshold(gamma) / t).powf(root)),
        outcome: PredictionOutcome::Ok,
    })
}

/// [`predict`] driven by a τ report.
pub fn predict_from_report(
    report: &TauReport,
    gamma: f64,
    sigmas: &[f64],
    setting: Setting,
) -> Result<SpectralPrediction<f64>, RmtError> {
    predict(report.tau, gamma, sigmas, setting)
}

/// [`predict_ell_star`] at the report's `ℓ*`.
pub fn predict_ell_star_from_report(
    report: &TauReport,
    gamma: f64,
    sigma: f64,
    m2l_u: f64,
    m2l_v: f64,
) -> Result<SpectralPrediction<f64>, RmtError> {
    let ell = report.ell_star.ok_or(RmtError::NoEllStar)?;
    let tau_ell = report.tau_at(ell).ok_or(RmtError::NoEllStar)?;
    predict_ell_star(tau_ell, ell, gamma, sigma, m2l_u, m2l_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn lambda_values() {
        assert_abs_diff_eq!(mp_lambda(2f64.sqrt(), 1.0), 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(mp_lambda(0.3, 1.0), 4.0, epsilon = 1e-15);
        let g = 0.5f64;
        let th = mp_threshold(g);
        assert_abs_diff_eq!(mp_lambda(th, g), 2.914213562373095, epsilon = 1e-12);
        let s = th * (1.0 + 1e-14);
        assert_abs_diff_eq!(mp_lambda(s, g), mp_bulk_edge(g), epsilon = 1e-12);
    }

    #[test]
    fn cos_values() {
        let (c1, c2) = mp_cos_sq(2.0f64, 1.0);
        assert_abs_diff_eq!(c1, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c2, 0.75, epsilon = 1e-15);
        assert_eq!(mp_cos_sq(0.5f64.powf(0.25), 0.5), (0.0, 0.0));
        let (a, b) = mp_cos_sq(1e8f64, 0.3);
        assert!(a > 1.0 - 1e-12 && b > 1.0 - 1e-12);
        let th = mp_threshold(0.7f64) * (1.0 + 1e-14);
        let (a, b) = mp_cos_sq(th, 0.7);
        assert!(a < 1e-12 && b < 1e-12);
    }

    #[test]
    fn wigner_values() {
        assert_abs_diff_eq!(wigner_lambda_bar(2.0f64), 2.5);
        assert_abs_diff_eq!(wigner_cos_sq(2.0f64), 0.75);
        assert_eq!(wigner_lambda_bar(1.0f64), 2.0);
        assert_eq!(wigner_cos_sq(1.0f64), 0.0);
        assert_abs_diff_eq!(wigner_lambda_bar(-3.0f64), -10.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wigner_cos_sq(-3.0f64), 8.0 / 9.0, epsilon = 1e-15);
        assert_eq!(wigner_lambda_bar(0.0f64), 0.0);
        assert_abs_diff_eq!(wigner_lambda_bar(1.0 + 1e-13f64), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mp_normalization_and_mean() {
        for g in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
            let (a, b) = (mp_bulk_lower(g), mp_bulk_edge(g));
            let cfg = QuadConfig::tight();
            // x = a + (b − a) sin²φ removes the square-root endpoint behaviour.
            let moment = |k: i32| {
                quad::integrate(
                    |phi: f64| {
                        let (s, c) = phi.sin_cos();
                        let x = a + (b - a) * s * s;
                        x.powi(k) * mp_density(x, g) * 2.0 * (b - a) * s * c
                    },
                    0.0,
                    std::f64::consts::FRAC_PI_2,
                    &cfg,
                )
                .unwrap()
                .value
            };
            let mass = moment(0);
            assert!((mass + mp_atom(g) - 1.0).abs() < 1e-8, "gamma={g}: {mass}");
            let mean = moment(1);
            assert!((mean - 1.0).abs() < 1e-8);
            assert_abs_diff_eq!(mp_cdf(b, g), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn mp_cdf_matches_density_integral() {
        let g = 0.5f64;
        let a = mp_bulk_lower(g);
        for x in [0.2, 0.5, 1.0, 2.0, 2.8] {
            let direct = quad::integrate(|t| mp_density(t, g), a, x, &QuadConfig::tight()).unwrap().value;
            assert!((mp_cdf(x, g) - direct).abs() < 1e-9);
        }
        assert_abs_diff_eq!(mp_cdf(0.1f64, 2.0), 0.5, epsilon = 1e-15);
        let q = mp_quantile(0.5f64, 0.5);
        assert_abs_diff_eq!(mp_cdf(q, 0.5), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn semicircle() {
        let m = quad::integrate(|x| semicircle_density(x), -2.0f64, 2.0, &QuadConfig::tight()).unwrap().value;
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(semicircle_cdf(0.0f64), 0.5, epsilon = 1e-15);
        let direct = quad::integrate(|x| semicircle_density(x), -2.0f64, 0.7, &QuadConfig::tight()).unwrap().value;
        assert_abs_diff_eq!(semicircle_cdf(0.7f64), direct, epsilon = 1e-10);
    }

    #[test]
    fn stieltjes_inversion() {
        for g in [0.25f64, 0.5, 1.0] {
            let (a, b) = (mp_bulk_lower(g), mp_bulk_edge(g));
            for i in 1..50 {
                let x = a + (b - a) * i as f64 / 50.0;
                let m = mp_stieltjes(Complex::new(x, 1e-6), g).unwrap();
                assert!((m.im / std::f64::consts::PI - mp_density(x, g)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn stieltjes_quadratic_and_asymptotics() {
        let g = 1.0f64;
        let z = Complex::new(10.0, 1e-12);
        let m = mp_stieltjes(z, g).unwrap();
        let res = z * g * m * m + (z - 1.0 + g) * m + 1.0;
        assert!(res.norm() < 1e-10);
        let z = Complex::new(0.0, 1e4);
        let m = mp_stieltjes(z, 0.5).unwrap();
        assert!((m + z.inv()).norm() < 1e-7);
        assert!(mp_stieltjes(Complex::new(1.0, 0.0), 0.5).is_err());
        assert!(mp_stieltjes(Complex::new(1.0, -1.0), 0.5).is_err());
    }

    #[test]
    fn stieltjes_positive_imaginary_part_all_ratios() {
        for g in [0.1f64, 0.5, 1.0, 2.0, 5.0] {
            for re in [-3.0, 0.0, 0.5, 1.0, 3.0, 10.0] {
                for im in [1e-3, 0.1, 1.0, 10.0] {
                    let m = mp_stieltjes(Complex::new(re, im), g).unwrap();
                    assert!(m.im > 0.0, "gamma={g} z={re}+{im}i");
                }
            }
        }
    }

    #[test]
    fn stieltjes_matches_direct_integral() {
        for g in [0.5f64, 2.0] {
            let z = Complex::new(1.3, 0.2);
            let (a, b) = (mp_bulk_lower(g), mp_bulk_edge(g));
            let cfg = QuadConfig::tight();
            let re = quad::integrate(|x| (mp_density(x, g) / (Complex::new(x, 0.0) - z)).re, a, b, &cfg).unwrap().value;
            let im = quad::integrate(|x| (mp_density(x, g) / (Complex::new(x, 0.0) - z)).im, a, b, &cfg).unwrap().value;
            let atom = -z.inv() * mp_atom(g);
            let m = mp_stieltjes(z, g).unwrap();
            assert!((m - Complex::new(re, im) - atom).norm() < 1e-8, "gamma={g}");
            let c = mp_stieltjes_companion(z, g).unwrap();
            assert!((c - (m * g - Complex::new(1.0 - g, 0.0) / z)).norm() < 1e-14);
            assert!(c.im > 0.0);
        }
    }

    #[test]
    fn predict_relu_example() {
        let tau = (std::f64::consts::PI / (2.0 * (std::f64::consts::PI - 1.0))).sqrt();
        let p = predict(tau, 0.5, &[2.0], Setting::Asymmetric).unwrap();
        let s = &p.per_spike[0];
        assert_abs_diff_eq!(s.effective_snr, 2.0 * tau, epsilon = 1e-12);
        assert!(s.supercritical);
        let (c1, c2) = mp_cos_sq(2.0 * tau, 0.5);
        assert_eq!((s.cos_left_sq, s.cos_right_sq), (c1, c2));
        assert_abs_diff_eq!(p.threshold_sigma.unwrap(), 0.5f64.powf(0.25) / tau, epsilon = 1e-12);
    }

    #[test]
    fn predict_subcritical_and_zero_tau() {
        let p = predict(1.0, 1.0, &[0.9, 0.5], Setting::Asymmetric).unwrap();
        for s in &p.per_spike {
            assert!(!s.supercritical);
            assert_eq!((s.cos_left_sq, s.cos_right_sq), (0.0, 0.0));
            assert_eq!(s.predicted_sq_singular_value, p.bulk_edge);
        }
        let p = predict(0.0, 1.0, &[5.0], Setting::Asymmetric).unwrap();
        assert_eq!(p.outcome, PredictionOutcome::AllSubcriticalUseEllStar);
        assert_eq!(p.threshold_sigma, None);
        assert!(predict(1.0, 1.0, &[0.5, 0.9], Setting::Asymmetric).is_err());
        assert!(predict(1.0, 0.0, &[1.0], Setting::Asymmetric).is_err());
    }

    #[test]
    fn predict_symmetric() {
        let p = predict(1.0f64, 1.0, &[2.0, -3.0], Setting::Symmetric).unwrap();
        assert_eq!(p.bulk_edge, 2.0);
        assert_abs_diff_eq!(p.per_spike[0].predicted_sq_singular_value, 2.5);
        assert_abs_diff_eq!(p.per_spike[1].cos_left_sq, 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_tau_only_changes_sign() {
        let a = predict(-0.8f64, 0.5, &[3.0], Setting::Asymmetric).unwrap();
        let b = predict(0.8f64, 0.5, &[3.0], Setting::Asymmetric).unwrap();
        assert_eq!(a.per_spike, b.per_spike);
        assert_eq!(a.tau_sign, -1);
    }

    #[test]
    fn ell_star_constant() {
        let t = tau_tilde(2f64.sqrt(), 2, 1.0, 3.0, 3.0).unwrap();
        assert_abs_diff_eq!(t, 3.0 * 2f64.sqrt() / 2.0, epsilon = 1e-12);
        let p = predict_ell_star(0.7f64, 1, 0.5, 2.0, 1.0, 1.0).unwrap();
        let q = predict(0.7f64, 0.5, &[2.0], Setting::Asymmetric).unwrap();
        assert_eq!(p.per_spike, q.per_spike);
        let sub = predict_ell_star(2f64.sqrt(), 2, 1.0, 0.5, 3.0, 3.0).unwrap();
        assert_eq!(sub.per_spike[0].cos_left_sq, 0.0);
        assert!(tau_tilde(1.0f64, 0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn generic_f32() {
        let v: f32 = mp_lambda(2.0f32.sqrt(), 1.0);
        assert!((v - 4.5).abs() < 1e-5);
        let (c1, _) = mp_cos_sq(2.0f32, 1.0);
        assert!((c1 - 0.75).abs() < 1e-6);
        assert!((mp_cdf(4.0f32, 1.0) - 1.0).abs() < 1e-6);
        let half: f32 = mp_cdf(mp_quantile(0.5f32, 0.5), 0.5);
        assert!((half - 0.5).abs() < 1e-4);
        let m = mp_stieltjes(Complex::new(1.0f32, 0.1), 0.5).unwrap();
        assert!(m.im > 0.0);
    }

    proptest! {
        #[test]
        fn monotone_in_sigma(gamma in 0.05f64..4.0, s in 0.0f64..5.0, ds in 1e-4f64..1.0) {
            let s1 = mp_threshold(gamma) + s + 1e-6;
            let s2 = s1 + ds;
            prop_assert!(mp_lambda(s2, gamma) > mp_lambda(s1, gamma));
            let (a1, b1) = mp_cos_sq(s1, gamma);
            let (a2, b2) = mp_cos_sq(s2, gamma);
            prop_assert!(a2 > a1 && b2 > b1);
            prop_assert!((0.0..=1.0).contains(&a1) && (0.0..=1.0).contains(&b1));
            prop_assert!(mp_lambda(s1, gamma) >= mp_bulk_edge(gamma));
        }

        #[test]
        fn square_case_symmetric(s in 0.0f64..10.0) {
            let (a, b) = mp_cos_sq(s, 1.0);
            prop_assert!((a - b).abs() < 1e-14);
        }

        #[test]
        fn only_product_enters(tau in 0.1f64..3.0, c in 0.1f64..10.0, s in 0.0f64..5.0, gamma in 0.1f64..3.0) {
            let a = predict(tau * c, gamma, &[s / c], Setting::Asymmetric).unwrap();
            let b = predict(tau, gamma, &[s], Setting::Asymmetric).unwrap();
            let (x, y) = (&a.per_spike[0], &b.per_spike[0]);
            prop_assert!((x.cos_left_sq - y.cos_left_sq).abs() < 1e-12);
            prop_assert!((x.predicted_sq_singular_value - y.predicted_sq_singular_value).abs() < 1e-10 * y.predicted_sq_singular_value);
        }
    }
}
