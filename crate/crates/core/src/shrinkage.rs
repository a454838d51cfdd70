//! Singular-value shrinkage for operator-norm denoising of spiked matrices
//! normalized to unit noise level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rmt::mp_quantile;
use crate::scalar::Real;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ShrinkageError {
    #[error("aspect ratio gamma must be positive and finite, got {0}")]
    BadGamma(f64),
    #[error("singular values must be finite and nonnegative, got {0}")]
    BadValue(f64),
    #[error("cosine must lie in [-1, 1], got {0}")]
    BadCosine(f64),
}

/// `t²(σ)`: inverse of the squared-singular-value biasing map, 0 at or below `1 + √γ`.
pub fn t_squared<T: Real>(sigma: T, gamma: T) -> T {
    let edge = T::one() + gamma.sqrt();
    if sigma <= edge {
        return T::zero();
    }
    let d = sigma * sigma - T::one() - gamma;
    let disc = (d * d - T::lit(4.0) * gamma).max(T::zero());
    T::half() * (d + disc.sqrt())
}

/// `η*(σ) = t √((t² + min(1, γ)) / (t² + max(1, γ)))`.
pub fn eta_star<T: Real>(sigma: T, gamma: T) -> T {
    let t2 = t_squared(sigma, gamma);
    if t2 == T::zero() {
        return T::zero();
    }
    let (lo, hi) = (gamma.min(T::one()), gamma.max(T::one()));
    t2.sqrt() * ((t2 + lo) / (t2 + hi)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShrinkageKind {
    EtaStar,
    HardThreshold { level: f64 },
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageRule {
    pub gamma: f64,
    pub kind: ShrinkageKind,
}

impl ShrinkageRule {
    pub fn new(gamma: f64, kind: ShrinkageKind) -> Result<Self, ShrinkageError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(ShrinkageError::BadGamma(gamma));
        }
        Ok(Self { gamma, kind })
    }

    pub fn eta_star(gamma: f64) -> Result<Self, ShrinkageError> {
        Self::new(gamma, ShrinkageKind::EtaStar)
    }

    pub fn apply(&self, sigma: f64) -> f64 {
        match self.kind {
            ShrinkageKind::EtaStar => eta_star(sigma, self.gamma),
            ShrinkageKind::HardThreshold { level } => {
                if sigma > level {
                    sigma
                } else {
                    0.0
                }
            }
            ShrinkageKind::Identity => sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrunkValue {
    /// Position in the input list.
    pub index: usize,
    pub sigma: f64,
    pub shrunk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenoiseResult {
    /// Components with nonzero shrunk value, in input order.
    pub retained: Vec<ShrunkValue>,
    pub warnings: Vec<String>,
}

/// Applies `rule` to singular values of a matrix normalized to unit noise level.
///
/// When `bulk` (singular values of the same matrix outside the retained set) is
/// supplied, its median squared value is compared with the Marchenko–Pastur median
/// and a warning is raised if they differ by more than 25%.
pub fn denoise(values: &[f64], rule: &ShrinkageRule, bulk: Option<&[f64]>) -> Result<DenoiseResult, ShrinkageError> {
    if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(ShrinkageError::BadValue(bad));
    }
    let retained = values
        .iter()
        .enumerate()
        .map(|(index, &sigma)| ShrunkValue {
            index,
            sigma,
            shrunk: rule.apply(sigma),
        })
        .filter(|s| s.shrunk > 0.0)
        .collect();
    let mut warnings = Vec::new();
    if let Some(bulk) = bulk.filter(|b| b.len() >= 5) {
        let mut sq: Vec<f64> = bulk.iter().map(|s| s * s).collect();
        sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sq[sq.len() / 2];
        // Nonzero squared singular values follow MP(γ) for γ ≤ 1 and γ·MP(1/γ) otherwise.
        let g = rule.gamma;
        let target = if g <= 1.0 { mp_quantile(0.5, g) } else { g * mp_quantile(0.5, 1.0 / g) };
        if (median / target - 1.0).abs() > 0.25 {
            warnings.push(format!(
                "bulk median squared singular value {median:.4} differs from the unit-noise value {target:.4}; input may not be normalized"
            ));
        }
    }
    Ok(DenoiseResult { retained, warnings })
}

/// `‖σ u vᵀ − η û v̂ᵀ‖₂` for unit vectors with `⟨u, û⟩ = c_left`, `⟨v, v̂⟩ = c_right`.
pub fn rank_one_op_loss<T: Real>(sigma: T, eta: T, c_left: T, c_right: T) -> Result<T, ShrinkageError> {
    for c in [c_left, c_right] {
        if !(c.abs() <= T::one()) {
            return Err(ShrinkageError::BadCosine(c.to_f64_lossy()));
        }
    }
    let sl = (T::one() - c_left * c_left).max(T::zero()).sqrt();
    let sr = (T::one() - c_right * c_right).max(T::zero()).sqrt();
    // 2×2 representation in bases adapted to (u, û) and (v, v̂).
    let m11 = sigma - eta * c_left * c_right;
    let m12 = -eta * c_left * sr;
    let m21 = -eta * sl * c_right;
    let m22 = -eta * sl * sr;
    let fro = m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22;
    let det = m11 * m22 - m12 * m21;
    let disc = (fro * fro - T::lit(4.0) * det * det).max(T::zero());
    Ok((T::half() * (fro + disc.sqrt())).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmt::{mp_cos_sq, mp_lambda};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn t_squared_edge() {
        for g in [0.25f64, 0.5, 1.0, 2.0] {
            let edge = 1.0 + g.sqrt();
            assert_eq!(t_squared(edge, g), 0.0);
            assert!((t_squared(edge * (1.0 + 1e-12), g) - g.sqrt()).abs() < 1e-5);
        }
        assert_eq!(t_squared(0.5f64, 1.0), 0.0);
    }

    #[test]
    fn eta_star_square_case() {
        for s in [2.1f64, 3.0, 10.0] {
            assert_abs_diff_eq!(eta_star(s, 1.0), t_squared(s, 1.0).sqrt(), epsilon = 1e-14);
        }
        assert_eq!(eta_star(1.5f64, 0.5), 0.0);
        let t2 = t_squared(2.2f64, 0.5);
        assert_abs_diff_eq!(eta_star(2.2f64, 0.5), (t2 * (t2 + 0.5) / (t2 + 1.0)).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn rules() {
        let r = ShrinkageRule::new(0.5, ShrinkageKind::Identity).unwrap();
        let out = denoise(&[3.0, 0.5], &r, None).unwrap();
        assert_eq!(out.retained.len(), 2);
        assert_eq!(out.retained[1].shrunk, 0.5);
        let r = ShrinkageRule::eta_star(0.5).unwrap();
        assert!(denoise(&[1.2, 0.9], &r, None).unwrap().retained.is_empty());
        let r = ShrinkageRule::new(1.0, ShrinkageKind::HardThreshold { level: 2.0 }).unwrap();
        assert_eq!(r.apply(2.5), 2.5);
        assert_eq!(r.apply(1.5), 0.0);
        assert!(ShrinkageRule::eta_star(0.0).is_err());
        assert!(denoise(&[-1.0], &r, None).is_err());
    }

    #[test]
    fn bulk_check_flags_unnormalized_input() {
        let r = ShrinkageRule::eta_star(1.0).unwrap();
        let bulk: Vec<f64> = (0..50).map(|i| 5.0 + i as f64 * 0.01).collect();
        assert!(!denoise(&[30.0], &r, Some(&bulk)).unwrap().warnings.is_empty());
    }

    #[test]
    fn op_loss_basics() {
        assert_abs_diff_eq!(rank_one_op_loss(2.0f64, 0.0, 0.3, 0.3).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rank_one_op_loss(2.0f64, 1.5, 1.0, 1.0).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(rank_one_op_loss(2.0f64, 2.0, 0.0, 0.0).unwrap(), 2.0, epsilon = 1e-14);
        assert!(rank_one_op_loss(1.0f64, 1.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn eta_star_minimizes_asymptotic_loss() {
        // With limiting cosines, η* minimizes the rank-one operator-norm loss.
        for g in [0.3f64, 0.5, 1.0, 2.0] {
            for s in [1.2f64, 2.0, 3.5] {
                if s <= g.powf(0.25) {
                    continue;
                }
                let y = mp_lambda(s, g).sqrt();
                let (c1, c2) = mp_cos_sq(s, g);
                let eta = eta_star(y, g);
                let best = rank_one_op_loss(s, eta, c1.sqrt(), c2.sqrt()).unwrap();
                for i in 0..=400 {
                    let alt = y * i as f64 / 400.0;
                    assert!(rank_one_op_loss(s, alt, c1.sqrt(), c2.sqrt()).unwrap() >= best - 1e-10);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn t_inverts_biasing(gamma in 0.05f64..4.0, extra in 1e-3f64..6.0) {
            let s = gamma.powf(0.25) + extra;
            let sigma = mp_lambda(s, gamma).sqrt();
            prop_assert!((t_squared(sigma, gamma) - s * s).abs() < 1e-10 * (s * s).max(1.0));
        }

        #[test]
        fn never_expands(gamma in 0.05f64..4.0, sigma in 0.0f64..20.0) {
            let t = t_squared(sigma, gamma).sqrt();
            prop_assert!(eta_star(sigma, gamma) <= t + 1e-12);
            prop_assert!(t <= sigma + 1e-12);
        }

        #[test]
        fn nondecreasing(gamma in 0.05f64..4.0, sigma in 0.0f64..20.0, d in 0.0f64..1.0) {
            prop_assert!(eta_star(sigma + d, gamma) >= eta_star(sigma, gamma) - 1e-12);
        }
    }
}
