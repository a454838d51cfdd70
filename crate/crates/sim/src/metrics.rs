//! Quantities compared against the limiting theory.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use spiketrans_core::rmt::{mp_cdf, semicircle_cdf};
use spiketrans_core::Setting;

use crate::linalg::{gram_eigenvalues, sym_eigenvalues};
use crate::model::Signal;
use crate::SimError;

/// Squared inner products `⟨planted_i, estimated_j⟩²` (rows: planted, columns: estimated).
pub fn cosines(planted: &DMatrix<f64>, estimated: &[DVector<f64>]) -> Vec<Vec<f64>> {
    (0..planted.ncols())
        .map(|i| {
            let u = planted.column(i);
            estimated.iter().map(|e| u.dot(e).powi(2)).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Reference {
    MarchenkoPastur { gamma: f64 },
    Semicircle,
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::MarchenkoPastur { gamma } => mp_cdf(x, *gamma),
            Self::Semicircle => semicircle_cdf(x),
        }
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `sorted` and `reference`.
pub fn esd_ks(sorted: &[f64], reference: &Reference) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = reference.cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Bulk spectrum of `y / f_norm` with `drop_top` largest (and, for symmetric
/// matrices, `drop_bottom` smallest) eigenvalues removed, together with the law it
/// should follow.
///
/// Rectangular case: eigenvalues of the smaller Gram matrix. For `p ≤ n` these follow
/// MP(γ); for `p > n` they are rescaled by `1/γ` and compared with MP(1/γ).
pub fn bulk_spectrum(
    y: &DMatrix<f64>,
    f_norm: f64,
    setting: Setting,
    drop_top: usize,
    drop_bottom: usize,
) -> Result<(Vec<f64>, Reference), SimError> {
    let scale = 1.0 / f_norm;
    let (mut ev, reference) = match setting {
        Setting::Asymmetric => {
            let (n, p) = y.shape();
            let gamma = p as f64 / n as f64;
            let ev = gram_eigenvalues(&(y * scale));
            if gamma <= 1.0 {
                (ev, Reference::MarchenkoPastur { gamma })
            } else {
                (ev.into_iter().map(|v| v / gamma).collect(), Reference::MarchenkoPastur { gamma: 1.0 / gamma })
            }
        }
        Setting::Symmetric => (sym_eigenvalues(&(y * scale)), Reference::Semicircle),
    };
    let bottom = if setting == Setting::Symmetric { drop_bottom } else { 0 };
    let total = ev.len();
    if drop_top + bottom >= total {
        return Err(SimError::EmptyBulk {
            removed: drop_top + bottom,
            total,
        });
    }
    ev.truncate(total - drop_top);
    ev.drain(..bottom);
    Ok((ev, reference))
}

/// KS distance of the bulk of `y / f_norm` to its limiting law.
pub fn esd_compare(y: &DMatrix<f64>, f_norm: f64, setting: Setting, drop_top: usize, drop_bottom: usize) -> Result<f64, SimError> {
    let (ev, reference) = bulk_spectrum(y, f_norm, setting, drop_top, drop_bottom)?;
    Ok(esd_ks(&ev, &reference))
}

/// `w^{⊙ℓ} / ‖w^{⊙ℓ}‖`.
pub fn hadamard_power(w: &DVector<f64>, ell: usize) -> DVector<f64> {
    let mut h = w.map(|x| x.powi(ell as i32));
    h.normalize_mut();
    h
}

/// `(⟨ũ, û⟩², ⟨ṽ, v̂⟩²)` with `ũ = u^{⊙ℓ}/‖u^{⊙ℓ}‖` for a rank-one planted signal.
pub fn hadamard_alignment(signal: &Signal, left: &DVector<f64>, right: &DVector<f64>, ell: usize) -> Result<(f64, f64), SimError> {
    if signal.rank() != 1 {
        return Err(SimError::NotRankOne(signal.rank()));
    }
    if ell == 0 {
        return Err(SimError::InvalidConfig("Hadamard order must be at least 1".into()));
    }
    let u = hadamard_power(&signal.left.column(0).into_owned(), ell);
    let v = hadamard_power(&signal.right.column(0).into_owned(), ell);
    Ok((u.dot(left).powi(2), v.dot(right).powi(2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let sorted: Vec<f64> = (0..n).map(|i| 4.0 * (i as f64 + 0.5) / n as f64 - 2.0).collect();
        // uniform points against the semicircle are far; against themselves near zero
        assert!(esd_ks(&sorted, &Reference::Semicircle) > 0.05);
        let quantiles: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if semicircle_cdf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!(esd_ks(&quantiles, &Reference::Semicircle) <= 0.5 / n as f64 + 1e-9);
    }

    #[test]
    fn cosines_identity() {
        let planted = DMatrix::<f64>::identity(5, 2);
        let est = vec![DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.0]), DVector::from_column_slice(&[0.0, -1.0, 0.0, 0.0, 0.0])];
        assert_eq!(cosines(&planted, &est), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn hadamard_order_one_is_plain_cosine() {
        let s = Signal {
            left: DMatrix::from_column_slice(3, 1, &[0.6, 0.8, 0.0]),
            right: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            sigmas: vec![1.0],
        };
        let l = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let r = DVector::from_column_slice(&[1.0, 0.0]);
        let (a, b) = hadamard_alignment(&s, &l, &r, 1).unwrap();
        assert!((a - 0.64).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let (a2, _) = hadamard_alignment(&s, &l, &r, 2).unwrap();
        let expected = 0.64f64.powi(2) / (0.6f64.powi(4) + 0.8f64.powi(4));
        assert!((a2 - expected).abs() < 1e-14);
    }
}
