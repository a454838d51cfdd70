//! Orthonormal polynomials of a noise law and the effective-SNR constants.
//!
//! The basis is stored as three-term recurrence coefficients,
//! `√β_{k+1} q_{k+1}(z) = (z − α_k) q_k(z) − √β_k q_{k−1}(z)`, with `β_0` the
//! total mass. Coefficients come from the discretized Stieltjes procedure on a
//! composite Gauss–Legendre discretization of μ (Gaussian laws use the closed-form
//! Hermite recurrence). From the basis we get
//!
//! * `a_k = ⟨f, q_k⟩_μ` (expansion of the transform),
//! * `b_{kℓ} = ⟨q_k^{(ℓ)}, 1⟩_μ` (derivative moments),
//! * `τ_ℓ = ‖f‖_μ⁻¹ Σ_{k≥ℓ} a_k b_{kℓ}`, with `τ = τ_1`,
//! * `ℓ*`, the first order with `τ_ℓ ≠ 0`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::measures::{MeasureError, NoiseMeasure};
use crate::quad::{self, GaussRule, QuadConfig, QuadError};
use crate::scalar::Real;
use crate::transforms::Transform;

pub const DEFAULT_DEGREE: usize = 24;
pub const DEFAULT_MAX_ELL: usize = 4;
/// Hard cap on basis degree; the Stieltjes discretization is validated well past 60.
pub const MAX_DEGREE: usize = 160;

const PANEL_POINTS: usize = 20;
/// Log-density drop (≈ e⁻⁹²) at which the discretization stops walking into the tails.
const TAIL_LOG_DROP: f64 = 92.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OrthoError {
    #[error("no orthogonal basis: infinite moments for measure `{0}`")]
    InfiniteMoments(String),
    #[error("basis degree must be in 1..={MAX_DEGREE}, got {0}")]
    BadDegree(usize),
    #[error("numerical breakdown building degree {failed} (beta = {beta:e}); max stable degree is {max_stable}")]
    Breakdown { failed: usize, beta: f64, max_stable: usize },
    #[error("polynomial index {k} exceeds basis degree {degree}")]
    OutOfRange { k: usize, degree: usize },
    #[error("derivative order must be at least 1")]
    ZeroOrder,
    #[error("quadrature failed (coefficient {k:?}): {source}")]
    Quadrature { k: Option<usize>, source: QuadError },
    #[error("derivative-moment cross-check diverged at k = {k}, ell = {ell}: recurrence {recurrence:e} vs projection {projection:e}")]
    CrossCheck {
        k: usize,
        ell: usize,
        recurrence: f64,
        projection: f64,
    },
    #[error("transform is not centered under the measure (a_0 = {0:e}); center it or enable auto-centering")]
    NotCentered(f64),
    #[error("transform has zero norm under the measure")]
    ZeroNorm,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Generic evaluation of orthonormal polynomials and their derivatives from
/// recurrence coefficients.
pub mod recurrence {
    use crate::scalar::Real;

    /// Table `t[j][k] = q_k^{(j)}(z)` for `j ≤ max_ell`, `k ≤ max_k`.
    ///
    /// Uses the differentiated recurrence
    /// `√β_{k+1} q_{k+1}^{(ℓ)} = ℓ q_k^{(ℓ−1)} + (z − α_k) q_k^{(ℓ)} − √β_k q_{k−1}^{(ℓ)}`.
    pub fn derivative_table<T: Real>(alpha: &[T], beta: &[T], z: T, max_k: usize, max_ell: usize) -> Vec<Vec<T>> {
        let mut table = vec![vec![T::zero(); max_k + 1]; max_ell + 1];
        fill_derivative_table(alpha, beta, z, max_k, &mut table);
        table
    }

    /// As [`derivative_table`] but writes into a preallocated table (rows = orders).
    pub fn fill_derivative_table<T: Real>(alpha: &[T], beta: &[T], z: T, max_k: usize, table: &mut [Vec<T>]) {
        assert!(alpha.len() >= max_k && beta.len() > max_k);
        let sq: Vec<T> = beta[..=max_k].iter().map(|b| b.sqrt()).collect();
        for ell in 0..table.len() {
            let (lower, upper) = table.split_at_mut(ell);
            let row = &mut upper[0];
            let prev_row = lower.last();
            row[0] = if ell == 0 { T::one() / sq[0] } else { T::zero() };
            let lf = T::from_usize(ell).unwrap();
            for k in 0..max_k {
                let mut next = (z - alpha[k]) * row[k];
                if k > 0 {
                    next -= sq[k] * row[k - 1];
                }
                if let Some(p) = prev_row {
                    next += lf * p[k];
                }
                row[k + 1] = next / sq[k + 1];
            }
        }
    }

    /// `q_k^{(ℓ)}(z)`.
    pub fn eval<T: Real>(alpha: &[T], beta: &[T], k: usize, z: T, ell: usize) -> T {
        if ell > k {
            return T::zero();
        }
        derivative_table(alpha, beta, z, k, ell)[ell][k]
    }

    /// Values `q_0(z), …, q_max_k(z)`.
    pub fn values<T: Real>(alpha: &[T], beta: &[T], z: T, max_k: usize, out: &mut [T]) {
        out[0] = T::one() / beta[0].sqrt();
        if max_k == 0 {
            return;
        }
        let mut prev = T::zero();
        for k in 0..max_k {
            let mut next = (z - alpha[k]) * out[k];
            if k > 0 {
                next -= beta[k].sqrt() * prev;
            }
            prev = out[k];
            out[k + 1] = next / beta[k + 1].sqrt();
        }
    }
}

/// Fixed-rule discretization of μ: `∫ g dμ ≈ Σ_i w_i g(x_i)` (weights include the density).
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Discretization {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(0.0, |s, (&x, &w)| if w == 0.0 { s } else { s + w * g(x) })
    }
}

fn tail_edge(measure: &NoiseMeasure, poly_degree: usize, direction: f64) -> f64 {
    let c = measure.center();
    let s = measure.variance().sqrt().max(measure.feature_scale());
    let h = measure.feature_scale() / 4.0;
    let d = poly_degree as f64;
    let g = |z: f64| measure.log_density(z) + d * (1.0 + (z - c).abs() / s).ln();
    let mut top = g(c);
    let mut z = c;
    for _ in 0..200_000 {
        z += direction * h;
        let v = g(z);
        top = top.max(v);
        if v < top - TAIL_LOG_DROP && (z - c).abs() > 2.0 * s {
            return z;
        }
    }
    z
}

/// Composite Gauss–Legendre discretization of `measure`, accurate for
/// integrands of the form polynomial(degree ≤ `poly_degree`) × piecewise-smooth,
/// with panel edges placed at `breaks`.
pub fn discretize(measure: &NoiseMeasure, poly_degree: usize, breaks: &[f64]) -> Result<Discretization, OrthoError> {
    if !measure.has_finite_moments() {
        return Err(OrthoError::InfiniteMoments(measure.label()));
    }
    let (slo, shi) = measure.support();
    let (lo, hi) = if slo.is_finite() && shi.is_finite() {
        (slo, shi)
    } else {
        (tail_edge(measure, poly_degree, -1.0), tail_edge(measure, poly_degree, 1.0))
    };
    let width = if slo.is_finite() {
        (hi - lo) / 16.0
    } else {
        measure.feature_scale() / 2.0
    };
    let panels = (((hi - lo) / width).ceil() as usize).clamp(8, 8000);
    let mut edges: Vec<f64> = (0..=panels)
        .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
        .collect();
    edges.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    edges.extend(measure.singular_points().into_iter().filter(|b| *b > lo && *b < hi));
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    let GaussRule { nodes, weights } = quad::composite_legendre(&edges, PANEL_POINTS);
    let weights = nodes
        .iter()
        .zip(weights)
        .map(|(&x, w)| w * measure.density(x))
        .collect();
    Ok(Discretization { nodes, weights })
}

/// Discretized Stieltjes procedure: recurrence coefficients `α_0..=α_K`, `β_0..=β_K`.
pub fn stieltjes(disc: &Discretization, degree: usize, variance: f64) -> Result<(Vec<f64>, Vec<f64>), OrthoError> {
    let n = disc.nodes.len();
    let mass: f64 = disc.weights.iter().sum();
    let mut alpha = Vec::with_capacity(degree + 1);
    let mut beta = Vec::with_capacity(degree + 1);
    beta.push(mass);
    let mut prev = vec![0.0; n];
    let mut cur = vec![1.0 / mass.sqrt(); n];
    let floor = 1e-12 * variance.max(f64::MIN_POSITIVE);
    for k in 0..=degree {
        let a: f64 = (0..n).map(|i| disc.weights[i] * disc.nodes[i] * cur[i] * cur[i]).sum();
        alpha.push(a);
        if k == degree {
            break;
        }
        let sb = beta[k].sqrt();
        let mut next: Vec<f64> = (0..n)
            .map(|i| (disc.nodes[i] - a) * cur[i] - if k > 0 { sb * prev[i] } else { 0.0 })
            .collect();
        let b: f64 = (0..n).map(|i| disc.weights[i] * next[i] * next[i]).sum();
        if !(b.is_finite() && b > floor) || k + 1 >= n {
            return Err(OrthoError::Breakdown {
                failed: k + 1,
                beta: b,
                max_stable: k,
            });
        }
        let sbn = b.sqrt();
        next.iter_mut().for_each(|v| *v /= sbn);
        beta.push(b);
        prev = std::mem::replace(&mut cur, next);
    }
    Ok((alpha, beta))
}

/// Orthonormal polynomial system `{q_k}_{k ≤ K}` of a noise law.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    measure: NoiseMeasure,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    disc: Arc<Discretization>,
}

/// Builds the orthonormal basis of `measure` up to degree `degree`.
pub fn build_basis(measure: &NoiseMeasure, degree: usize) -> Result<OrthoBasis, OrthoError> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(OrthoError::BadDegree(degree));
    }
    if !measure.has_finite_moments() {
        return Err(OrthoError::InfiniteMoments(measure.label()));
    }
    let disc = discretize(measure, 2 * degree + 2, &[])?;
    let (alpha, beta) = match measure.gaussian_params() {
        Some((mean, std)) => hermite_recurrence(mean, std, degree),
        None => stieltjes(&disc, degree, measure.variance())?,
    };
    Ok(OrthoBasis {
        measure: measure.clone(),
        alpha,
        beta,
        disc: Arc::new(disc),
    })
}

/// Closed-form recurrence of the orthonormal Hermite polynomials of `N(mean, std²)`.
pub fn hermite_recurrence(mean: f64, std: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let alpha = vec![mean; degree + 1];
    let beta = (0..=degree)
        .map(|k| if k == 0 { 1.0 } else { k as f64 * std * std })
        .collect();
    (alpha, beta)
}

impl OrthoBasis {
    pub fn measure(&self) -> &NoiseMeasure {
        &self.measure
    }

    pub fn degree(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    /// `q_k^{(ℓ)}(z)`.
    pub fn eval_q(&self, k: usize, z: f64, ell: usize) -> Result<f64, OrthoError> {
        if k > self.degree() {
            return Err(OrthoError::OutOfRange { k, degree: self.degree() });
        }
        Ok(recurrence::eval(&self.alpha, &self.beta, k, z, ell))
    }

    /// `q_0(z), …, q_K(z)`.
    pub fn values(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.degree() + 1];
        recurrence::values(&self.alpha, &self.beta, z, self.degree(), &mut out);
        out
    }

    /// Series `Σ_k c_k q_k(z)` for `c.len() ≤ K + 1`.
    pub fn eval_series(&self, coeffs: &[f64], z: f64) -> f64 {
        if coeffs.is_empty() {
            return 0.0;
        }
        let top = coeffs.len() - 1;
        let mut prev = 0.0;
        let mut cur = 1.0 / self.beta[0].sqrt();
        let mut acc = coeffs[0] * cur;
        for k in 0..top {
            let mut next = (z - self.alpha[k]) * cur;
            if k > 0 {
                next -= self.beta[k].sqrt() * prev;
            }
            next /= self.beta[k + 1].sqrt();
            prev = cur;
            cur = next;
            acc += coeffs[k + 1] * cur;
        }
        acc
    }

    /// Gram matrix `∫ q_j q_k dμ` on an independent, finer discretization.
    pub fn gram(&self) -> Result<Vec<Vec<f64>>, OrthoError> {
        let k = self.degree();
        let disc = discretize(&self.measure, 2 * k + 12, &[0.0])?;
        let mut gram = vec![vec![0.0; k + 1]; k + 1];
        let mut q = vec![0.0; k + 1];
        for (&x, &w) in disc.nodes.iter().zip(&disc.weights) {
            if w == 0.0 {
                continue;
            }
            recurrence::values(&self.alpha, &self.beta, x, k, &mut q);
            for i in 0..=k {
                let wi = w * q[i];
                for j in i..=k {
                    gram[i][j] += wi * q[j];
                }
            }
        }
        for i in 0..=k {
            for j in 0..i {
                gram[i][j] = gram[j][i];
            }
        }
        Ok(gram)
    }

    /// Gauss quadrature rule of μ itself with `n ≤ K` nodes.
    pub fn gauss_rule(&self, n: usize) -> GaussRule<f64> {
        quad::gauss_rule_from_recurrence(&self.alpha, &self.beta, n.min(self.degree()))
    }

    /// Recurrence coefficients converted to another scalar type.
    pub fn recurrence_as<T: Real>(&self) -> (Vec<T>, Vec<T>) {
        (
            self.alpha.iter().map(|&a| T::lit(a)).collect(),
            self.beta.iter().map(|&b| T::lit(b)).collect(),
        )
    }
}

/// Expansion of a transform in the orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesCoeffs {
    /// `a_k = ⟨f, q_k⟩_μ` for `k = 0..=K`.
    pub a: Vec<f64>,
    pub f_norm: f64,
    #[serde(rename = "K")]
    pub degree: usize,
    /// `‖f‖² − Σ_{k≤K} a_k²`.
    pub tail_bound: f64,
}

impl SeriesCoeffs {
    pub fn a0(&self) -> f64 {
        self.a[0]
    }

    /// `‖f − a_0‖_μ`.
    pub fn centered_norm(&self) -> f64 {
        (self.f_norm * self.f_norm - self.a[0] * self.a[0]).max(0.0).sqrt()
    }
}

fn norm_config() -> QuadConfig<f64> {
    QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 8000,
    }
}

/// Expansion coefficients `a_k` and the norm `‖f‖_μ`.
pub fn coeffs(f: &Transform, basis: &OrthoBasis) -> Result<SeriesCoeffs, OrthoError> {
    let degree = basis.degree();
    let breaks = f.breakpoints();
    let disc = discretize(basis.measure(), 2 * degree + 4 + 2 * f.growth_degree(), &breaks)?;
    let mut a = vec![0.0; degree + 1];
    let mut q = vec![0.0; degree + 1];
    for (&x, &w) in disc.nodes.iter().zip(&disc.weights) {
        if w == 0.0 {
            continue;
        }
        let fx = f.eval(x);
        recurrence::values(basis.alpha(), basis.beta(), x, degree, &mut q);
        for k in 0..=degree {
            a[k] += w * fx * q[k];
        }
    }
    if let Some(k) = a.iter().position(|v| !v.is_finite()) {
        return Err(OrthoError::Quadrature {
            k: Some(k),
            source: QuadError::NonFinite { at: f64::NAN },
        });
    }
    let norm_sq = basis
        .measure()
        .expect(|z| f.eval(z).powi(2), &breaks, &norm_config())
        .map_err(|source| OrthoError::Quadrature { k: None, source })?;
    let captured: f64 = a.iter().map(|v| v * v).sum();
    Ok(SeriesCoeffs {
        a,
        f_norm: norm_sq.sqrt(),
        degree,
        tail_bound: norm_sq - captured,
    })
}

/// Derivative moments together with the integration-by-parts cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMoments {
    pub ell: usize,
    /// `b_{kℓ}` for `k = 0..=K` (zero for `k < ℓ`).
    pub values: Vec<f64>,
    /// Largest scaled gap to `(−1)^ℓ ∫ q_k ω^{(ℓ)}`, when the density derivative is known.
    pub projection_deviation: Option<f64>,
}

/// `b_{kℓ} = ∫ q_k^{(ℓ)} dμ` for `k ≤ max_k`, cross-checked against the projection
/// `(−1)^ℓ ∫ q_k ω^{(ℓ)}` where the density derivative is available.
pub fn derivative_moments(basis: &OrthoBasis, ell: usize, max_k: usize) -> Result<DerivativeMoments, OrthoError> {
    if ell == 0 {
        return Err(OrthoError::ZeroOrder);
    }
    if max_k > basis.degree() {
        return Err(OrthoError::OutOfRange {
            k: max_k,
            degree: basis.degree(),
        });
    }
    let measure = basis.measure();
    let disc = basis.discretization();
    let mut values = vec![0.0; max_k + 1];
    let mut projection = vec![0.0; max_k + 1];
    let check = measure.density_derivative_ratio(measure.center(), ell).is_some();
    let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
    let mut table = vec![vec![0.0; max_k + 1]; ell + 1];
    for (&x, &w) in disc.nodes.iter().zip(&disc.weights) {
        if w == 0.0 {
            continue;
        }
        recurrence::fill_derivative_table(basis.alpha(), basis.beta(), x, max_k, &mut table);
        for k in ell..=max_k {
            values[k] += w * table[ell][k];
        }
        if check {
            let ratio = measure.density_derivative_ratio(x, ell).unwrap_or(0.0);
            for k in 0..=max_k {
                projection[k] += w * sign * table[0][k] * ratio;
            }
        }
    }
    let mut deviation = None;
    if check {
        let mut worst: f64 = 0.0;
        for k in 0..=max_k {
            let gap = (values[k] - projection[k]).abs() / values[k].abs().max(1.0);
            if gap > 1e-4 {
                return Err(OrthoError::CrossCheck {
                    k,
                    ell,
                    recurrence: values[k],
                    projection: projection[k],
                });
            }
            worst = worst.max(gap);
        }
        deviation = Some(worst);
    }
    Ok(DerivativeMoments {
        ell,
        values,
        projection_deviation: deviation,
    })
}

/// `b_{kℓ}` for `k = 0..=max_k`.
pub fn b_coeffs(basis: &OrthoBasis, ell: usize, max_k: usize) -> Result<Vec<f64>, OrthoError> {
    derivative_moments(basis, ell, max_k).map(|d| d.values)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TauOptions {
    /// Subtract `a_0 = E f(z)` instead of rejecting an uncentered transform.
    pub auto_center: bool,
}

/// Effective signal-to-noise constants of a transform under a noise law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauReport {
    pub tau: f64,
    /// `τ_ℓ` for `ℓ = 1..=L`.
    pub tau_ell: Vec<f64>,
    /// First `ℓ` with `τ_ℓ ≠ 0`; `null` if none up to `L`.
    pub ell_star: Option<usize>,
    #[serde(rename = "K")]
    pub degree: usize,
    pub tail_bound: f64,
    pub f_norm: f64,
    pub a0: f64,
    pub warnings: Vec<String>,
}

impl TauReport {
    pub fn tau_at(&self, ell: usize) -> Option<f64> {
        ell.checked_sub(1).and_then(|i| self.tau_ell.get(i)).copied()
    }
}

const CENTER_TOL: f64 = 1e-8;
const ZERO_TOL: f64 = 1e-8;

/// `τ_ℓ(f, μ)` for `ℓ = 1..=max_ell` using the basis degree as truncation order.
pub fn tau(f: &Transform, basis: &OrthoBasis, max_ell: usize, opts: TauOptions) -> Result<TauReport, OrthoError> {
    let degree = basis.degree();
    let max_ell = max_ell.clamp(1, degree);
    let mut series = coeffs(f, basis)?;
    let a0 = series.a[0];
    let mut warnings = Vec::new();
    if a0.abs() > CENTER_TOL * series.f_norm.max(1.0) {
        if !opts.auto_center {
            return Err(OrthoError::NotCentered(a0));
        }
        warnings.push(format!("auto-centered: subtracted a_0 = {a0:e}"));
        series.f_norm = series.centered_norm();
        series.a[0] = 0.0;
    }
    let norm = series.f_norm;
    if !(norm > 0.0) {
        return Err(OrthoError::ZeroNorm);
    }
    let mut tau_ell = Vec::with_capacity(max_ell);
    let mut ell_star = None;
    for ell in 1..=max_ell {
        let b = b_coeffs(basis, ell, degree)?;
        let sum: f64 = (ell..=degree).map(|k| series.a[k] * b[k]).sum();
        let mass: f64 = (ell..=degree).map(|k| (series.a[k] * b[k]).abs()).sum();
        let t = sum / norm;
        if t.abs() <= ZERO_TOL * (mass + 1.0) {
            tau_ell.push(0.0);
        } else {
            tau_ell.push(t);
            ell_star.get_or_insert(ell);
        }
    }
    if series.tail_bound > 1e-3 * norm * norm {
        warnings.push(format!(
            "series not converged at K = {degree}: tail {:.3e} exceeds 1e-3 of the squared norm",
            series.tail_bound
        ));
    }
    if matches!(ell_star, Some(l) if l > 1) && !(f.is_polynomial() || basis.measure().is_gaussian()) {
        warnings.push("vanishing of lower-order sums verified only up to K; not guaranteed for non-polynomial f".into());
    }
    if ell_star.is_none() {
        warnings.push(format!("no nonzero tau_ell detected up to L = {max_ell}"));
    }
    Ok(TauReport {
        tau: tau_ell[0],
        tau_ell,
        ell_star,
        degree,
        tail_bound: series.tail_bound,
        f_norm: norm,
        a0,
        warnings,
    })
}

/// Builds the basis of degree `degree` for `measure` and evaluates [`tau`].
pub fn tau_for(
    f: &Transform,
    measure: &NoiseMeasure,
    degree: usize,
    max_ell: usize,
    opts: TauOptions,
) -> Result<TauReport, OrthoError> {
    let basis = build_basis(measure, degree)?;
    tau(f, &basis, max_ell, opts)
}

/// `τ(f, μ) = −⟨f − E f, ω'/ω⟩_μ / ‖f − E f‖_μ`: the limit of the series after
/// integrating by parts, available whenever μ has a score.
pub fn tau_via_score(f: &Transform, measure: &NoiseMeasure) -> Result<f64, OrthoError> {
    if !measure.has_score() {
        return Err(MeasureError::NoScore(measure.label()).into());
    }
    let breaks = f.breakpoints();
    let cfg = norm_config();
    let quad_err = |source| OrthoError::Quadrature { k: None, source };
    let mean = measure.expect(|z| f.eval(z), &breaks, &cfg).map_err(quad_err)?;
    let second = measure.expect(|z| f.eval(z).powi(2), &breaks, &cfg).map_err(quad_err)?;
    let cross = measure
        .expect(|z| (f.eval(z) - mean) * measure.score(z).unwrap_or(0.0), &breaks, &cfg)
        .map_err(quad_err)?;
    let norm = (second - mean * mean).max(0.0).sqrt();
    if !(norm > 0.0) {
        return Err(OrthoError::ZeroNorm);
    }
    Ok(-cross / norm)
}

/// `f_K*(z) = Σ_{k=1}^K b_k q_k(z)`, the τ-maximizing polynomial of degree K.
pub fn optimal_series_preprocessor(measure: &NoiseMeasure, degree: usize) -> Result<Transform, OrthoError> {
    let basis = Arc::new(build_basis(measure, degree)?);
    let mut b = b_coeffs(&basis, 1, degree)?;
    b[0] = 0.0;
    Ok(Transform::series(format!("optimal_series(K={degree})"), b, basis).centered_under(measure))
}
