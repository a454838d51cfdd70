//! Numerical integration.
//!
//! Adaptive 21-point Gauss–Kronrod on finite intervals, with the real line and
//! half-lines reduced to `(0, 1]` through `z = a ± (1 - t) / t`. The rational
//! map keeps algebraically decaying integrands (Cauchy-type tails) finite after
//! the change of variables. Fixed Gauss rules (Legendre panels, Gauss rules
//! built from a three-term recurrence) are provided for discretizing measures.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::scalar::Real;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_489_380,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights, attached to XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadError {
    #[error("subdivision limit reached: estimate {value:e} with error {abs_error:e}")]
    MaxSubdivisions { value: f64, abs_error: f64 },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadConfig<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-10),
            rel_tol: T::lit(1e-8),
            max_intervals: 4000,
        }
    }
}

impl<T: Real> QuadConfig<T> {
    pub fn tight() -> Self {
        Self {
            abs_tol: T::lit(1e-14),
            rel_tol: T::lit(1e-13),
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: T,
    pub evaluations: usize,
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod21<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Result<(T, T), QuadError> {
    let center = (a + b) * T::half();
    let half = (b - a) * T::half();
    let mut eval = |x: T| -> Result<T, QuadError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { at: x.to_f64_lossy() })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * T::lit(WGK[10]);
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * T::lit(XGK[j]);
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod += T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Ok((value, error))
}

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadError::InvalidInterval {
            a: a.to_f64_lossy(),
            b: b.to_f64_lossy(),
        });
    }
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            abs_error: T::zero(),
            evaluations: 0,
        });
    }
    if b < a {
        let r = integrate(f, b, a, cfg)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }

    let (value, error) = kronrod21(&mut f, a, b)?;
    let mut panels = vec![Panel { a, b, value, error }];
    let mut evaluations = 21;
    let min_width = (b - a) * T::epsilon() * T::lit(64.0);

    loop {
        let total: T = panels.iter().fold(T::zero(), |s, p| s + p.value);
        let err: T = panels.iter().fold(T::zero(), |s, p| s + p.error);
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(QuadResult {
                value: total,
                abs_error: err,
                evaluations,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -T::one()), |(bi, be), (i, p)| {
                if p.error > be {
                    (i, p.error)
                } else {
                    (bi, be)
                }
            });
        let p = &panels[worst];
        if panels.len() >= cfg.max_intervals || (p.b - p.a) < min_width {
            return Err(QuadError::MaxSubdivisions {
                value: total.to_f64_lossy(),
                abs_error: err.to_f64_lossy(),
            });
        }
        let mid = (p.a + p.b) * T::half();
        let (pa, pb) = (p.a, p.b);
        let (v1, e1) = kronrod21(&mut f, pa, mid)?;
        let (v2, e2) = kronrod21(&mut f, mid, pb)?;
        evaluations += 42;
        panels[worst] = Panel {
            a: pa,
            b: mid,
            value: v1,
            error: e1,
        };
        panels.push(Panel {
            a: mid,
            b: pb,
            value: v2,
            error: e2,
        });
    }
}

/// Integrates over `[a, b]` split at the interior `points` (discontinuities, kinks).
pub fn integrate_with_breaks<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    points: &[T],
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError> {
    let mut cuts: Vec<T> = points.iter().copied().filter(|&p| p > a && p < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);
    let mut acc = QuadResult {
        value: T::zero(),
        abs_error: T::zero(),
        evaluations: 0,
    };
    for w in edges.windows(2) {
        let r = integrate(&mut f, w[0], w[1], cfg)?;
        acc.value += r.value;
        acc.abs_error += r.abs_error;
        acc.evaluations += r.evaluations;
    }
    Ok(acc)
}

/// Integrates over `[a, +inf)` through `z = a + (1 - t) / t`.
pub fn integrate_upper<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError> {
    integrate(
        |t: T| {
            let s = (T::one() - t) / t;
            let v = f(a + s);
            if v == T::zero() {
                v
            } else {
                v / (t * t)
            }
        },
        T::zero(),
        T::one(),
        cfg,
    )
}

/// Integrates over `(-inf, b]` through `z = b - (1 - t) / t`.
pub fn integrate_lower<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    b: T,
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError> {
    integrate_upper(|z: T| f(b + b - z), b, cfg)
}

/// Integrates over the whole real line, splitting at `points` (at least at 0).
pub fn integrate_real_line<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    points: &[T],
    cfg: &QuadConfig<T>,
) -> Result<QuadResult<T>, QuadError> {
    let mut cuts: Vec<T> = points.iter().copied().filter(|p| p.is_finite()).collect();
    if cuts.is_empty() {
        cuts.push(T::zero());
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    cuts.dedup();
    let lo = cuts[0];
    let hi = cuts[cuts.len() - 1];
    let left = integrate_lower(&mut f, lo, cfg)?;
    let mid = integrate_with_breaks(&mut f, lo, hi, &cuts, cfg)?;
    let right = integrate_upper(&mut f, hi, cfg)?;
    Ok(QuadResult {
        value: left.value + mid.value + right.value,
        abs_error: left.abs_error + mid.abs_error + right.abs_error,
        evaluations: left.evaluations + mid.evaluations + right.evaluations,
    })
}

/// A fixed quadrature rule `sum_i w_i g(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn apply<F: FnMut(T) -> T>(&self, mut g: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |s, (&x, &w)| s + w * g(x))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre<T: Real>(n: usize) -> GaussRule<T> {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::from_usize(n).unwrap();
    for i in 0..(n + 1) / 2 {
        let fi = T::from_usize(i).unwrap();
        // Tricomi initial guess.
        let mut x = (T::PI() * (fi + T::lit(0.75)) / (nf + T::half())).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= T::epsilon() * T::lit(4.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = T::two() / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 2..=n {
        let kf = T::from_usize(k).unwrap();
        let p2 = ((T::two() * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize(n).unwrap();
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Composite Gauss–Legendre rule over consecutive `edges`, `points_per_panel` nodes each.
pub fn composite_legendre(edges: &[f64], points_per_panel: usize) -> GaussRule<f64> {
    let base = gauss_legendre::<f64>(points_per_panel);
    let mut nodes = Vec::with_capacity(edges.len().saturating_sub(1) * points_per_panel);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        for (x, wt) in base.nodes.iter().zip(&base.weights) {
            nodes.push(c + h * x);
            weights.push(h * wt);
        }
    }
    GaussRule { nodes, weights }
}

/// Gauss rule with `n` nodes for the probability measure whose orthonormal
/// polynomials satisfy `sqrt(beta[k+1]) q_{k+1} = (z - alpha[k]) q_k - sqrt(beta[k]) q_{k-1}`.
///
/// Nodes come from the Jacobi matrix eigenvalues (Golub–Welsch); weights are
/// recomputed from the Christoffel function `1 / sum_k q_k(x)^2`, which stays
/// accurate for nodes far in the tails.
pub fn gauss_rule_from_recurrence(alpha: &[f64], beta: &[f64], n: usize) -> GaussRule<f64> {
    assert!(n >= 1 && alpha.len() >= n && beta.len() >= n);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < n {
            let off = beta[k + 1].sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mass = beta[0];
    let weights = nodes
        .iter()
        .map(|&x| {
            let mut prev = 0.0;
            let mut cur = 1.0 / mass.sqrt();
            let mut sum = cur * cur;
            for k in 0..n - 1 {
                let next = ((x - alpha[k]) * cur - beta[k].sqrt() * prev) / beta[k + 1].sqrt();
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    GaussRule { nodes, weights }
}

/// Probabilists' Gauss–Hermite rule: `sum_i w_i g(x_i) ~ E[g(N(0, 1))]`.
pub fn gauss_hermite(n: usize) -> GaussRule<f64> {
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n).map(|k| if k == 0 { 1.0 } else { k as f64 }).collect();
    gauss_rule_from_recurrence(&alpha, &beta, n)
}
