//! Extreme singular triples and eigenpairs of dense matrices.
//!
//! Large matrices go through Lanczos processes with full reorthogonalization,
//! grown until the Ritz residuals of the requested pairs fall below a relative
//! tolerance. Small matrices use nalgebra's dense decompositions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::SimError;

/// Below this dimension the dense decompositions are cheaper than Lanczos.
const DENSE_CUTOFF: usize = 64;
const RESIDUAL_TOL: f64 = 1e-11;
/// Fixed seed for Lanczos start and restart vectors, independent of the experiment RNG.
const START_SEED: u64 = 0x5eed_1a2c;

#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriple {
    pub value: f64,
    pub left: DVector<f64>,
    pub right: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
}

/// Flips `a` (and `b`) so the first coordinate of `a` above rounding level is positive.
fn fix_sign(a: &mut DVector<f64>, b: Option<&mut DVector<f64>>) {
    let scale = a.amax();
    if let Some(x) = a.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *x < 0.0 {
            a.neg_mut();
            if let Some(b) = b {
                b.neg_mut();
            }
        }
    }
}

/// Two passes of classical Gram–Schmidt against `basis`.
fn reorthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(w);
            w.axpy(-c, q, 1.0);
        }
    }
}

/// Unit vector orthogonal to `basis`, or `None` if the basis already spans the space.
fn fresh_direction(dim: usize, basis: &[DVector<f64>], rng: &mut ChaCha8Rng) -> Option<DVector<f64>> {
    if basis.len() >= dim {
        return None;
    }
    for _ in 0..8 {
        let mut w = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        reorthogonalize(&mut w, basis);
        let norm = w.norm();
        if norm > 1e-8 {
            return Some(w / norm);
        }
    }
    None
}

fn check_k(k: usize, limit: usize) -> Result<(), SimError> {
    if k == 0 || k > limit {
        return Err(SimError::TooManyComponents {
            requested: k,
            available: limit,
        });
    }
    Ok(())
}

fn combine(basis: &[DVector<f64>], coeffs: impl Iterator<Item = f64>) -> DVector<f64> {
    let mut out = DVector::zeros(basis[0].len());
    for (q, c) in basis.iter().zip(coeffs) {
        out.axpy(c, q, 1.0);
    }
    out
}

fn next_checkpoint(m: usize, limit: usize) -> usize {
    (m + m / 2).max(m + 10).min(limit)
}

/// Top `k` singular triples of `y`, descending, with the leading coordinate of
/// each left vector made positive.
pub fn svd_top(y: &DMatrix<f64>, k: usize) -> Result<Vec<SingularTriple>, SimError> {
    let (n, p) = y.shape();
    let limit = n.min(p);
    check_k(k, limit)?;
    if limit <= DENSE_CUTOFF {
        return Ok(svd_dense(y, k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut us: Vec<DVector<f64>> = Vec::new();
    let mut vs: Vec<DVector<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    // betas[j] couples v_{j+1} to u_j: the superdiagonal of the bidiagonal matrix.
    let mut betas: Vec<f64> = Vec::new();
    let mut v = fresh_direction(p, &[], &mut rng).expect("nonempty space");
    let mut scale: f64 = 0.0;
    let mut checkpoint = (2 * k + 24).min(limit);
    loop {
        let mut u = y * &v;
        if let (Some(prev), Some(&b)) = (us.last(), betas.last()) {
            u.axpy(-b, prev, 1.0);
        }
        reorthogonalize(&mut u, &us);
        let mut alpha = u.norm();
        scale = scale.max(alpha);
        if alpha <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            alpha = 0.0;
            u = fresh_direction(n, &us, &mut rng).expect("left space not exhausted before right");
        } else {
            u /= alpha;
        }
        vs.push(v);
        us.push(u);
        alphas.push(alpha);
        let m = alphas.len();

        let mut w = y.tr_mul(&us[m - 1]);
        w.axpy(-alpha, &vs[m - 1], 1.0);
        reorthogonalize(&mut w, &vs);
        let mut beta = w.norm();
        scale = scale.max(beta);
        let breakdown = beta <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        if breakdown {
            beta = 0.0;
        }
        if m >= checkpoint || m == limit || breakdown {
            let done = m == limit;
            if let Some(out) = bidiagonal_ritz(&us, &vs, &alphas, &betas, beta, scale, k, done) {
                return Ok(out);
            }
            checkpoint = next_checkpoint(m, limit);
        }
        if m == limit {
            return Err(SimError::NoConvergence { requested: k, steps: m });
        }
        if breakdown {
            w = fresh_direction(p, &vs, &mut rng).expect("right space not exhausted");
        } else {
            w /= beta;
        }
        betas.push(beta);
        v = w;
    }
}

#[allow(clippy::too_many_arguments)]
fn bidiagonal_ritz(
    us: &[DVector<f64>],
    vs: &[DVector<f64>],
    alphas: &[f64],
    betas: &[f64],
    beta_last: f64,
    scale: f64,
    k: usize,
    force: bool,
) -> Option<Vec<SingularTriple>> {
    let m = alphas.len();
    if m < k {
        return None;
    }
    let mut b = DMatrix::zeros(m, m);
    for j in 0..m {
        b[(j, j)] = alphas[j];
        if j + 1 < m {
            b[(j, j + 1)] = betas[j];
        }
    }
    let svd = b.svd(true, true);
    let (pm, qt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &c| svd.singular_values[c].partial_cmp(&svd.singular_values[a]).unwrap());
    let top = &order[..k];
    let tol = RESIDUAL_TOL * scale.max(svd.singular_values[order[0]]);
    if !force && top.iter().any(|&i| (beta_last * pm[(m - 1, i)]).abs() > tol) {
        return None;
    }
    Some(
        top.iter()
            .map(|&i| {
                let mut left = combine(us, pm.column(i).iter().copied());
                let mut right = combine(vs, qt.row(i).iter().copied());
                left.normalize_mut();
                right.normalize_mut();
                fix_sign(&mut left, Some(&mut right));
                SingularTriple {
                    value: svd.singular_values[i],
                    left,
                    right,
                }
            })
            .collect(),
    )
}

fn svd_dense(y: &DMatrix<f64>, k: usize) -> Vec<SingularTriple> {
    let svd = y.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let mut left = u.column(i).into_owned();
            let mut right = vt.row(i).transpose();
            fix_sign(&mut left, Some(&mut right));
            SingularTriple {
                value: svd.singular_values[i],
                left,
                right,
            }
        })
        .collect()
}

/// Largest singular value.
pub fn op_norm(y: &DMatrix<f64>) -> Result<f64, SimError> {
    Ok(svd_top(y, 1)?[0].value)
}

/// The `k_top` largest and `k_bottom` smallest eigenpairs of a symmetric matrix
/// (largest first, smallest first), with each vector's leading coordinate positive.
pub fn eig_sym(y: &DMatrix<f64>, k_top: usize, k_bottom: usize) -> Result<(Vec<EigenPair>, Vec<EigenPair>), SimError> {
    let n = y.nrows();
    if y.ncols() != n {
        return Err(SimError::NotSquare { rows: n, cols: y.ncols() });
    }
    check_k(k_top + k_bottom, n)?;
    if n <= DENSE_CUTOFF {
        let eig = SymmetricEigen::new(y.clone());
        let pairs: Vec<(f64, DVector<f64>)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect();
        return Ok(split_extremes(pairs, k_top, k_bottom));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut qs: Vec<DVector<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = fresh_direction(n, &[], &mut rng).expect("nonempty space");
    let mut scale: f64 = 0.0;
    let mut checkpoint = (2 * (k_top + k_bottom) + 24).min(n);
    loop {
        let mut w = y * &q;
        let a = q.dot(&w);
        qs.push(q);
        alphas.push(a);
        let m = qs.len();
        reorthogonalize(&mut w, &qs);
        let mut beta = w.norm();
        scale = scale.max(a.abs()).max(beta);
        let breakdown = beta <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        if breakdown {
            beta = 0.0;
        }
        if m >= checkpoint || m == n || breakdown {
            if let Some(out) = tridiagonal_ritz(&qs, &alphas, &betas, beta, scale, k_top, k_bottom, m == n) {
                return Ok(out);
            }
            checkpoint = next_checkpoint(m, n);
        }
        if m == n {
            return Err(SimError::NoConvergence {
                requested: k_top + k_bottom,
                steps: m,
            });
        }
        q = if breakdown {
            fresh_direction(n, &qs, &mut rng).expect("space not exhausted")
        } else {
            w / beta
        };
        betas.push(beta);
    }
}

#[allow(clippy::too_many_arguments)]
fn tridiagonal_ritz(
    qs: &[DVector<f64>],
    alphas: &[f64],
    betas: &[f64],
    beta_last: f64,
    scale: f64,
    k_top: usize,
    k_bottom: usize,
    force: bool,
) -> Option<(Vec<EigenPair>, Vec<EigenPair>)> {
    let m = alphas.len();
    if m < k_top + k_bottom {
        return None;
    }
    let mut t = DMatrix::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = alphas[j];
        if j + 1 < m {
            t[(j, j + 1)] = betas[j];
            t[(j + 1, j)] = betas[j];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let wanted: Vec<usize> = order[..k_top].iter().chain(order[m - k_bottom..].iter()).copied().collect();
    let tol = RESIDUAL_TOL * scale;
    if !force && wanted.iter().any(|&i| (beta_last * eig.eigenvectors[(m - 1, i)]).abs() > tol) {
        return None;
    }
    let pairs = wanted
        .iter()
        .map(|&i| {
            let mut v = combine(qs, eig.eigenvectors.column(i).iter().copied());
            v.normalize_mut();
            (eig.eigenvalues[i], v)
        })
        .collect();
    Some(split_extremes(pairs, k_top, k_bottom))
}

fn split_extremes(mut pairs: Vec<(f64, DVector<f64>)>, k_top: usize, k_bottom: usize) -> (Vec<EigenPair>, Vec<EigenPair>) {
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let to_pair = |(value, mut vector): (f64, DVector<f64>)| {
        fix_sign(&mut vector, None);
        EigenPair { value, vector }
    };
    let len = pairs.len();
    let bottom: Vec<EigenPair> = pairs[len - k_bottom..].iter().rev().cloned().map(to_pair).collect();
    let top: Vec<EigenPair> = pairs.into_iter().take(k_top).map(to_pair).collect();
    (top, bottom)
}

/// Eigenvalues of `YᵀY` (or `YYᵀ`, whichever is smaller), ascending.
pub fn gram_eigenvalues(y: &DMatrix<f64>) -> Vec<f64> {
    let gram = if y.ncols() <= y.nrows() { y.tr_mul(y) } else { y * y.transpose() };
    sym_eigenvalues(&gram)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(y: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = y.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt())
    }

    fn unit(dim: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize()
    }

    #[test]
    fn rank_one_recovered() {
        for (n, p) in [(300, 200), (20, 10)] {
            let (u, v) = (unit(n, 1), unit(p, 2));
            let y = &u * v.transpose() * 3.5;
            let t = svd_top(&y, 1).unwrap();
            assert!((t[0].value - 3.5).abs() < 1e-10);
            assert!((t[0].left.dot(&u).abs() - 1.0).abs() < 1e-10);
            assert!((t[0].right.dot(&v).abs() - 1.0).abs() < 1e-10);
            let two = svd_top(&y, 2).unwrap();
            assert!(two[1].value.abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let mut y = random(400, 250, 7);
        let (u, v) = (unit(400, 3), unit(250, 4));
        y += &u * v.transpose() * 2.5;
        let lanczos = svd_top(&y, 4).unwrap();
        let dense = svd_dense(&y, 4);
        for (a, b) in lanczos.iter().zip(&dense) {
            assert!((a.value - b.value).abs() < 1e-9 * b.value);
            assert!((a.left.dot(&b.left).abs() - 1.0).abs() < 1e-8);
            assert!((a.right.dot(&b.right).abs() - 1.0).abs() < 1e-8);
        }
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((lanczos[i].left.dot(&lanczos[j].left) - target).abs() < 1e-10);
                assert!((lanczos[i].right.dot(&lanczos[j].right) - target).abs() < 1e-10);
            }
            assert!(lanczos[i].left.iter().find(|x| x.abs() > 1e-12).unwrap() > &0.0);
        }
    }

    #[test]
    fn three_by_three_against_characteristic_cubic() {
        let y = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, 0.3, 1.5, -0.7, 1.1, 0.2, 0.9]);
        let g = y.transpose() * &y;
        // λ³ − tr λ² + c λ − det = 0 for the eigenvalues of YᵀY.
        let tr = g.trace();
        let c = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)] + g[(0, 0)] * g[(2, 2)] - g[(0, 2)] * g[(2, 0)]
            + g[(1, 1)] * g[(2, 2)] - g[(1, 2)] * g[(2, 1)];
        let det = g.determinant();
        for t in svd_top(&y, 3).unwrap() {
            let l = t.value * t.value;
            let residual = l * l * l - tr * l * l + c * l - det;
            assert!(residual.abs() < 1e-10 * (1.0 + tr.powi(3)));
        }
    }

    #[test]
    fn too_many_components() {
        let y = random(10, 5, 1);
        assert!(matches!(svd_top(&y, 6), Err(SimError::TooManyComponents { .. })));
        assert!(svd_top(&y, 0).is_err());
    }

    #[test]
    fn eig_sym_matches_dense() {
        let a = random(300, 300, 9);
        let mut s = (&a + a.transpose()) * 0.5;
        let u = unit(300, 5);
        s += &u * u.transpose() * 3.0;
        s -= &unit(300, 6) * unit(300, 6).transpose() * 2.5;
        let (top, bottom) = eig_sym(&s, 2, 1).unwrap();
        let all = sym_eigenvalues(&s);
        assert!((top[0].value - all[299]).abs() < 1e-9);
        assert!((top[1].value - all[298]).abs() < 1e-9);
        assert!((bottom[0].value - all[0]).abs() < 1e-9);
        let resid = &s * &top[0].vector - &top[0].vector * top[0].value;
        assert!(resid.norm() < 1e-8);
        assert!((top[0].vector.dot(&bottom[0].vector)).abs() < 1e-10);
        assert!(eig_sym(&random(4, 5, 1), 1, 0).is_err());
    }

    #[test]
    fn gram_eigenvalues_match_singular_values() {
        let y = random(120, 80, 11);
        let ev = gram_eigenvalues(&y);
        let top = svd_top(&y, 1).unwrap()[0].value;
        assert!((ev[79] - top * top).abs() < 1e-10);
        assert_eq!(gram_eigenvalues(&y.transpose()).len(), 80);
    }
}
