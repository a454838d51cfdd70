//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion.
//!
//! Runs every criterion by default; pass criterion numbers to run a subset
//! (`cargo test --test acceptance -- 5 8`). The process exits nonzero on a failure
//! only when `SPIKETRANS_ACCEPTANCE_STRICT=1`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex;

use spiketrans_cli::{figure_spec, prepare_transform, run_experiment, ExperimentResult};
use spiketrans_core::orthopoly::{build_basis, tau_for, tau_via_score, DEFAULT_DEGREE, DEFAULT_MAX_ELL};
use spiketrans_core::rmt::{mp_bulk_edge, mp_bulk_lower, mp_cos_sq, mp_density, mp_stieltjes, tau_tilde};
use spiketrans_core::transforms::optimize_truncation;
use spiketrans_core::{fisher_information, BinomialLink, NoiseMeasure, TauOptions, Transform, TransformSpec};
use spiketrans_sim::{monte_carlo, run_once, Model, RunOptions, SpikeConfig, VectorScheme};

mod tol {
    //! Tolerances. Analytic ones come from the criteria; finite-n Monte Carlo ones
    //! are the criteria's pilot-calibrated levels at n = 2000.

    /// Closed-form τ against quadrature.
    pub const TAU_CLOSED_FORM: f64 = 1e-6;
    pub const TAU_IDENTITY: f64 = 1e-10;
    pub const C_STAR: (f64, f64) = (2.027, 2.029);
    pub const FISHER: (f64, f64) = (2.900, 2.904);
    pub const TAU_SCORE: f64 = 1e-4;
    pub const GRAM: f64 = 1e-7;
    pub const HERMITE_DERIVATIVE: f64 = 1e-10;
    /// Monte Carlo mean cosine against the limit.
    pub const COSINE: f64 = 0.05;
    /// Monte Carlo mean cosine below the transition.
    pub const SUBCRITICAL: f64 = 0.05;
    pub const KS: f64 = 0.03;
    pub const HADAMARD: f64 = 0.07;
    pub const SHRINKAGE: f64 = 0.02;
    pub const STIELTJES: f64 = 1e-3;
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn quiet() -> impl FnMut(&str) {
    |_: &str| {}
}

/// Composite Simpson rule with `2m` panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Density of `½ N(1, ¼) + ½ N(−1, ¼)` and its derivative, written out directly.
fn bimodal_density(z: f64) -> (f64, f64) {
    let (a, b) = (2.0 * (z - 1.0), 2.0 * (z + 1.0));
    let w = phi(a) + phi(b);
    let dw = -2.0 * (a * phi(a) + b * phi(b));
    (w, dw)
}

fn c1() -> Outcome {
    let start = Instant::now();
    let pi = std::f64::consts::PI;
    let closed = (pi / (2.0 * (pi - 1.0))).sqrt();
    let g = NoiseMeasure::gaussian();
    let relu = tau_for(&Transform::relu_centered(), &g, DEFAULT_DEGREE, DEFAULT_MAX_ELL, TauOptions::default()).unwrap();
    let ident = tau_for(&Transform::identity(), &g, DEFAULT_DEGREE, DEFAULT_MAX_ELL, TauOptions::default()).unwrap();
    let elapsed = start.elapsed();
    // Oracle: a_1 / ‖f‖ by Simpson, split at the kink.
    let f = |z: f64| z.max(0.0) - 1.0 / (2.0 * pi).sqrt();
    let a1 = simpson(|z| z * f(z) * phi(z), -12.0, 0.0, 20_000) + simpson(|z| z * f(z) * phi(z), 0.0, 12.0, 20_000);
    let norm2 = simpson(|z| f(z).powi(2) * phi(z), -12.0, 0.0, 20_000) + simpson(|z| f(z).powi(2) * phi(z), 0.0, 12.0, 20_000);
    let quad = a1 / norm2.sqrt();
    let pass = (relu.tau - closed).abs() < tol::TAU_CLOSED_FORM
        && (quad - closed).abs() < tol::TAU_CLOSED_FORM
        && (ident.tau - 1.0).abs() < tol::TAU_IDENTITY
        && elapsed < Duration::from_secs(1);
    Outcome::new(
        pass,
        format!(
            "tau(relu)={:.9} quadrature={:.9} closed={:.9}; tau(identity)-1={:.1e}; {:.3}s",
            relu.tau,
            quad,
            closed,
            ident.tau - 1.0,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2() -> Outcome {
    let start = Instant::now();
    let r = optimize_truncation(&NoiseMeasure::cauchy(), 0.1, 20.0).unwrap();
    let elapsed = start.elapsed();
    let c = r.c_star.unwrap_or(f64::NAN);
    let pass = (tol::C_STAR.0..=tol::C_STAR.1).contains(&c) && elapsed < Duration::from_secs(5);
    Outcome::new(pass, format!("c*={c:.6} tau(c*)={:.6}; {:.3}s", r.tau_c, elapsed.as_secs_f64()))
}

fn c3() -> Outcome {
    let start = Instant::now();
    let m = NoiseMeasure::bimodal();
    let info = fisher_information(&m).unwrap();
    let score = Transform::score_transform(&m).unwrap();
    let tau = tau_via_score(&score, &m).unwrap().abs();
    let elapsed = start.elapsed();
    let series = tau_for(&score, &m, 64, 1, TauOptions { auto_center: true }).map(|r| r.tau.abs());
    let oracle = simpson(
        |z| {
            let (w, dw) = bimodal_density(z);
            if w > 0.0 {
                dw * dw / w
            } else {
                0.0
            }
        },
        -9.0,
        9.0,
        40_000,
    );
    let pass = (tol::FISHER.0..=tol::FISHER.1).contains(&info)
        && (info - oracle).abs() < 1e-6
        && (tau - info.sqrt()).abs() < tol::TAU_SCORE
        && elapsed < Duration::from_secs(5);
    let series = series.map(|t| format!("{t:.6}")).unwrap_or_else(|e| e.to_string());
    Outcome::new(
        pass,
        format!(
            "I={info:.6} (Simpson {oracle:.6}); tau(f*)={tau:.7} vs sqrt(I)={:.7}; K=64 series tau={series}; {:.3}s",
            info.sqrt(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c4() -> Outcome {
    let mut worst = Vec::new();
    let mut pass = true;
    for (name, m, density) in [
        ("gaussian", NoiseMeasure::gaussian(), Box::new(phi) as Box<dyn Fn(f64) -> f64>),
        ("bimodal", NoiseMeasure::bimodal(), Box::new(|z| bimodal_density(z).0)),
    ] {
        let basis = build_basis(&m, 20).unwrap();
        // Oracle Gram matrix by Simpson on a fine grid.
        let (a, b, panels) = (-14.0, 14.0, 40_000);
        let h = (b - a) / (2 * panels) as f64;
        let mut gram = vec![vec![0.0; 21]; 21];
        for i in 0..=2 * panels {
            let z = a + i as f64 * h;
            let w = density(z) * h / 3.0 * if i == 0 || i == 2 * panels { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            if w == 0.0 {
                continue;
            }
            let q: Vec<f64> = (0..=20).map(|k| basis.eval_q(k, z, 0).unwrap()).collect();
            for j in 0..=20 {
                for k in 0..=20 {
                    gram[j][k] += w * q[j] * q[k];
                }
            }
        }
        let dev = (0..=20)
            .flat_map(|j| (0..=20).map(move |k| (j, k)))
            .map(|(j, k)| (gram[j][k] - if j == k { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        pass &= dev < tol::GRAM;
        worst.push(format!("{name} Gram dev {dev:.1e}"));
    }
    let basis = build_basis(&NoiseMeasure::gaussian(), 20).unwrap();
    let mut herm = 0.0_f64;
    for k in 1..=10 {
        for i in 0..=48 {
            let z = -6.0 + 0.25 * i as f64;
            let d = basis.eval_q(k, z, 1).unwrap() - (k as f64).sqrt() * basis.eval_q(k - 1, z, 0).unwrap();
            herm = herm.max(d.abs());
        }
    }
    pass &= herm < tol::HERMITE_DERIVATIVE;
    worst.push(format!("max |q_k' - sqrt(k) q_(k-1)| = {herm:.1e} (k<=10, |z|<=6)"));
    Outcome::new(pass, worst.join("; "))
}

/// Checks every `metric` row: within `tol` of a positive limit, below `sub` where the limit is 0.
fn check_rows(result: &ExperimentResult, metrics: &[&str], tol: f64, sub: f64) -> (bool, Vec<String>) {
    let mut pass = true;
    let mut notes = Vec::new();
    for r in result.rows.iter().filter(|r| metrics.contains(&r.metric.as_str())) {
        let theory = r.theory.expect("theory column");
        let ok = if theory > 0.0 { (r.mean - theory).abs() <= tol } else { r.mean < sub };
        if !ok {
            pass = false;
            notes.push(format!("{} sigma={:.4} {}: sim {:.4} vs theory {:.4}", r.series, r.sigma, r.metric, r.mean, theory));
        }
    }
    (pass, notes)
}

fn max_gap(result: &ExperimentResult, metric: &str) -> f64 {
    result
        .rows
        .iter()
        .filter(|r| r.metric == metric && r.theory.is_some_and(|t| t > 0.0))
        .map(|r| (r.mean - r.theory.unwrap()).abs())
        .fold(0.0, f64::max)
}

fn max_sub(result: &ExperimentResult, metric: &str) -> f64 {
    result
        .rows
        .iter()
        .filter(|r| r.metric == metric && r.theory == Some(0.0))
        .map(|r| r.mean)
        .fold(0.0, f64::max)
}

fn c5() -> Outcome {
    let start = Instant::now();
    let spec = figure_spec("fig2-right").unwrap();
    let sigmas = spec.sigma_grid.values();
    assert_eq!((spec.n_grid.as_slice(), spec.columns(2000), spec.reps), (&[2000][..], 1000, 25));
    assert_eq!((sigmas.len(), sigmas[0], sigmas[7]), (8, 0.4, 2.4));
    let result = run_experiment(&spec, 0, &mut quiet()).unwrap();
    let elapsed = start.elapsed();
    let (ok, notes) = check_rows(&result, &["cos_right_sq_1"], tol::COSINE, tol::SUBCRITICAL);
    let pass = ok && elapsed < Duration::from_secs(600);
    let threshold = result.series[0].threshold_sigma.unwrap();
    Outcome::new(
        pass,
        format!(
            "threshold sigma={threshold:.4}; max |sim-theory| above={:.4}; max sub mean={:.4}; {:.0}s{}",
            max_gap(&result, "cos_right_sq_1"),
            max_sub(&result, "cos_right_sq_1"),
            elapsed.as_secs_f64(),
            if notes.is_empty() { String::new() } else { format!("; off: {}", notes.join(", ")) }
        ),
    )
}

fn c6() -> Outcome {
    let start = Instant::now();
    let spec = figure_spec("fig1-left").unwrap();
    assert_eq!((spec.n_grid.as_slice(), spec.columns(2000), spec.reps), (&[2000][..], 1000, 25));
    let result = run_experiment(&spec, 0, &mut quiet()).unwrap();
    let (ok, notes) = check_rows(&result, &["cos_left_sq_1", "cos_right_sq_1"], tol::COSINE, tol::SUBCRITICAL);
    // Bulk of (4/m) YᵀY: pure noise and one supercritical spike.
    let link = BinomialLink::new(2).unwrap();
    let model = Model::Binomial { link };
    let opts = RunOptions {
        esd: true,
        ..RunOptions::default()
    };
    let mut ks = Vec::new();
    for sigma in [0.0, 3.0] {
        let cfg = SpikeConfig::asymmetric(2000, 1000, vec![sigma], spec.seed);
        let mc = monte_carlo(&cfg, &model, &opts, 25, 0).unwrap();
        ks.push((sigma, mc.mean("esd_ks").unwrap()));
    }
    let ks_ok = ks.iter().all(|(_, k)| *k < tol::KS);
    Outcome::new(
        ok && ks_ok,
        format!(
            "max |cos-theory| above={:.4}/{:.4} (left/right); max sub mean={:.4}; KS(sigma=0)={:.4} KS(sigma=3)={:.4}; {:.0}s{}",
            max_gap(&result, "cos_left_sq_1"),
            max_gap(&result, "cos_right_sq_1"),
            max_sub(&result, "cos_left_sq_1").max(max_sub(&result, "cos_right_sq_1")),
            ks[0].1,
            ks[1].1,
            start.elapsed().as_secs_f64(),
            if notes.is_empty() { String::new() } else { format!("; off: {}", notes.join(", ")) }
        ),
    )
}

fn c7() -> Outcome {
    let g = NoiseMeasure::gaussian();
    let mut pass = true;
    let mut notes = Vec::new();
    for spec in [TransformSpec::Relu {}, TransformSpec::Heaviside {}, TransformSpec::Truncate { level: 1.0 }] {
        let prepared = prepare_transform(&spec, &g).unwrap();
        let model = Model::Transformed {
            measure: g.clone(),
            transform: prepared.transform.clone(),
            f_norm: prepared.f_norm,
            tau: prepared.tau,
        };
        let opts = RunOptions {
            residual: true,
            ..RunOptions::default()
        };
        let mut at_2000 = Vec::new();
        for seed in 1..=5u64 {
            let values: Vec<f64> = [500, 1000, 2000]
                .iter()
                .map(|&n| {
                    let cfg = SpikeConfig::asymmetric(n, n / 2, vec![2.0], seed);
                    run_once(&cfg, &model, &opts, 0).unwrap().residual_opnorm.unwrap()
                })
                .collect();
            if !(values[0] > values[1] && values[1] > values[2]) {
                pass = false;
                notes.push(format!("{} seed {seed}: {values:.4?}", prepared.label));
            }
            at_2000.push(values[2]);
        }
        let worst = at_2000.iter().copied().fold(0.0, f64::max);
        notes.push(format!("{} max at n=2000 {worst:.4}", prepared.label));
    }
    Outcome::new(pass, notes.join("; "))
}

fn c8() -> Outcome {
    let start = Instant::now();
    let g = NoiseMeasure::gaussian();
    let f = Transform::hermite(2);
    let report = tau_for(&f, &g, DEFAULT_DEGREE, DEFAULT_MAX_ELL, TauOptions::default()).unwrap();
    if report.ell_star != Some(2) {
        return Outcome::new(false, format!("ell* = {:?}, expected 2", report.ell_star));
    }
    let tt = tau_tilde(report.tau_at(2).unwrap(), 2, 1.0, 3.0, 3.0).unwrap().abs();
    let model = Model::Transformed {
        measure: g,
        transform: f,
        f_norm: report.f_norm,
        tau: report.tau,
    };
    let opts = RunOptions {
        hadamard_ell: Some(2),
        ..RunOptions::default()
    };
    let run = |snr: f64| {
        let sigma = (snr / tt).sqrt();
        let cfg = SpikeConfig::asymmetric(2000, 2000, vec![sigma], 8)
            .with_scheme(VectorScheme::IidNormalNormalized)
            .with_exponent(0.75);
        let mc = monte_carlo(&cfg, &model, &opts, 25, 0).unwrap();
        (sigma, mc.mean("hadamard_left").unwrap(), mc.mean("hadamard_right").unwrap())
    };
    let (s_sup, l_sup, r_sup) = run(2.0);
    let (s_sub, l_sub, r_sub) = run(0.5);
    let (tl, tr) = mp_cos_sq(2.0, 1.0);
    let pass = (l_sup - tl).abs() <= tol::HADAMARD
        && (r_sup - tr).abs() <= tol::HADAMARD
        && l_sub < tol::SUBCRITICAL
        && r_sub < tol::SUBCRITICAL;
    Outcome::new(
        pass,
        format!(
            "tau~={tt:.5}; sigma={s_sup:.4}: left {l_sup:.4} right {r_sup:.4} vs {tl:.4}; sigma={s_sub:.4}: left {l_sub:.4} right {r_sub:.4}; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c9() -> Outcome {
    let g = NoiseMeasure::gaussian();
    let prepared = prepare_transform(&TransformSpec::Relu {}, &g).unwrap();
    let sigma = 2.0 / prepared.tau;
    let model = Model::Transformed {
        measure: g,
        transform: prepared.transform,
        f_norm: prepared.f_norm,
        tau: prepared.tau,
    };
    let opts = RunOptions {
        shrinkage_grid: Some(50),
        ..RunOptions::default()
    };
    let mut pass = true;
    let mut gaps = Vec::new();
    for seed in 1..=5u64 {
        let cfg = SpikeConfig::asymmetric(2000, 1000, vec![sigma], seed);
        let s = run_once(&cfg, &model, &opts, 0).unwrap().shrinkage.unwrap();
        let gap = s.eta_star_loss - s.best_grid_loss;
        pass &= gap.abs() <= tol::SHRINKAGE;
        gaps.push(format!("{:.4}/{:.4}", s.eta_star_loss, s.best_grid_loss));
    }
    Outcome::new(pass, format!("eta* loss / best grid loss per seed: {}", gaps.join(", ")))
}

fn c10() -> Outcome {
    let mut worst = 0.0_f64;
    for gamma in [0.25, 0.5, 1.0] {
        let (a, b) = (mp_bulk_lower(gamma), mp_bulk_edge(gamma));
        for i in 0..100 {
            let x = a + (b - a) * (i as f64 + 0.5) / 100.0;
            let m = mp_stieltjes(Complex::new(x, 1e-6), gamma).unwrap();
            worst = worst.max((m.im / std::f64::consts::PI - mp_density(x, gamma)).abs());
        }
    }
    Outcome::new(worst < tol::STIELTJES, format!("max |Im m/pi - density| = {worst:.2e}"))
}

fn c11() -> Outcome {
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut csvs = Vec::new();
    for dir in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_spiketrans"))
            .args(["-q", "--out-dir"])
            .arg(dir.path())
            .args(["reproduce", "fig3-left", "--seed", "7"])
            .output()
            .unwrap();
        if !out.status.success() {
            return Outcome::new(false, format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        csvs.push(std::fs::read(dir.path().join("fig3-left.csv")).unwrap());
    }
    let rows = csvs[0].split(|b| *b == b'\n').filter(|l| !l.is_empty() && l[0] != b'#').count();
    Outcome::new(
        csvs[0] == csvs[1] && rows > 1,
        format!("{} bytes, {rows} lines, identical={}; {:.0}s", csvs[0].len(), csvs[0] == csvs[1], start.elapsed().as_secs_f64()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("tau closed forms", c1),
        ("optimal truncation (Cauchy)", c2),
        ("Fisher information and tau(f*)", c3),
        ("orthonormal basis", c4),
        ("ReLU phase transition", c5),
        ("binomial model", c6),
        ("operator-norm equivalence", c7),
        ("ell* = 2 Hadamard alignment", c8),
        ("shrinkage optimality", c9),
        ("Stieltjes/density consistency", c10),
        ("determinism of reproduce", c11),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var("SPIKETRANS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut failed = Vec::new();
    let mut ran = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !outcome.pass {
            failed.push(id);
        }
        println!("{} {id:>2} {title}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("acceptance: {}/{ran} passed{}", ran - failed.len(), if failed.is_empty() { String::new() } else { format!(", failing {failed:?}") });
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
