//! Single replicates and Monte Carlo aggregation.

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use spiketrans_core::shrinkage::{eta_star, rank_one_op_loss};
use spiketrans_core::{BinomialLink, NoiseMeasure, Setting, Transform};

use crate::linalg::{eig_sym, op_norm, svd_top};
use crate::metrics::{cosines, esd_compare, hadamard_alignment};
use crate::model::{binomial_observe, draw_noise, gen_signal, observe, SpikeConfig};
use crate::SimError;

/// How observations are produced from the planted signal.
#[derive(Debug, Clone)]
pub enum Model {
    /// `Y = n^{-1/2} f(n^e X + Z)`, analysed after division by `f_norm = ‖f‖_μ`.
    Transformed {
        measure: NoiseMeasure,
        transform: Transform,
        f_norm: f64,
        /// `τ(f, μ)`; needed for the residual and shrinkage metrics.
        tau: f64,
    },
    /// Binomial counts through the logistic link, analysed after scaling by `2/√m`.
    Binomial { link: BinomialLink },
}

impl Model {
    /// Factor dividing `Y` so that the noise part has unit entry variance `1/n`.
    pub fn noise_norm(&self) -> f64 {
        match self {
            Self::Transformed { f_norm, .. } => *f_norm,
            Self::Binomial { link } => (link.trials as f64).sqrt() / 2.0,
        }
    }

    /// Multiplier turning `σ` into the effective signal strength of the normalized matrix.
    pub fn effective_tau(&self) -> f64 {
        match self {
            Self::Transformed { tau, .. } => tau.abs(),
            Self::Binomial { link } => link.effective_snr_factor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Number of extreme components to extract (0 means the signal rank).
    pub components: usize,
    pub esd: bool,
    /// `‖Y − τ‖f‖X − n^{-1/2} f(Z)‖₂` (transformed model, standard scaling).
    pub residual: bool,
    /// Alignment with Hadamard powers of the planted vectors (rank one).
    pub hadamard_ell: Option<usize>,
    /// Number of grid points for the constant-multiplier shrinkage comparison.
    pub shrinkage_grid: Option<usize>,
    pub center_columns: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            components: 0,
            esd: false,
            residual: false,
            hadamard_ell: None,
            shrinkage_grid: None,
            center_columns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageLoss {
    /// Top singular value of the normalized observation.
    pub sigma_hat: f64,
    pub eta_star: f64,
    pub eta_star_loss: f64,
    pub best_alpha: f64,
    pub best_grid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub n: usize,
    pub p: usize,
    pub rep: u64,
    pub seed: u64,
    /// Extreme singular values (eigenvalues in the symmetric setting) of the normalized observation.
    pub top_singular_values: Vec<f64>,
    pub cos_left_sq: Vec<Vec<f64>>,
    pub cos_right_sq: Vec<Vec<f64>>,
    pub esd_ks: Option<f64>,
    pub residual_opnorm: Option<f64>,
    pub hadamard_cos_sq: Option<(f64, f64)>,
    pub shrinkage: Option<ShrinkageLoss>,
    pub incoherence: f64,
    pub wall_time: f64,
}

impl SimulationResult {
    /// Named scalar metrics, in a fixed order.
    pub fn scalar_metrics(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (i, v) in self.top_singular_values.iter().enumerate() {
            out.push((format!("sv_{}", i + 1), *v));
        }
        for (i, row) in self.cos_left_sq.iter().enumerate() {
            if let Some(v) = row.get(i) {
                out.push((format!("cos_left_sq_{}", i + 1), *v));
            }
        }
        for (i, row) in self.cos_right_sq.iter().enumerate() {
            if let Some(v) = row.get(i) {
                out.push((format!("cos_right_sq_{}", i + 1), *v));
            }
        }
        if let Some(v) = self.esd_ks {
            out.push(("esd_ks".into(), v));
        }
        if let Some(v) = self.residual_opnorm {
            out.push(("residual_opnorm".into(), v));
        }
        if let Some((a, b)) = self.hadamard_cos_sq {
            out.push(("hadamard_left".into(), a));
            out.push(("hadamard_right".into(), b));
        }
        if let Some(s) = &self.shrinkage {
            out.push(("eta_star_loss".into(), s.eta_star_loss));
            out.push(("best_grid_loss".into(), s.best_grid_loss));
        }
        out.push(("incoherence".into(), self.incoherence));
        out
    }
}

/// Private generator of replicate `rep`: the base seed selects the key, the
/// replicate index the stream.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// One replicate: draw signal and noise, observe, and measure.
pub fn run_once(cfg: &SpikeConfig, model: &Model, opts: &RunOptions, rep: u64) -> Result<SimulationResult, SimError> {
    let start = Instant::now();
    cfg.validate()?;
    let mut rng = replicate_rng(cfg.seed, rep);
    let signal = gen_signal(cfg, &mut rng)?;
    let x = signal.dense();
    let (y, noise) = match model {
        Model::Transformed { measure, transform, .. } => {
            let z = draw_noise(measure, cfg.n, cfg.p, cfg.setting, &mut rng);
            let y = observe(&x, &z, transform, cfg.scaling_exponent, opts.center_columns);
            (y, Some(z))
        }
        Model::Binomial { link } => {
            if cfg.setting != Setting::Asymmetric {
                return Err(SimError::InvalidConfig("binomial model is rectangular only".into()));
            }
            (binomial_observe(&x, link, &mut rng), None)
        }
    };
    let norm = model.noise_norm();
    let yn = &y / norm;
    let r = cfg.rank();
    let k = if opts.components == 0 { r } else { opts.components };

    let (values, lefts, rights): (Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) = match cfg.setting {
        Setting::Asymmetric => {
            let triples = svd_top(&yn, k)?;
            let values = triples.iter().map(|t| t.value).collect();
            let (l, rt) = triples.into_iter().map(|t| (t.left, t.right)).unzip();
            (values, l, rt)
        }
        Setting::Symmetric => {
            let negatives = cfg.sigmas.iter().filter(|s| **s < 0.0).count();
            let bottom = negatives.min(k);
            let top = (k - bottom).max(1);
            let (hi, lo) = eig_sym(&yn, top, bottom)?;
            let pairs: Vec<_> = hi.into_iter().chain(lo).collect();
            let values = pairs.iter().map(|e| e.value).collect();
            let vecs: Vec<DVector<f64>> = pairs.into_iter().map(|e| e.vector).collect();
            (values, vecs.clone(), vecs)
        }
    };
    let cos_left_sq = cosines(&signal.left, &lefts);
    let cos_right_sq = cosines(&signal.right, &rights);

    let esd_ks = if opts.esd {
        let negatives = cfg.sigmas.iter().filter(|s| **s < 0.0).count();
        let positives = r - negatives;
        Some(esd_compare(&y, norm, cfg.setting, positives.max(1), negatives)?)
    } else {
        None
    };

    let residual_opnorm = match (opts.residual, model, &noise) {
        (true, Model::Transformed { transform, f_norm, tau, .. }, Some(z)) => {
            let fz = observe(&nalgebra::DMatrix::zeros(cfg.n, cfg.p), z, transform, cfg.scaling_exponent, opts.center_columns);
            let a = &x * (tau * f_norm) + fz;
            Some(op_norm(&(&y - a))?)
        }
        (true, ..) => {
            return Err(SimError::InvalidConfig("residual metric needs a transformed model".into()));
        }
        _ => None,
    };

    let hadamard_cos_sq = match opts.hadamard_ell {
        Some(ell) => Some(hadamard_alignment(&signal, &lefts[0], &rights[0], ell)?),
        None => None,
    };

    let shrinkage = match opts.shrinkage_grid {
        Some(points) if cfg.setting == Setting::Asymmetric => {
            let target = model.effective_tau() * signal.sigmas[0];
            let cl = signal.left.column(0).dot(&lefts[0]);
            let cr = signal.right.column(0).dot(&rights[0]);
            let sigma_hat = values[0];
            let eta = eta_star(sigma_hat, cfg.gamma());
            let clamp = |c: f64| c.clamp(-1.0, 1.0);
            let eta_loss = rank_one_op_loss(target, eta, clamp(cl), clamp(cr))?;
            let mut best = (0.0, f64::INFINITY);
            for j in 0..points.max(2) {
                let alpha = sigma_hat * j as f64 / (points.max(2) - 1) as f64;
                let loss = rank_one_op_loss(target, alpha, clamp(cl), clamp(cr))?;
                if loss < best.1 {
                    best = (alpha, loss);
                }
            }
            Some(ShrinkageLoss {
                sigma_hat,
                eta_star: eta,
                eta_star_loss: eta_loss,
                best_alpha: best.0,
                best_grid_loss: best.1,
            })
        }
        _ => None,
    };

    Ok(SimulationResult {
        n: cfg.n,
        p: cfg.p,
        rep,
        seed: cfg.seed,
        top_singular_values: values,
        cos_left_sq,
        cos_right_sq,
        esd_ks,
        residual_opnorm,
        hadamard_cos_sq,
        shrinkage,
        incoherence: signal.incoherence(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    /// Standard error of the mean; `None` for a single replicate.
    pub se: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub summary: Vec<MetricSummary>,
    pub runs: Vec<SimulationResult>,
}

impl MonteCarlo {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|m| m.name == name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.metric(name).map(|m| m.mean)
    }
}

/// Mean and standard error of each named metric over `runs`.
pub fn summarize(runs: &[SimulationResult]) -> Vec<MetricSummary> {
    let mut names: Vec<String> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for run in runs {
        for (name, v) in run.scalar_metrics() {
            match names.iter().position(|n| *n == name) {
                Some(i) => values[i].push(v),
                None => {
                    names.push(name);
                    values.push(vec![v]);
                }
            }
        }
    }
    names
        .into_iter()
        .zip(values)
        .map(|(name, vals)| {
            let count = vals.len();
            let mean = vals.iter().sum::<f64>() / count as f64;
            let se = (count > 1).then(|| {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
                (var / count as f64).sqrt()
            });
            MetricSummary { name, mean, se, count }
        })
        .collect()
}

/// Runs replicates `0..reps` on a pool of at most `jobs` workers (0 = all cores).
/// Any failing replicate aborts the run and is reported with its seed.
pub fn monte_carlo(cfg: &SpikeConfig, model: &Model, opts: &RunOptions, reps: usize, jobs: usize) -> Result<MonteCarlo, SimError> {
    if reps == 0 {
        return Err(SimError::InvalidConfig("reps must be at least 1".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    let results: Vec<Result<SimulationResult, SimError>> =
        pool.install(|| (0..reps as u64).into_par_iter().map(|rep| run_once(cfg, model, opts, rep)).collect());
    let mut runs = Vec::with_capacity(reps);
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                return Err(SimError::Replicate {
                    rep: rep as u64,
                    seed: cfg.seed,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(MonteCarlo {
        summary: summarize(&runs),
        runs,
    })
}
