//! Planted signals and noisy transformed observations.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use spiketrans_core::transforms::logistic;
use spiketrans_core::{BinomialLink, NoiseMeasure, Setting, Transform};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorScheme {
    /// Orthonormalized Gaussian frames (uniform on the Stiefel manifold).
    Haar,
    /// Independent Gaussian vectors, each normalized to unit length.
    IidNormalNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeConfig {
    pub n: usize,
    pub p: usize,
    pub setting: Setting,
    /// Signal strengths, strictly descending. Signed eigenvalues in the symmetric setting.
    pub sigmas: Vec<f64>,
    pub vector_scheme: VectorScheme,
    /// The signal enters as `n^{scaling_exponent} X`; 1/2 is the standard scaling.
    pub scaling_exponent: f64,
    pub seed: u64,
}

impl SpikeConfig {
    pub fn asymmetric(n: usize, p: usize, sigmas: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            p,
            setting: Setting::Asymmetric,
            sigmas,
            vector_scheme: VectorScheme::Haar,
            scaling_exponent: 0.5,
            seed,
        }
    }

    pub fn symmetric(n: usize, eigenvalues: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            p: n,
            setting: Setting::Symmetric,
            sigmas: eigenvalues,
            vector_scheme: VectorScheme::Haar,
            scaling_exponent: 0.5,
            seed,
        }
    }

    pub fn with_scheme(mut self, scheme: VectorScheme) -> Self {
        self.vector_scheme = scheme;
        self
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.scaling_exponent = exponent;
        self
    }

    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    /// `p / n`.
    pub fn gamma(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n < 2 || self.p < 2 {
            return bad(format!("dimensions must be at least 2, got n={} p={}", self.n, self.p));
        }
        if self.setting == Setting::Symmetric && self.n != self.p {
            return bad(format!("symmetric setting requires n = p, got n={} p={}", self.n, self.p));
        }
        if self.sigmas.is_empty() {
            return bad("sigmas must not be empty".into());
        }
        if self.rank() > self.n.min(self.p) {
            return bad(format!("rank {} exceeds min(n, p) = {}", self.rank(), self.n.min(self.p)));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !s.is_finite()) {
            return bad(format!("non-finite signal strength {s}"));
        }
        if self.setting == Setting::Asymmetric && self.sigmas.iter().any(|s| *s < 0.0) {
            return bad("singular values must be nonnegative".into());
        }
        if self.sigmas.windows(2).any(|w| w[0] <= w[1]) {
            return bad("sigmas must be strictly descending".into());
        }
        if !(self.scaling_exponent > 0.0 && self.scaling_exponent < 1.0) {
            return bad(format!("scaling exponent must lie in (0, 1), got {}", self.scaling_exponent));
        }
        Ok(())
    }
}

/// Planted signal `X = Σ_i σ_i u_i v_iᵀ` (with `v_i = u_i` in the symmetric setting).
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    /// `n × r`, unit columns.
    pub left: DMatrix<f64>,
    /// `p × r`, unit columns.
    pub right: DMatrix<f64>,
    pub sigmas: Vec<f64>,
}

impl Signal {
    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.left.nrows(), self.right.nrows());
        for (i, &s) in self.sigmas.iter().enumerate() {
            x.ger(s, &self.left.column(i), &self.right.column(i), 1.0);
        }
        x
    }

    /// `√n ‖u_1‖_∞ ‖v_1‖_∞`, a diagnostic for incoherence of the planted vectors.
    pub fn incoherence(&self) -> f64 {
        (self.left.nrows() as f64).sqrt() * self.left.column(0).amax() * self.right.column(0).amax()
    }
}

fn gaussian_frame<R: Rng + ?Sized>(dim: usize, r: usize, scheme: VectorScheme, rng: &mut R) -> DMatrix<f64> {
    let mut g = DMatrix::from_fn(dim, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    match scheme {
        VectorScheme::Haar => {
            let qr = g.qr();
            let rdiag: Vec<f64> = qr.r().diagonal().iter().copied().collect();
            let mut q = qr.q();
            for (j, d) in rdiag.iter().enumerate() {
                if *d < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            q
        }
        VectorScheme::IidNormalNormalized => {
            for mut c in g.column_iter_mut() {
                c.normalize_mut();
            }
            g
        }
    }
}

/// Draws the planted frames.
pub fn gen_signal<R: Rng + ?Sized>(cfg: &SpikeConfig, rng: &mut R) -> Result<Signal, SimError> {
    cfg.validate()?;
    let r = cfg.rank();
    let left = gaussian_frame(cfg.n, r, cfg.vector_scheme, rng);
    let right = match cfg.setting {
        Setting::Asymmetric => gaussian_frame(cfg.p, r, cfg.vector_scheme, rng),
        Setting::Symmetric => left.clone(),
    };
    Ok(Signal {
        left,
        right,
        sigmas: cfg.sigmas.clone(),
    })
}

/// Noise matrix with i.i.d. entries from `measure`; in the symmetric setting the
/// upper triangle (diagonal included) is drawn and mirrored.
pub fn draw_noise<R: Rng + ?Sized>(
    measure: &NoiseMeasure,
    n: usize,
    p: usize,
    setting: Setting,
    rng: &mut R,
) -> DMatrix<f64> {
    match setting {
        Setting::Asymmetric => {
            let mut z = DMatrix::zeros(n, p);
            measure.fill(rng, z.as_mut_slice());
            z
        }
        Setting::Symmetric => {
            let mut z = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..=j {
                    let v = measure.sample_one(rng);
                    z[(i, j)] = v;
                    z[(j, i)] = v;
                }
            }
            z
        }
    }
}

/// `Y = n^{-1/2} f(n^{e} X + Z)`, optionally with column means removed.
pub fn observe(x: &DMatrix<f64>, z: &DMatrix<f64>, transform: &Transform, exponent: f64, center_columns: bool) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let (amp, inv) = (n.powf(exponent), 1.0 / n.sqrt());
    let mut y = x.zip_map(z, |xv, zv| inv * transform.eval(amp * xv + zv));
    if center_columns {
        for mut c in y.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
    }
    y
}

/// Trial counts above which binomial draws replace explicit latent indicators.
const EXPLICIT_TRIALS: usize = 16;

/// Binomial observations `(Bin(m, logistic(√(n/m) x_ij)) − m/2) / √n`.
///
/// Counts are generated as `Σ_{k≤m} 1(g(√(n/m) x_ij) + z_k ≥ 0)` with standard
/// normal `z_k`; for many trials the equivalent binomial draw is used.
pub fn binomial_observe<R: Rng + ?Sized>(x: &DMatrix<f64>, link: &BinomialLink, rng: &mut R) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let m = link.trials;
    let amp = (n / m as f64).sqrt();
    let inv = 1.0 / n.sqrt();
    let half = m as f64 / 2.0;
    let mut noise = vec![0.0; m];
    x.map(|xv| {
        let s = amp * xv;
        let count = if m <= EXPLICIT_TRIALS {
            for z in noise.iter_mut() {
                *z = rng.sample(StandardNormal);
            }
            link.count(s, &noise) as f64
        } else {
            Binomial::new(m as u64, logistic(s)).expect("valid probability").sample(rng) as f64
        };
        inv * (count - half)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_frames_orthonormal() {
        let cfg = SpikeConfig::asymmetric(300, 200, vec![3.0, 2.0, 1.0], 1);
        let s = gen_signal(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let g = s.left.tr_mul(&s.left);
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
        let g = s.right.tr_mul(&s.right);
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn validation() {
        let ok = SpikeConfig::asymmetric(50, 40, vec![2.0], 0);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.sigmas = vec![1.0, 2.0];
        assert!(c.validate().is_err());
        c.sigmas = vec![];
        assert!(c.validate().is_err());
        let mut c = SpikeConfig::symmetric(30, vec![2.0], 0);
        c.p = 31;
        assert!(c.validate().is_err());
        let c = ok.clone().with_exponent(1.0);
        assert!(c.validate().is_err());
        let mut c = ok;
        c.sigmas = (0..41).map(|i| 100.0 - i as f64).collect();
        assert!(c.validate().is_err());
    }

    #[test]
    fn symmetric_noise_is_symmetric() {
        let z = draw_noise(&NoiseMeasure::gaussian(), 20, 20, Setting::Symmetric, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(z, z.transpose());
    }

    #[test]
    fn identity_model_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SpikeConfig::asymmetric(40, 30, vec![2.0], 5);
        let x = gen_signal(&cfg, &mut rng).unwrap().dense();
        let z = draw_noise(&NoiseMeasure::gaussian(), 40, 30, Setting::Asymmetric, &mut rng);
        let y = observe(&x, &z, &Transform::identity(), 0.5, false);
        let expected = &x + &z / 40f64.sqrt();
        assert!((y - expected).amax() < 1e-14);
        let y0 = observe(&x, &z, &Transform::zero(), 0.5, false);
        assert_eq!(y0.amax(), 0.0);
    }

    #[test]
    fn column_centering() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = draw_noise(&NoiseMeasure::gaussian(), 30, 10, Setting::Asymmetric, &mut rng);
        let x = DMatrix::zeros(30, 10);
        let y = observe(&x, &z, &Transform::relu_centered(), 0.5, true);
        for c in y.column_iter() {
            assert!(c.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_counts_in_range() {
        let link = BinomialLink::new(3).unwrap();
        let x = DMatrix::from_element(10, 5, 0.05);
        let y = binomial_observe(&x, &link, &mut ChaCha8Rng::seed_from_u64(9));
        for v in y.iter() {
            let count = v * 10f64.sqrt() + 1.5;
            assert!((count - count.round()).abs() < 1e-12 && (0.0..=3.0).contains(&count));
        }
    }
}
