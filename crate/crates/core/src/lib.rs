//! Effective signal-to-noise constants and spectral predictions for spiked
//! matrices observed through an elementwise nonlinearity.
//!
//! Most numerics are `f64`. The scalar-generic pieces (`rmt`, `shrinkage`, quadrature
//! and the polynomial recurrence) accept any [`Real`] type and also run in `f32`.

pub mod measures;
pub mod orthopoly;
pub mod quad;
pub mod rmt;
pub mod scalar;
pub mod shrinkage;
pub mod transforms;

pub use measures::{fisher_information, MeasureError, MeasureSpec, NoiseMeasure};
pub use orthopoly::{
    b_coeffs, build_basis, coeffs, optimal_series_preprocessor, tau, tau_for, tau_via_score, OrthoBasis, OrthoError,
    SeriesCoeffs, TauOptions, TauReport,
};
pub use rmt::{PredictionOutcome, RmtError, Setting};
pub use scalar::Real;
pub use shrinkage::{ShrinkageError, ShrinkageKind, ShrinkageRule};
pub use transforms::{
    optimize_truncation, tau_trunc, BinomialLink, Transform, TransformError, TransformSpec, TruncationReport,
};

pub type SpectralPrediction = rmt::SpectralPrediction<f64>;
pub type SpikePrediction = rmt::SpikePrediction<f64>;
