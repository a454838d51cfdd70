use spiketrans_core::{MeasureError, OrthoError, RmtError, ShrinkageError, TransformError};
use spiketrans_sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: malformed spec, out-of-domain parameter, unsupported combination.
    #[error("{0}")]
    Validation(String),
    /// A computation that was set up correctly failed to produce a trustworthy number.
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

fn measure_is_numerical(e: &MeasureError) -> bool {
    matches!(e, MeasureError::Quadrature(_) | MeasureError::CrossCheck { .. })
}

fn ortho_is_numerical(e: &OrthoError) -> bool {
    match e {
        OrthoError::Breakdown { .. } | OrthoError::Quadrature { .. } | OrthoError::CrossCheck { .. } => true,
        OrthoError::Measure(m) => measure_is_numerical(m),
        _ => false,
    }
}

fn transform_is_numerical(e: &TransformError) -> bool {
    match e {
        TransformError::Quadrature(_) => true,
        TransformError::Measure(m) => measure_is_numerical(m),
        TransformError::Ortho(o) => ortho_is_numerical(o),
        _ => false,
    }
}

fn classify(numerical: bool, message: String) -> CliError {
    if numerical {
        CliError::Numerical(message)
    } else {
        CliError::Validation(message)
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        classify(measure_is_numerical(&e), e.to_string())
    }
}

impl From<OrthoError> for CliError {
    fn from(e: OrthoError) -> Self {
        classify(ortho_is_numerical(&e), e.to_string())
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        classify(transform_is_numerical(&e), e.to_string())
    }
}

impl From<RmtError> for CliError {
    fn from(e: RmtError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<ShrinkageError> for CliError {
    fn from(e: ShrinkageError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let numerical = match &e {
            SimError::NoConvergence { .. } | SimError::Pool(_) | SimError::Replicate { .. } => true,
            SimError::Transform(t) => transform_is_numerical(t),
            _ => false,
        };
        classify(numerical, e.to_string())
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        Self::Validation(format!("invalid experiment spec: {e}"))
    }
}
