//! Error types shared across the crate.

use thiserror::Error;

/// Errors from the aerodynamic model and the equations of motion.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    /// Angle-of-attack query outside the polar's breakpoint range.
    #[error(
        "angle of attack {alpha_deg:.3} deg outside polar range [{min_deg:.3}, {max_deg:.3}] deg"
    )]
    AlphaOutOfRange {
        alpha_deg: f64,
        min_deg: f64,
        max_deg: f64,
    },
    /// Airspeed below the minimum at which the airborne model is defined.
    #[error("airspeed {airspeed:.4} m/s below airborne minimum {minimum} m/s")]
    AirspeedSingular { airspeed: f64, minimum: f64 },
    /// Elevation at or beyond the pole of the spherical coordinates.
    #[error("elevation {beta_deg:.3} deg outside [0, 90) deg")]
    ElevationRange { beta_deg: f64 },
    /// Airborne dynamics requested for a grounded state or vice versa.
    #[error("state regime mismatch: {0}")]
    RegimeMismatch(&'static str),
    /// Height query outside the tether sphere.
    #[error("height {height:.4} m not reachable on tether of length {length:.4} m")]
    HeightUnreachable { height: f64, length: f64 },
    /// Negative airspeed passed to a force evaluation.
    #[error("airspeed must be nonnegative, got {0:.4}")]
    NegativeAirspeed(f64),
}

/// Errors from the integration kernel.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    /// A dynamics evaluation failed at one of the four RK4 stages.
    #[error("dynamics error at RK4 stage {stage}: {source}")]
    Stage {
        stage: u8,
        #[source]
        source: DynamicsError,
    },
    /// A derivative component came back non-finite.
    #[error("non-finite derivative at RK4 stage {stage}")]
    NonFinite { stage: u8 },
    /// Invalid kernel settings.
    #[error("invalid sim settings: {0}")]
    Settings(String),
}

/// Errors from offline control design.
#[derive(Debug, Clone, Error)]
pub enum SynthesisError {
    /// Trim iteration exhausted its budget.
    #[error("trim solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    TrimNotConverged { residual: f64, iterations: usize },
    /// A probe point of the finite-difference Jacobian left the model domain.
    #[error("linearization probe failed at coordinate {coordinate}: {source}")]
    ProbeFailed {
        coordinate: usize,
        #[source]
        source: DynamicsError,
    },
    /// Dynamics evaluation failed inside the trim residual.
    #[error("trim residual evaluation failed: {0}")]
    Residual(#[from] DynamicsError),
    /// The Riccati iteration failed to produce a stabilizing solution.
    #[error("Riccati solve failed: {reason}; residual history {history:?}")]
    Riccati { reason: String, history: Vec<f64> },
    /// Weight matrices fail positivity requirements.
    #[error("invalid weights: {0}")]
    Weights(String),
    /// Matrix dimensions inconsistent.
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

/// Errors from configuration loading and validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The document failed to parse as TOML (syntax, unknown or duplicate
    /// keys, wrong types, missing required keys). The message carries the
    /// offending key and line when the parser provides them.
    #[error("config parse error: {0}")]
    Parse(String),
    /// A value violates a model invariant.
    #[error("config key `{key}`{} : {reason}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid {
        key: String,
        line: Option<usize>,
        reason: String,
    },
    /// A controller or design required by the scenario is absent.
    #[error("missing controller configuration `{0}`")]
    MissingController(String),
    /// Serialization of the echo form failed.
    #[error("config echo failed: {0}")]
    Echo(String),
}

/// Errors from telemetry serialization.
#[derive(Debug, Error)]
pub enum TelemetryError {
    /// Refusing to write an empty record stream.
    #[error("no telemetry records to write")]
    Empty,
    /// Underlying writer failure.
    #[error("telemetry write failed: {0}")]
    Io(#[from] std::io::Error),
}
