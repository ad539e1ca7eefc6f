use thiserror::Error;

pub type Result<T> = std::result::Result<T, NerError>;

/// Coarse failure class, used by the runner to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Physics,
    Numerical,
}

#[derive(Debug, Error)]
pub enum NerError {
    #[error("invalid spin: 2S = {0} (must be >= 1)")]
    InvalidSpin(i64),
    #[error("could not parse spin `{0}`")]
    SpinParse(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("spin 1/2 nucleus cannot carry a quadrupole moment (Q = {0} m^2)")]
    QuadrupoleForSpinHalf(f64),
    #[error("no drive possible: {0}")]
    NoDrive(String),
    #[error("drive is off resonance: omega = {omega} rad/s, resonance = {resonance} rad/s")]
    OffResonance { omega: f64, resonance: f64 },
    #[error("radial integral diverges at the origin: {0}")]
    DivergentIntegral(String),
    #[error("quadrature did not converge: estimate {value}, error estimate {error}")]
    QuadratureNonConvergence { value: f64, error: f64 },
    #[error("integrator step underflow at t = {t} s (dt = {dt} s)")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("matrix is not unitary (residue {0:e})")]
    NonUnitary(f64),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NerError {
    pub fn class(&self) -> ErrorClass {
        use NerError::*;
        match self {
            SpinParse(_) | Config(_) | Io(_) => ErrorClass::Config,
            QuadratureNonConvergence { .. } | StepUnderflow { .. } | NonUnitary(_) => ErrorClass::Numerical,
            _ => ErrorClass::Physics,
        }
    }

    /// Stable machine-readable code for the JSON error envelope.
    pub fn code(&self) -> &'static str {
        use NerError::*;
        match self {
            InvalidSpin(_) => "invalid_spin",
            SpinParse(_) => "spin_parse",
            DimensionMismatch(_) => "dimension_mismatch",
            InvalidQuantumNumbers(_) => "invalid_quantum_numbers",
            InvalidParameter(_) => "invalid_parameter",
            QuadrupoleForSpinHalf(_) => "quadrupole_for_spin_half",
            NoDrive(_) => "no_drive",
            OffResonance { .. } => "off_resonance",
            DivergentIntegral(_) => "divergent_integral",
            QuadratureNonConvergence { .. } => "quadrature_nonconvergence",
            StepUnderflow { .. } => "integrator_stiffness",
            NonUnitary(_) => "non_unitary",
            NotNormalized(_) => "not_normalized",
            Config(_) => "config",
            Io(_) => "io",
        }
    }
}
