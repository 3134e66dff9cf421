use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("migration graph is disconnected (site {site} unreachable from site 0)")]
    DisconnectedGraph { site: usize },

    #[error("edge weights are not symmetric at ({row}, {col})")]
    NonSymmetric { row: usize, col: usize },

    #[error("diffusivity must be positive, got {value} ({context})")]
    NonPositiveDiffusivity { value: f64, context: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: String,
        got: String,
        context: String,
    },

    #[error("invalid migration operator for species {species}: {reason}")]
    InvalidOperator { species: usize, reason: String },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// Parameter validation failure; `field` names the offending input.
    #[error("{field}: {reason}")]
    InvalidModel { field: String, reason: String },

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("none of the averaged-model exclusion cases (equal mortalities, common uptake shape, Monod) holds")]
    CepAssumptionUnmet,

    #[error("break-even values tie between species {a} and {b} (r* = {value})")]
    TiedRStar { a: usize, b: usize, value: f64 },

    #[error("local break-even of species {species} is infinite at site {site}")]
    LocalBreakEvenInfinite { species: usize, site: usize },

    #[error("species {species} does not have a linear consumption function")]
    NotLinear { species: usize },

    #[error("step size underflow at t = {t} (dt = {dt})")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("fast component never exceeds ten times its plateau; no transient to fit")]
    NoTransient,

    #[error("Newton iteration diverged at epsilon = {epsilon}: {trace}")]
    NewtonDiverged { epsilon: f64, trace: String },

    #[error("continuation landed in the wrong basin (slow distance {distance} from seed, limit {limit})")]
    WrongBasin { distance: f64, limit: f64 },

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the failure stems from bad input rather than from a numerical method.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DisconnectedGraph { .. }
                | Error::NonSymmetric { .. }
                | Error::NonPositiveDiffusivity { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidOperator { .. }
                | Error::InvalidDomain(_)
                | Error::InvalidModel { .. }
                | Error::NonPositiveEpsilon(_)
                | Error::InvalidConfig(_)
                | Error::Scenario(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
