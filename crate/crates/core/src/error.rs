use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A state interval reported alongside classification failures.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestInterval {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
}

impl fmt::Display for NearestInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = [{}, {})", self.label, self.lower, self.upper)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: order {left} vs order {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid stochastic matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("stationary distribution not unique (chain is reducible)")]
    NotUnique,

    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("unclassifiable value {value}{} (nearest interval {nearest})", cycle.as_ref().map(|c| format!(" at cycle {c}")).unwrap_or_default())]
    Unclassifiable {
        value: f64,
        cycle: Option<String>,
        nearest: NearestInterval,
    },

    #[error("unknown state label {0:?}")]
    UnknownState(String),

    #[error("state {state} has a deficient transition row ({reason})")]
    DeficientRow { state: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate variance: pooled variance is zero but sample means differ")]
    DegenerateVariance,

    #[error("chain did not reach equilibrium within {steps} steps")]
    NotConverged { steps: usize },

    #[error("insufficient transitions: the series needs at least two cycles")]
    InsufficientTransitions,

    #[error("cycle {0:?} is missing records for one gender")]
    MissingGender(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
