//! Error type shared across the crate.

use crate::scenario::Arm;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown scenario `{0}` (built-ins: scenario1, scenario2)")]
    UnknownScenario(String),

    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    #[error("covariate {x} outside range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no unit matches the rule; inverse-propensity value is undefined")]
    NoOverlap,

    #[error("propensity must lie strictly in (0, 1), got {0}")]
    BadPropensity(f64),

    #[error("{arm:?} arm: {source}")]
    Arm {
        arm: Arm,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_arm(self, arm: Arm) -> Error {
        Error::Arm {
            arm,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
