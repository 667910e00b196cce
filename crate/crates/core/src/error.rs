use std::fmt;

use thiserror::Error;

use crate::estimators::ControlGroup;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the estimation and simulation layers.
///
/// Undefined estimates are ordinary outcomes of a study, not bugs, so they
/// get their own variants instead of turning into NaN.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    #[error("empty control group ({policy}) in the {arm} arm")]
    EmptyControlGroup { policy: ControlGroup, arm: Arm },

    #[error("test with sensitivity {sensitivity} and specificity {specificity} is not invertible")]
    NonInvertibleTest { sensitivity: f64, specificity: f64 },

    #[error("test with sensitivity 0 and specificity 1 never returns a positive result")]
    DegenerateTest,

    #[error("all {replications} replicates failed")]
    NoValidReplicates { replications: usize },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag, used in sweep rows and reports.
    pub fn tag(&self) -> String {
        match self {
            Error::InvalidInput(_) => "invalid-input".into(),
            Error::UndefinedEstimate(_) => "undefined-estimate".into(),
            Error::EmptyControlGroup { .. } => "empty-control-group".into(),
            Error::NonInvertibleTest { .. } => "non-invertible-test".into(),
            Error::DegenerateTest => "degenerate-test".into(),
            Error::NoValidReplicates { .. } => "no-valid-replicates".into(),
            Error::Stage { stage, source } => format!("{}:{}", stage, source.tag()),
        }
    }

    /// Strips any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

/// Vaccination arm of the study population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Vaccinated,
    Unvaccinated,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Vaccinated => f.write_str("vaccinated"),
            Arm::Unvaccinated => f.write_str("unvaccinated"),
        }
    }
}

/// Pipeline stage in which a scenario run failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Population,
    CareSeeking,
    Testing,
    ControlSelection,
    Estimation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Population => "population",
            Stage::CareSeeking => "care-seeking",
            Stage::Testing => "testing",
            Stage::ControlSelection => "control-selection",
            Stage::Estimation => "estimation",
        };
        f.write_str(s)
    }
}

pub(crate) fn check_count(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidInput(format!(
            "{name} must be a finite nonnegative count, got {value}"
        )));
    }
    Ok(())
}

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidInput(format!(
            "{name} must be a probability in [0, 1], got {value}"
        )));
    }
    Ok(())
}
