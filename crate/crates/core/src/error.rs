use thiserror::Error;

/// Errors raised by the simulation engines and the closed-form evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// Conditioning on an outcome whose probability is (numerically) zero.
    #[error("herald outcome is impossible (probability {prob:e})")]
    HeraldImpossible { prob: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("branch count {count} exceeds the cap of {cap}")]
    BranchCap { count: usize, cap: usize },

    #[error("Fock truncation lost {lost:e} of the norm")]
    Truncation { lost: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The state is not supported on the two-branch span a pseudo-spin rotation acts on.
    #[error("state leaks {leakage:e} of its weight out of the rotation span")]
    UnsupportedRotation { leakage: f64 },

    #[error("closed forms do not cover this configuration: {0}")]
    UnsupportedForClosedForm(String),

    #[error("divergent normalization: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
