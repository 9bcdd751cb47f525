use alloc::string::String;

/// Errors reported by the core routines.
///
/// Solver non-convergence is not an error: it is reported through
/// [`crate::solver::SolveStatus`] on an otherwise valid result.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid bounds at coordinate {index}: lower {lower} > upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("polyhedron is empty")]
    EmptyPolyhedron,

    #[error("point is infeasible: constraint {row} violated by {violation}")]
    Infeasible { row: usize, violation: f64 },

    #[error("direction lies in the null space of every constraint")]
    NoIntersection,

    #[error("exhaustive enumeration supports at most {max} variables, got {p}")]
    TooManyVariables { p: usize, max: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
