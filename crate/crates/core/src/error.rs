use std::fmt;

use thiserror::Error;

/// Named modelling assumptions a scenario must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Reference angles ordered and inside (0, 2π): `0 < θ2,0 < θ3,0 < 2π`.
    NonCollinearBoundary,
    /// Radial reference lengths: `l_0 > 0` and `l_1,0 >= l_0`.
    ReferenceLengths,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::NonCollinearBoundary => write!(
                f,
                "non-collinear boundary assumption (0 < theta_2_0 < theta_3_0 < 2*pi)"
            ),
            Assumption::ReferenceLengths => {
                write!(f, "reference length assumption (l_0 > 0 and l_1_0 >= l_0)")
            }
        }
    }
}

/// Constraints on the boundary-agent schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `l_min <= l_i <= l_0` for boundary agents 2 and 3.
    RadialBound,
    /// `θ2 < θ3`.
    AngleOrder,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::RadialBound => write!(f, "radial bound (l_min <= l_i <= l_0)"),
            Constraint::AngleOrder => write!(f, "angle order (theta_2 < theta_3)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("assumption violated: {assumption}: {detail}")]
    AssumptionViolation {
        assumption: Assumption,
        detail: String,
    },

    #[error("constraint violated: {constraint}: {detail}")]
    ConstraintViolation {
        constraint: Constraint,
        detail: String,
    },

    #[error("singular Jacobian (det = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("orientation-reversing Jacobian (det = {det:e})")]
    ImproperJacobian { det: f64 },

    #[error("degenerate boundary triangle (area = {area:e} m^2)")]
    DegenerateHull { area: f64 },

    #[error("t = {t} outside [{t_0}, {t_f}]")]
    OutOfInterval { t: f64, t_0: f64, t_f: f64 },

    #[error("discontinuous mission at phase join {index}: {detail}")]
    DiscontinuousMission { index: usize, detail: String },

    #[error("corridor clearance requested but no corridor is configured")]
    CorridorUnset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("safety violation at t = {time:.3} s: {}", .kinds.join(", "))]
    SafetyViolation { time: f64, kinds: Vec<String> },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("in `{field}`: {source}")]
    Located {
        field: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn assumption(assumption: Assumption, detail: impl Into<String>) -> Self {
        Error::AssumptionViolation {
            assumption,
            detail: detail.into(),
        }
    }

    pub(crate) fn constraint(constraint: Constraint, detail: impl Into<String>) -> Self {
        Error::ConstraintViolation {
            constraint,
            detail: detail.into(),
        }
    }

    pub(crate) fn at(self, field: impl Into<String>) -> Self {
        Error::Located {
            field: field.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with any field locations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Located { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors that describe an unusable configuration rather than
    /// a runtime safety outcome.
    pub fn is_configuration(&self) -> bool {
        !matches!(self.root(), Error::SafetyViolation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
