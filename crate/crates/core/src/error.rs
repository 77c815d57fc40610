use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// A search (anti-crossing, transition) found nothing in the requested window.
    NotFound(String),
    /// An operation was applied to a value in the wrong state, e.g. a frame
    /// transformation applied twice.
    InvalidState(String),
    /// The Jacobi eigensolver hit its sweep limit.
    NoConvergence { sweeps: usize, off_norm: f64 },
    /// Level tracking could not separate two eigenvectors even after refinement.
    Degeneracy { theta_deg: f64 },
    /// A stepper request would be coarser than the hard resolution floor.
    UnderResolved { substep_us: f64, limit_us: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::NotFound(m) => write!(f, "not found: {m}"),
            Error::InvalidState(m) => write!(f, "invalid state: {m}"),
            Error::NoConvergence { sweeps, off_norm } => write!(
                f,
                "eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})"
            ),
            Error::Degeneracy { theta_deg } => {
                write!(f, "unresolvable level degeneracy near theta = {theta_deg} deg")
            }
            Error::UnderResolved { substep_us, limit_us } => write!(
                f,
                "time step {substep_us:e} us exceeds the resolution limit {limit_us:e} us"
            ),
        }
    }
}

impl core::error::Error for Error {}
