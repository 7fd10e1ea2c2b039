use cnnm::Error;

pub const CONFIG: u8 = 2;
pub const INPUT: u8 = 3;
pub const NOT_CONVERGED: u8 = 4;
const OTHER: u8 = 1;

/// A one-line reason and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: CONFIG, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { code: INPUT, message: message.into() }
    }

    pub fn not_converged(iterations: usize) -> Self {
        Self {
            code: NOT_CONVERGED,
            message: format!("solver did not converge in {iterations} iterations; outputs hold the best iterate"),
        }
    }

    /// Errors raised while reading a named file.
    pub fn reading(path: &std::path::Path, e: Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::InvalidKernel { .. } | Error::TooLarge { .. } | Error::Json(_) => CONFIG,
            Error::InvalidShape(_)
            | Error::ShapeMismatch { .. }
            | Error::DimensionOutOfRange { .. }
            | Error::NonFinite(_)
            | Error::Format { .. }
            | Error::Io(_) => INPUT,
            _ => OTHER,
        };
        Self { code, message: e.to_string() }
    }
}
