use ranksel_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if is_bad_input(e) => EXIT_USAGE,
            CliError::Core(_) => EXIT_SOLVER,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// Errors caused by the requested parameters rather than by a numerical failure.
fn is_bad_input(e: &CoreError) -> bool {
    match e {
        CoreError::InvalidProbability(_)
        | CoreError::InvalidDegreesOfFreedom(_)
        | CoreError::InvalidParameter { .. }
        | CoreError::OutsideIndifferenceZone { .. }
        | CoreError::DimensionMismatch { .. } => true,
        CoreError::AtK { source, .. } => is_bad_input(source),
        _ => false,
    }
}
