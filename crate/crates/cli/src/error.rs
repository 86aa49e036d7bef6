use std::fmt;

/// Failures that end a command, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or unreadable input (exit 2).
    Usage(String),
    /// Malformed or inconsistent configuration (exit 2).
    Config(String),
    /// Error raised by a solver or simulator.
    Model(microchem::Error),
    /// Failure writing artifacts (exit 2).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use microchem::Error as E;
        match self {
            // numerical invariants tripped during a run
            CliError::Model(
                E::Stability(_)
                | E::NegativeDensity { .. }
                | E::ProbabilityLeak { .. }
                | E::StepTooCoarse { .. }
                | E::TruncationTail { .. }
                | E::Singular(_)
                | E::NoRootInBracket { .. }
                | E::TooFewSurvivors(_),
            ) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Model(e) => write!(f, "model error: {e}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<microchem::Error> for CliError {
    fn from(e: microchem::Error) -> Self {
        CliError::Model(e)
    }
}
