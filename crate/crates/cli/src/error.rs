use thiserror::Error;

/// Failure of one run, mapped onto the documented exit codes.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}; pass --search to explore it greedily")]
    TooManyModels(String),
    #[error("{0}")]
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Other(_) => 1,
            Failure::Csv(_) => 2,
            Failure::Config(_) => 3,
            Failure::TooManyModels(_) => 4,
        }
    }
}

impl From<nonlocal::Error> for Failure {
    fn from(e: nonlocal::Error) -> Self {
        use nonlocal::Error as E;
        match e {
            E::TooManyModels { .. } => Failure::TooManyModels(e.to_string()),
            E::InvalidInput(_) | E::WrongPriorKind { .. } | E::FamilySupport { .. } | E::Dimension(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(format!("I/O error: {e}"))
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;
