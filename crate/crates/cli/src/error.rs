/// Failure categories reported on stderr and mapped to exit codes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("error[config]: {0}")]
    Config(String),
    #[error("error[domain]: {0}")]
    Domain(String),
    #[error("error[numerical]: {0}")]
    Numerical(String),
    #[error("error[io]: {0}")]
    Io(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Domain(_) => "domain",
            Self::Numerical(_) => "numerical",
            Self::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Domain(_) => 3,
            Self::Numerical(_) => 4,
            Self::Io(_) => 5,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }
}

impl From<popcross::Error> for CliError {
    fn from(e: popcross::Error) -> Self {
        use popcross::Error as E;
        match e {
            E::Domain(_) | E::Regime(_) | E::Grid(_) => Self::Domain(e.to_string()),
            E::Numerical(_) | E::Resolution(_) | E::Divergence(_) => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
