use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad argument values.
    Usage(String),
    Io(String),
    /// Arguments that are individually valid but do not fit the data.
    Config(String),
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const IO: u8 = 2;
    pub const CONFIG: u8 = 3;

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => Self::USAGE,
            CliError::Io(_) => Self::IO,
            CliError::Config(_) => Self::CONFIG,
        }
    }

    pub fn io(context: impl fmt::Display, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl From<bloomstream::Error> for CliError {
    fn from(e: bloomstream::Error) -> Self {
        use bloomstream::Error as E;
        match e {
            E::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            E::Io(m) => CliError::Io(m),
            _ => CliError::Config(e.to_string()),
        }
    }
}
