use thiserror::Error;

/// Errors raised across the library.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`])
/// and onto the C status codes exported by the FFI crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument violates a mathematical precondition (non-positive matrix,
    /// `f` below its admissible bound, spectrum outside a cone, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller misuse: mismatched dimensions, out-of-range parameters.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed numerical data (non-finite values, wrong lengths).
    #[error("data error: {0}")]
    Data(String),

    /// `omega_0 + i ddbar phi` fails to be positive somewhere on the grid.
    #[error("form is not Kähler at grid point {point}: positivity margin {margin:.3e}")]
    NotKahler { point: usize, margin: f64 },

    /// The linearized operator is not elliptic at the current iterate.
    #[error("ellipticity lost at grid point {point}: cone margin {margin:.3e}")]
    EllipticityLost { point: usize, margin: f64 },

    /// The iterate left the admissible cone and step halving could not recover.
    #[error("cone breach: {0}")]
    ConeBreach(String),

    /// Newton (or a continuity path) ran out of iterations.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A documented precondition of a solver path is violated by the input data.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The argument branch of the complex intersection polynomial is undefined.
    #[error("branch undefined on t in [{lo}, {hi}]: intersection polynomial vanishes")]
    BranchUndefined { lo: f64, hi: f64 },

    /// Malformed configuration document.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit status used by the `kahlerlab` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Data(_) | Error::Usage(_) => 1,
            Error::Domain(_)
            | Error::Precondition(_)
            | Error::NotKahler { .. }
            | Error::BranchUndefined { .. } => 2,
            Error::NoConvergence(_) => 3,
            Error::ConeBreach(_) | Error::EllipticityLost { .. } => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
