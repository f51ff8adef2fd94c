use std::fmt;

use crate::label::SignalLabel;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A positioned diagnostic emitted by the network-file parser.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    /// 1-based column number.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// Errors produced by model construction, analysis and parsing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid friction regime")]
    InvalidFrictionRegime,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("composite requires positive nominal flow (pipe {0})")]
    NonPositiveFlow(String),

    #[error("steady-state solve diverged")]
    SteadyStateDiverged,

    #[error("unconnected component input {0}")]
    UnconnectedInput(SignalLabel),

    #[error("conflicting drivers for {0}")]
    ConflictingDrivers(SignalLabel),

    #[error("algebraic loop ill-posed (condition number {0:.3e})")]
    IllPosedLoop(f64),

    #[error("system has a pole at zero; DC gain undefined")]
    PoleAtZero,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("simulation left physical domain at t={0}")]
    LeftPhysicalDomain(f64),

    #[error("{}", format_diagnostics(.0))]
    Parse(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
