use std::fmt;

use trapwalk::analysis::AnalysisError;
use trapwalk::exact::ExactError;
use trapwalk::laws::LawError;
use trapwalk::tree::TreeError;
use trapwalk::walk::WalkError;

use crate::config::ConfigError;

/// Exit statuses:
///
/// | code | meaning |
/// |------|---------|
/// | 0 | success |
/// | 2 | usage error |
/// | 3 | invalid configuration |
/// | 4 | offspring or bias law rejected |
/// | 5 | estimator refused or failed its preconditions |
/// | 6 | simulation error (step budget, trap too large, exact solve) |
/// | 7 | input or output failure |
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Law(String),
    Estimation(String),
    Simulation(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Law(_) => 4,
            CliError::Estimation(_) => 5,
            CliError::Simulation(_) => 6,
            CliError::Io(_) => 7,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Law(m) => write!(f, "law: {m}"),
            CliError::Estimation(m) => write!(f, "estimation: {m}"),
            CliError::Simulation(m) => write!(f, "simulation: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<LawError> for CliError {
    fn from(e: LawError) -> Self {
        CliError::Law(e.to_string())
    }
}

impl From<WalkError> for CliError {
    fn from(e: WalkError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError::Simulation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Law(e) => e.into(),
            AnalysisError::Walk(e) => e.into(),
            AnalysisError::Tree(e) => e.into(),
            AnalysisError::Exact(e) => e.into(),
            other => CliError::Estimation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
