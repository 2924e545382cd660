use airyphase::Error;
use serde_json::{json, Value};

/// Failures that end the process. Each one prints as a single JSON line.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(Error),
    Io(String),
    /// Bench cells that failed; the CSV still holds every row.
    CellsFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) | CliError::CellsFailed(_) => 1,
        }
    }

    pub fn to_json(&self, usage: &str) -> Value {
        match self {
            CliError::Usage(m) => json!({"error": "usage", "message": m, "usage": usage}),
            CliError::Io(m) => json!({"error": "io", "message": m}),
            CliError::CellsFailed(n) => json!({
                "error": "numerical",
                "kind": "BenchCells",
                "message": format!("{n} bench cells failed; see the status column"),
                "failed": n,
            }),
            CliError::Numerical(e) => {
                let mut v = json!({
                    "error": "numerical",
                    "kind": kind(e),
                    "message": e.to_string(),
                });
                match e {
                    Error::NonConvergence { iterations, last, zeta_history } => {
                        v["iterations"] = json!(iterations);
                        v["last_zeta"] = json!(last);
                        v["zeta_history"] = json!(zeta_history);
                    }
                    Error::NearResonant { det } => v["determinant"] = json!(det),
                    Error::Range(t) | Error::SingularDerivative(t) => v["t"] = json!(t),
                    Error::PanelBudget(n) => v["panels"] = json!(n),
                    Error::MinimumWidth { c, d } => v["panel"] = json!([c, d]),
                    _ => {}
                }
                v
            }
        }
    }
}

pub fn kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "InvalidArgument",
        Error::Domain { .. } => "Domain",
        Error::Range(_) => "Range",
        Error::SingularDerivative(_) => "SingularDerivative",
        Error::NonConvergence { .. } => "NonConvergence",
        Error::SingularSystem(_) => "SingularSystem",
        Error::InvalidPhase(_) => "InvalidPhase",
        Error::NonPositiveCoefficient { .. } => "NonPositiveCoefficient",
        Error::PanelBudget(_) => "PanelBudget",
        Error::MinimumWidth { .. } => "MinimumWidth",
        Error::NearResonant { .. } => "NearResonant",
        Error::Expr(_) => "Expr",
    }
}

impl From<Error> for CliError {
    /// Bad input is a usage error; everything else is numerical.
    fn from(e: Error) -> Self {
        match e {
            Error::NonPositiveCoefficient { t, value } => CliError::Usage(format!(
                "q0 must be supplied as the positive factor, not q (q0({t}) = {value})"
            )),
            Error::InvalidArgument(_) | Error::Domain { .. } | Error::Expr(_) => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
