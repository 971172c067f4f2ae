use hbn_qmem::defectdb::DbError;
use hbn_qmem::dynamics::DynamicsError;
use hbn_qmem::fom::FomError;
use hbn_qmem::lambda::ModelError;
use thiserror::Error;

/// Each variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        use DynamicsError as D;
        match e {
            D::Model(_) | D::Invalid(_) | D::UnreachableThreshold { .. } => CliError::Usage(e.to_string()),
            D::Qops(_) | D::Integrate(_) | D::TraceDrift { .. } | D::NotBracketed { .. } | D::NoResonantTransfer(_) => {
                CliError::Numerical(e.to_string())
            }
            D::Csv(_) | D::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<FomError> for CliError {
    fn from(e: FomError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DbError> for CliError {
    fn from(e: DbError) -> Self {
        match e {
            DbError::Io(m) => CliError::Io(m),
            DbError::Format(_) | DbError::Invalid(_) => CliError::Usage(e.to_string()),
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

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(format!("json output: {e}"))
    }
}
