//! Defect database: nomenclature, ingestion, ZPL matching and screening.

mod ingest;
mod label;
mod record;
mod screen;
mod targets;

use thiserror::Error;

pub use ingest::{
    ingest, ingest_csv_str, ingest_json_str, records_to_json, write_records_csv, DbFormat, Diagnostic, IngestReport,
    JsonRecord, Severity, CSV_HEADER,
};
pub use label::{parse_defect_label, Constituent, DefectLabel, LabelError, LabelErrorKind, Site, Species};
pub use record::{DefectRecord, SpinMultiplicity, TransitionSpin};
pub use screen::{screen, RejectReason, Rejection, Screening};
pub use targets::{
    default_targets, default_targets_json, match_zpl, parse_targets_json, Application, MatchResult, TargetSystem,
    DEFAULT_TARGETS_NAME, DEFAULT_TOLERANCE_NM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl From<csv::Error> for DbError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            DbError::Io(e.to_string())
        } else {
            DbError::Format(e.to_string())
        }
    }
}

const SEED_CSV: &str = include_str!("../../data/seed-defects.csv");

/// The bundled 25-row seed database.
pub fn seed_csv() -> &'static str {
    SEED_CSV
}

pub fn seed_records() -> Vec<DefectRecord> {
    ingest_csv_str(SEED_CSV).records
}
