//! Database ingestion (CSV or JSON) with per-row diagnostics.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::parse_defect_label;
use super::record::{DefectRecord, SpinMultiplicity, TransitionSpin};
use super::DbError;
use crate::fom::TransitionDipole;

pub const CSV_HEADER: [&str; 10] = [
    "host",
    "defect_label",
    "spin_multiplicity",
    "transition_spin",
    "zpl_nm",
    "mu_x_debye",
    "mu_y_debye",
    "mu_z_debye",
    "lifetime_ns",
    "source",
];

/// Wavelengths below this are almost certainly energies in eV.
const MIN_PLAUSIBLE_ZPL_NM: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbFormat {
    Csv,
    Json,
}

impl DbFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// `line` is 1-based (CSV line, or JSON array index + 1); 0 means the
/// whole file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub records: Vec<DefectRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestReport {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

pub fn ingest(path: &Path, format: DbFormat) -> Result<IngestReport, DbError> {
    let text = std::fs::read_to_string(path).map_err(|e| DbError::Io(format!("{}: {e}", path.display())))?;
    Ok(match format {
        DbFormat::Csv => ingest_csv_str(&text),
        DbFormat::Json => ingest_json_str(&text),
    })
}

/// Raw field values of one row, before validation.
struct RawRow<'a> {
    host: &'a str,
    label: &'a str,
    spin_multiplicity: &'a str,
    transition_spin: &'a str,
    zpl_nm: Option<f64>,
    mu: [Option<f64>; 3],
    lifetime_ns: Option<f64>,
    source: &'a str,
}

struct Collector {
    report: IngestReport,
    seen: HashMap<(String, TransitionSpin), usize>,
}

impl Collector {
    fn new() -> Self {
        Self { report: IngestReport::default(), seen: HashMap::new() }
    }

    fn diag(&mut self, line: usize, severity: Severity, message: impl Into<String>) {
        self.report.diagnostics.push(Diagnostic { line, severity, message: message.into() });
    }

    fn accept(&mut self, line: usize, row: RawRow<'_>) {
        let mut errors = Vec::new();
        if row.host.trim().is_empty() {
            errors.push("host is empty".to_string());
        }
        let label =
            parse_defect_label(row.label).map_err(|e| errors.push(format!("defect_label {:?}: {e}", row.label))).ok();
        let spin_multiplicity = row.spin_multiplicity.parse::<SpinMultiplicity>().map_err(|e| errors.push(e)).ok();
        let transition_spin = row.transition_spin.parse::<TransitionSpin>().map_err(|e| errors.push(e)).ok();
        match row.zpl_nm {
            None => errors.push("zpl_nm is missing".into()),
            Some(z) if !(z > 0.0 && z.is_finite()) => {
                errors.push(format!("zpl_nm must be a positive wavelength, got {z}"))
            }
            Some(z) if z < MIN_PLAUSIBLE_ZPL_NM => {
                errors.push(format!("zpl_nm = {z} looks like an energy in eV; expected nanometres"))
            }
            _ => {}
        }
        let dipole = match row.mu {
            [None, None, None] => None,
            [Some(x), Some(y), Some(z)] => match TransitionDipole::new(x, y, z) {
                Ok(d) => Some(d),
                Err(e) => {
                    errors.push(format!("dipole (Debye): {e}"));
                    None
                }
            },
            _ => {
                errors.push("dipole needs all of mu_x_debye, mu_y_debye, mu_z_debye or none".into());
                None
            }
        };
        if let Some(t) = row.lifetime_ns {
            if !(t > 0.0) {
                errors.push(format!("lifetime_ns must be positive, got {t}"));
            }
        }
        if !errors.is_empty() {
            for e in errors {
                self.diag(line, Severity::Error, e);
            }
            return;
        }
        let record = DefectRecord {
            host: row.host.trim().to_string(),
            label: label.expect("checked"),
            spin_multiplicity: spin_multiplicity.expect("checked"),
            transition_spin: transition_spin.expect("checked"),
            zpl_nm: row.zpl_nm.expect("checked"),
            dipole,
            lifetime_ns: row.lifetime_ns,
            source: row.source.to_string(),
        };
        if let Some(first) = self.seen.get(&record.key()) {
            let msg =
                format!("duplicate entry {} ({}) first defined on line {first}", record.label, record.transition_spin);
            self.diag(line, Severity::Error, msg);
            return;
        }
        if !record.has_fom_inputs() {
            self.diag(
                line,
                Severity::Warning,
                format!("{}: no FoM inputs (neither dipole nor lifetime)", record.label),
            );
        }
        self.seen.insert(record.key(), line);
        self.report.records.push(record);
    }
}

fn number(field: &str, name: &str, errors: &mut Vec<String>) -> Option<f64> {
    let t = field.trim();
    if t.is_empty() {
        return None;
    }
    match t.parse::<f64>() {
        Ok(v) if !v.is_nan() => Some(v),
        _ => {
            errors.push(format!("{name}: {t:?} is not a number"));
            None
        }
    }
}

/// The csv reader neither counts nor positions past comment and blank
/// lines, so derive the line number from the byte offset.
fn line_of(text: &str, byte: u64) -> usize {
    let bytes = text.as_bytes();
    let mut pos = (byte as usize).min(bytes.len());
    while pos < bytes.len() && matches!(bytes[pos], b'#' | b'\n' | b'\r') {
        pos = bytes[pos..].iter().position(|b| *b == b'\n').map_or(bytes.len(), |i| pos + i + 1);
    }
    bytes[..pos].iter().filter(|b| **b == b'\n').count() + 1
}

pub fn ingest_csv_str(text: &str) -> IngestReport {
    let mut col = Collector::new();
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut header_seen = false;
    for result in reader.records() {
        let rec = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| line_of(text, p.byte()));
                col.diag(line, Severity::Error, format!("malformed CSV: {e}"));
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| line_of(text, p.byte()));
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if rec.iter().ne(CSV_HEADER.iter().copied()) {
                col.diag(line, Severity::Error, format!("header must be exactly {:?}", CSV_HEADER.join(",")));
                return col.report;
            }
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            col.diag(line, Severity::Error, format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()));
            continue;
        }
        let mut errors = Vec::new();
        let zpl_nm = number(&rec[4], "zpl_nm", &mut errors);
        let mu = [
            number(&rec[5], "mu_x_debye", &mut errors),
            number(&rec[6], "mu_y_debye", &mut errors),
            number(&rec[7], "mu_z_debye", &mut errors),
        ];
        let lifetime_ns = number(&rec[8], "lifetime_ns", &mut errors);
        if !errors.is_empty() {
            for e in errors {
                col.diag(line, Severity::Error, e);
            }
            continue;
        }
        col.accept(
            line,
            RawRow {
                host: &rec[0],
                label: &rec[1],
                spin_multiplicity: &rec[2],
                transition_spin: &rec[3],
                zpl_nm,
                mu,
                lifetime_ns,
                source: &rec[9],
            },
        );
    }
    col.report
}

/// JSON mirror of a CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonRecord {
    pub host: String,
    pub defect_label: String,
    pub spin_multiplicity: String,
    pub transition_spin: String,
    pub zpl_nm: Option<f64>,
    #[serde(default)]
    pub mu_x_debye: Option<f64>,
    #[serde(default)]
    pub mu_y_debye: Option<f64>,
    #[serde(default)]
    pub mu_z_debye: Option<f64>,
    #[serde(default)]
    pub lifetime_ns: Option<f64>,
    #[serde(default)]
    pub source: String,
}

impl From<&DefectRecord> for JsonRecord {
    fn from(r: &DefectRecord) -> Self {
        Self {
            host: r.host.clone(),
            defect_label: r.label.to_string(),
            spin_multiplicity: r.spin_multiplicity.to_string(),
            transition_spin: r.transition_spin.to_string(),
            zpl_nm: Some(r.zpl_nm),
            mu_x_debye: r.dipole.map(|d| d.mu_x),
            mu_y_debye: r.dipole.map(|d| d.mu_y),
            mu_z_debye: r.dipole.map(|d| d.mu_z),
            lifetime_ns: r.lifetime_ns,
            source: r.source.clone(),
        }
    }
}

pub fn ingest_json_str(text: &str) -> IngestReport {
    let mut col = Collector::new();
    if text.trim().is_empty() {
        return col.report;
    }
    let rows: Vec<serde_json::Value> = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            col.diag(e.line(), Severity::Error, format!("malformed JSON: {e}"));
            return col.report;
        }
    };
    for (i, value) in rows.into_iter().enumerate() {
        let line = i + 1;
        match serde_json::from_value::<JsonRecord>(value) {
            Ok(r) => col.accept(
                line,
                RawRow {
                    host: &r.host,
                    label: &r.defect_label,
                    spin_multiplicity: &r.spin_multiplicity,
                    transition_spin: &r.transition_spin,
                    zpl_nm: r.zpl_nm,
                    mu: [r.mu_x_debye, r.mu_y_debye, r.mu_z_debye],
                    lifetime_ns: r.lifetime_ns,
                    source: &r.source,
                },
            ),
            Err(e) => col.diag(line, Severity::Error, format!("record {line}: {e}")),
        }
    }
    col.report
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records in the canonical CSV dialect (LF line endings).
pub fn write_records_csv<W: Write>(records: &[DefectRecord], out: W) -> Result<(), DbError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.host.clone(),
            r.label.to_string(),
            r.spin_multiplicity.to_string(),
            r.transition_spin.to_string(),
            r.zpl_nm.to_string(),
            opt(r.dipole.map(|d| d.mu_x)),
            opt(r.dipole.map(|d| d.mu_y)),
            opt(r.dipole.map(|d| d.mu_z)),
            opt(r.lifetime_ns),
            r.source.clone(),
        ])?;
    }
    w.flush().map_err(|e| DbError::Io(e.to_string()))?;
    Ok(())
}

pub fn records_to_json(records: &[DefectRecord]) -> Result<String, DbError> {
    let rows: Vec<JsonRecord> = records.iter().map(JsonRecord::from).collect();
    serde_json::to_string_pretty(&rows).map_err(|e| DbError::Format(e.to_string()))
}
