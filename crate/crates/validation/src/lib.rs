//! Reference data and reporting helpers for the acceptance suite.

use std::fmt;
use std::time::{Duration, Instant};

/// One row of the published defect table.
#[derive(Clone, Debug, PartialEq)]
pub struct PublishedRow {
    pub label: String,
    pub transition_spin: String,
    pub zpl_nm: f64,
    pub tau_ns: f64,
    pub q: f64,
    pub bandwidth_ghz: f64,
    /// Target-system names the row is listed against.
    pub targets: Vec<String>,
}

impl PublishedRow {
    /// Half a unit in the last printed digit of the bandwidth column.
    pub fn bandwidth_rounding(&self) -> f64 {
        0.05
    }
}

const PUBLISHED: &str = include_str!("../fixtures/published_table.csv");

pub fn published_table() -> Vec<PublishedRow> {
    let mut reader = csv::Reader::from_reader(PUBLISHED.as_bytes());
    reader
        .records()
        .map(|r| {
            let r = r.expect("fixture is valid CSV");
            let num = |i: usize| r[i].parse::<f64>().expect("fixture number");
            PublishedRow {
                label: r[0].to_string(),
                transition_spin: r[1].to_string(),
                zpl_nm: num(2),
                tau_ns: num(3),
                q: num(4),
                bandwidth_ghz: num(5),
                targets: r[6].split(';').map(str::to_string).collect(),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub runtime: Duration,
    pub limit: Option<Duration>,
    /// Supporting lines printed under the verdict.
    pub notes: Vec<String>,
}

/// What a criterion check returns.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into(), notes: Vec::new() }
    }

    pub fn with_notes(mut self, notes: Vec<String>) -> Self {
        self.notes = notes;
        self
    }
}

impl Outcome {
    /// Runs `check`, timing it; a breached time limit fails the criterion.
    pub fn run(id: &str, title: &str, limit: Option<Duration>, check: impl FnOnce() -> Verdict) -> Self {
        let start = Instant::now();
        let Verdict { mut pass, mut detail, notes } = check();
        let runtime = start.elapsed();
        if let Some(l) = limit {
            if runtime > l {
                pass = false;
                detail = format!("{detail}; runtime {:.2?} exceeds {:.0?}", runtime, l);
            }
        }
        Self { id: id.into(), title: title.into(), pass, detail, runtime, limit, notes }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let limit = self.limit.map(|l| format!(" / {l:.0?}")).unwrap_or_default();
        write!(
            f,
            "[{}] #{} {}: {} ({:.2?}{limit})",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.runtime
        )?;
        for n in &self.notes {
            write!(f, "\n      {n}")?;
        }
        Ok(())
    }
}

/// Relative deviation `|a/b − 1|`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}
