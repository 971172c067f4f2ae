//! Artifact writing with embedded provenance.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

impl InputDigest {
    pub fn of(name: impl Into<String>, data: &[u8]) -> Self {
        Self { name: name.into(), sha256: hex::encode(Sha256::digest(data)), bytes: data.len() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub config_source: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl Provenance {
    pub fn new(command: &str, config: RunConfig, config_source: Option<String>, timestamp: bool) -> Self {
        let timestamp = timestamp.then(|| {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            format!("unix:{secs}")
        });
        Self {
            tool: "hbnqm",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config,
            config_source,
            inputs: Vec::new(),
            parameters: serde_json::Value::Object(Default::default()),
            timestamp,
        }
    }

    /// `#`-prefixed lines placed ahead of a CSV body.
    pub fn csv_preamble(&self) -> Result<String, CliError> {
        let mut s = format!("# {} {} {}\n", self.tool, self.version, self.command);
        s += &format!("# config: {}\n", serde_json::to_string(&self.config)?);
        if let Some(src) = &self.config_source {
            s += &format!("# config_source: {src}\n");
        }
        for i in &self.inputs {
            s += &format!("# input: {} sha256={} bytes={}\n", i.name, i.sha256, i.bytes);
        }
        s += &format!("# parameters: {}\n", serde_json::to_string(&self.parameters)?);
        if let Some(t) = &self.timestamp {
            s += &format!("# generated: {t}\n");
        }
        Ok(s)
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

/// Collects the files a command writes under one output directory.
pub struct Sink {
    dir: PathBuf,
    pub provenance: Provenance,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, provenance: Provenance) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), provenance, written: Vec::new() })
    }

    fn put(&mut self, name: &str, data: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// `body` writes the CSV table; the provenance preamble goes first.
    pub fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let mut data = self.provenance.csv_preamble()?.into_bytes();
        body(&mut data)?;
        self.put(name, &data)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(&Envelope { provenance: &self.provenance, result })?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

/// LF-terminated writer matching the database dialect.
pub fn csv_writer(out: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
