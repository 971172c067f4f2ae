use std::fmt;

use serde::{Deserialize, Serialize};

use super::label::DefectLabel;
use super::record::{DefectRecord, TransitionSpin};
use super::DbError;

pub const DEFAULT_TOLERANCE_NM: f64 = 5.0;

/// Bundled target list; bump the file name when the content changes.
pub const DEFAULT_TARGETS_NAME: &str = "targets-v1.json";
const DEFAULT_TARGETS_JSON: &str = include_str!("../../data/targets-v1.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Application {
    #[serde(rename = "photon source")]
    PhotonSource,
    #[serde(rename = "memory")]
    Memory,
    #[serde(rename = "computing")]
    Computing,
    #[serde(rename = "communication")]
    Communication,
    #[serde(rename = "Fraunhofer line")]
    FraunhoferLine,
}

impl fmt::Display for Application {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Application::PhotonSource => "photon source",
            Application::Memory => "memory",
            Application::Computing => "computing",
            Application::Communication => "communication",
            Application::FraunhoferLine => "Fraunhofer line",
        })
    }
}

/// A quantum system whose wavelength a defect could interface with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSystem {
    pub name: String,
    pub wavelength_nm: f64,
    pub application: Application,
    #[serde(rename = "ref")]
    pub citation: String,
}

pub fn parse_targets_json(text: &str) -> Result<Vec<TargetSystem>, DbError> {
    let targets: Vec<TargetSystem> = serde_json::from_str(text).map_err(|e| DbError::Format(e.to_string()))?;
    for t in &targets {
        if !(t.wavelength_nm > 0.0 && t.wavelength_nm.is_finite()) {
            return Err(DbError::Invalid(format!(
                "target {:?}: wavelength_nm must be positive, got {}",
                t.name, t.wavelength_nm
            )));
        }
    }
    Ok(targets)
}

pub fn default_targets() -> Vec<TargetSystem> {
    parse_targets_json(DEFAULT_TARGETS_JSON).expect("bundled target list is valid")
}

pub fn default_targets_json() -> &'static str {
    DEFAULT_TARGETS_JSON
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub defect: DefectLabel,
    pub transition_spin: TransitionSpin,
    pub zpl_nm: f64,
    pub target: TargetSystem,
    /// `zpl − target`, nm.
    pub detuning_nm: f64,
}

/// Every (record, target) pair within `tolerance_nm`, in record order then
/// target order.
pub fn match_zpl(
    records: &[DefectRecord],
    targets: &[TargetSystem],
    tolerance_nm: f64,
) -> Result<Vec<MatchResult>, DbError> {
    if !(tolerance_nm >= 0.0 && tolerance_nm.is_finite()) {
        return Err(DbError::Invalid(format!("tolerance must be a non-negative number of nm, got {tolerance_nm}")));
    }
    let mut out = Vec::new();
    for r in records {
        for t in targets {
            let detuning = r.zpl_nm - t.wavelength_nm;
            if detuning.abs() <= tolerance_nm {
                out.push(MatchResult {
                    defect: r.label.clone(),
                    transition_spin: r.transition_spin,
                    zpl_nm: r.zpl_nm,
                    target: t.clone(),
                    detuning_nm: detuning,
                });
            }
        }
    }
    Ok(out)
}
