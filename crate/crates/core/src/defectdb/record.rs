use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::label::DefectLabel;
use crate::fom::TransitionDipole;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinMultiplicity {
    Singlet,
    Doublet,
    Triplet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionSpin {
    Up,
    Down,
}

impl SpinMultiplicity {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpinMultiplicity::Singlet => "singlet",
            SpinMultiplicity::Doublet => "doublet",
            SpinMultiplicity::Triplet => "triplet",
        }
    }
}

impl TransitionSpin {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionSpin::Up => "up",
            TransitionSpin::Down => "down",
        }
    }
}

impl fmt::Display for SpinMultiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for TransitionSpin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpinMultiplicity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "singlet" => Ok(Self::Singlet),
            "doublet" => Ok(Self::Doublet),
            "triplet" => Ok(Self::Triplet),
            other => Err(format!("unknown spin multiplicity {other:?}")),
        }
    }
}

impl FromStr for TransitionSpin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(Self::Up),
            "down" => Ok(Self::Down),
            other => Err(format!("unknown transition spin {other:?}")),
        }
    }
}

/// One optical transition of one defect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub host: String,
    pub label: DefectLabel,
    pub spin_multiplicity: SpinMultiplicity,
    pub transition_spin: TransitionSpin,
    pub zpl_nm: f64,
    pub dipole: Option<TransitionDipole>,
    pub lifetime_ns: Option<f64>,
    pub source: String,
}

impl DefectRecord {
    /// `Some(μ_z = 0)` when dipole components are known.
    pub fn in_plane(&self) -> Option<bool> {
        self.dipole.map(|d| d.is_in_plane())
    }

    pub fn has_fom_inputs(&self) -> bool {
        self.dipole.is_some() || self.lifetime_ns.is_some()
    }

    /// Uniqueness key within a database.
    pub fn key(&self) -> (String, TransitionSpin) {
        (self.label.to_string(), self.transition_spin)
    }
}
