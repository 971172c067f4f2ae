//! Run configuration: one JSON file, overridden by flags, echoed into every
//! artifact.

use std::path::{Path, PathBuf};

use hbn_qmem::dynamics::{DetuningGrid, IntegrationConfig};
use hbn_qmem::fom::{CavityConvention, PhysicalConstants, QualityCap};
use hbn_qmem::lambda::{DarkStateDecayModel, PulseProfile, WindowPolicy};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Variable naming a default config file when `--config` is absent.
pub const CONFIG_ENV: &str = "HBNQM_CONFIG";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Cached,
    Recompute,
}

/// A universal constant: a number, `"cached"` or `"recompute"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantSetting {
    Value(f64),
    Keyword(Keyword),
}

impl Default for ConstantSetting {
    fn default() -> Self {
        ConstantSetting::Keyword(Keyword::Cached)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Reference control pulse and survival criterion, in units of `g_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub omega0: f64,
    pub t_char: f64,
    pub g: f64,
    pub survival_threshold: f64,
    pub initial_survival: f64,
    pub photon_cutoff: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            omega0: 10.0,
            t_char: 2.0,
            g: 1.0,
            survival_threshold: 0.5,
            initial_survival: DarkStateDecayModel::DEFAULT_P0,
            photon_cutoff: 1,
        }
    }
}

impl Protocol {
    pub fn pulse(&self) -> Result<PulseProfile, CliError> {
        Ok(PulseProfile::new(self.omega0, self.t_char)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: IntegrationConfig::DEFAULT_REL_TOL,
            abs_tol: IntegrationConfig::DEFAULT_ABS_TOL,
            max_step: IntegrationConfig::DEFAULT_MAX_STEP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physical: PhysicalConstants,
    pub convention: CavityConvention,
    pub window: WindowPolicy,
    pub integration: Tolerances,
    pub protocol: Protocol,
    pub kappa_hat: ConstantSetting,
    pub sigma_delta: ConstantSetting,
    pub detuning_grid: DetuningGrid,
    pub quality_cap: QualityCap,
    pub match_tolerance_nm: f64,
    pub output_dir: PathBuf,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            physical: PhysicalConstants::default(),
            convention: CavityConvention::default(),
            window: WindowPolicy::default(),
            integration: Tolerances::default(),
            protocol: Protocol::default(),
            kappa_hat: ConstantSetting::default(),
            sigma_delta: ConstantSetting::default(),
            detuning_grid: DetuningGrid::default(),
            quality_cap: QualityCap::default(),
            match_tolerance_nm: hbn_qmem::defectdb::DEFAULT_TOLERANCE_NM,
            output_dir: PathBuf::from("."),
            output_format: OutputFormat::default(),
        }
    }
}

/// Where the config came from, with its raw bytes for the digest.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: Option<(PathBuf, Vec<u8>)>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `explicit` wins over the environment; neither means defaults.
    pub fn load(explicit: Option<&Path>) -> Result<LoadedConfig, CliError> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        };
        let Some(path) = path else {
            return Ok(LoadedConfig { config: RunConfig::default(), source: None });
        };
        let bytes = std::fs::read(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Usage(format!("{}: config is not UTF-8", path.display())))?;
        let config = Self::from_json(text)?;
        Ok(LoadedConfig { config, source: Some((path, bytes)) })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Usage(format!("config: {what}")));
        let t = &self.integration;
        if !(t.rel_tol > 0.0 && t.abs_tol > 0.0 && t.max_step > 0.0) {
            return bad("integration tolerances and max_step must be positive");
        }
        for (name, s) in [("kappa_hat", self.kappa_hat), ("sigma_delta", self.sigma_delta)] {
            if let ConstantSetting::Value(v) = s {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(&format!("{name} must be positive, got {v}"));
                }
            }
        }
        if !(self.match_tolerance_nm >= 0.0 && self.match_tolerance_nm.is_finite()) {
            return bad("match_tolerance_nm must be non-negative");
        }
        if let Some(q) = self.quality_cap.q_max {
            if !(q > 0.0) {
                return bad("quality_cap.q_max must be positive or null");
            }
        }
        if self.protocol.photon_cutoff < 1 {
            return bad("protocol.photon_cutoff must be at least 1");
        }
        Ok(())
    }

    pub fn integration_config(&self, pulse: &PulseProfile, g: f64) -> Result<IntegrationConfig, CliError> {
        let mut cfg = IntegrationConfig::from_window(pulse, g, &self.window)?
            .with_tolerances(self.integration.rel_tol, self.integration.abs_tol);
        cfg.max_step = self.integration.max_step;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let cfg = RunConfig::from_json(r#"{"convention":{"refractive_index":2.0},"window":{"ground_fraction":0.99}}"#)
            .unwrap();
        assert_eq!(cfg.convention.refractive_index, 2.0);
        assert_eq!(cfg.convention.mode_volume_factor, 1.76);
        assert_eq!(cfg.window.ground_fraction, 0.99);
        assert_eq!(cfg.window.metastable_fraction, 0.999);
    }

    #[test]
    fn constant_settings() {
        let cfg = RunConfig::from_json(r#"{"kappa_hat":"recompute","sigma_delta":7.5}"#).unwrap();
        assert_eq!(cfg.kappa_hat, ConstantSetting::Keyword(Keyword::Recompute));
        assert_eq!(cfg.sigma_delta, ConstantSetting::Value(7.5));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::from_json(r#"{"colour":1}"#), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_json(r#"{"sigma_delta":"maybe"}"#), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_json(r#"{"sigma_delta":-1}"#), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_json(r#"{"integration":{"rel_tol":0}}"#), Err(CliError::Usage(_))));
    }

    #[test]
    fn serialized_default_roundtrips() {
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
    }
}
