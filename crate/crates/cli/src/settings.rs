//! Layered run settings: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use novelty_core::{Mode, SessionConfig};

use crate::CliError;

/// Keys accepted in a `--config` file. Every key is optional.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub poll_ms: Option<u64>,
    pub theta_deg: Option<f64>,
    pub blur_sigma_frac: Option<f64>,
    pub min_segment_frac: Option<f64>,
    pub mode: Option<Mode>,
    pub k_points: Option<usize>,
    pub retain_patterns: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Overlays `other` on `self`; keys set in `other` win.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        FileConfig {
            out: other.out.or(self.out),
            poll_ms: other.poll_ms.or(self.poll_ms),
            theta_deg: other.theta_deg.or(self.theta_deg),
            blur_sigma_frac: other.blur_sigma_frac.or(self.blur_sigma_frac),
            min_segment_frac: other.min_segment_frac.or(self.min_segment_frac),
            mode: other.mode.or(self.mode),
            k_points: other.k_points.or(self.k_points),
            retain_patterns: other.retain_patterns.or(self.retain_patterns),
        }
    }

    /// True when any session parameter is set.
    pub fn touches_session(&self) -> bool {
        self.theta_deg.is_some()
            || self.blur_sigma_frac.is_some()
            || self.min_segment_frac.is_some()
            || self.mode.is_some()
            || self.k_points.is_some()
            || self.retain_patterns.is_some()
    }

    pub fn apply(&self, base: &SessionConfig) -> SessionConfig {
        SessionConfig {
            theta_deg: self.theta_deg.unwrap_or(base.theta_deg),
            blur_sigma_frac: self.blur_sigma_frac.unwrap_or(base.blur_sigma_frac),
            min_segment_frac: self.min_segment_frac.unwrap_or(base.min_segment_frac),
            mode: self.mode.unwrap_or(base.mode),
            k_points: self.k_points.unwrap_or(base.k_points),
            retain_patterns: self.retain_patterns.unwrap_or(base.retain_patterns),
        }
    }
}
