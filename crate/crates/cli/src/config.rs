//! Pipeline configuration shared by every command.

use std::path::Path;

use anyhow::{Context, Result};
use colorclass::classgrid::GridParams;
use colorclass::classopt::Threshold;
use colorclass::harmonize::HarmonizeParams;
use colorclass::weighting::PsiMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Bin edge length.
    pub alpha: u32,
    /// Percentage used to derive the per-batch threshold psi.
    pub p_percent: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    /// Minimum corpus count for a class to be retained.
    pub min_count: u64,
    /// Alternative threshold as a percentage of all samples; overrides
    /// `min_count` when set.
    pub min_percent: Option<f64>,
    /// `[width, height]` the Lab planes are area-averaged to before counting;
    /// `None` counts at native resolution.
    pub histogram_resize: Option<[u32; 2]>,
    /// Fixed psi instead of the derived one.
    pub psi_override: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: 6,
            p_percent: 10.0,
            delta_a: 8.0,
            delta_b: 8.0,
            min_count: 500,
            min_percent: None,
            histogram_resize: Some([56, 56]),
            psi_override: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn grid(&self) -> Result<GridParams> {
        Ok(GridParams::new(self.alpha)?)
    }

    pub fn threshold(&self) -> Threshold {
        match self.min_percent {
            Some(p) => Threshold::Percent(p),
            None => Threshold::Count(self.min_count),
        }
    }

    pub fn psi_mode(&self) -> PsiMode {
        match self.psi_override {
            Some(v) => PsiMode::Fixed(v),
            None => PsiMode::Derived,
        }
    }

    pub fn harmonize_params(&self) -> HarmonizeParams {
        HarmonizeParams {
            delta_a: self.delta_a,
            delta_b: self.delta_b,
        }
    }

    /// Short digest of the canonical JSON form, embedded in every artifact.
    pub fn hash(&self) -> String {
        short_hash(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Full hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
