//! TOML input files.
//!
//! Branch configuration:
//!
//! ```toml
//! punctures = [[-0.5, 0.0], [0.5, 0.0]]
//! windings = [0.25, -0.25]
//! neutral = true
//! cut_angle = 0.0   # optional
//! ```
//!
//! Charges for the chaos moment, one table per charge with a grid cell:
//!
//! ```toml
//! [[charge]]
//! alpha = 0.4
//! cell = [128, 128]
//! ```

use std::path::Path;

use anyhow::Context;
use ffcorr_core::free_field::BranchConfig;
use ffcorr_core::C64;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchFile {
    pub punctures: Vec<[f64; 2]>,
    pub windings: Vec<f64>,
    pub neutral: bool,
    #[serde(default)]
    pub cut_angle: f64,
}

impl BranchFile {
    pub fn into_config(self) -> ffcorr_core::Result<BranchConfig> {
        let pts = self.punctures.iter().map(|p| C64::new(p[0], p[1])).collect();
        Ok(BranchConfig::with_neutral_flag(pts, self.windings, self.neutral)?.with_cut_angle(self.cut_angle))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeEntry {
    pub alpha: f64,
    pub cell: [usize; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargesFile {
    #[serde(default)]
    pub charge: Vec<ChargeEntry>,
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
