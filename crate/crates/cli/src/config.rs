//! Effective run configuration: an optional TOML file overlaid by flags.

use std::path::{Path, PathBuf};

use morphprobe::analysis::BoundaryAveraging;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: PathConfig,
    pub metrics: MetricOptions,
    pub datagen: DatagenOptions,
    pub probe: ProbeOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub gold: Option<PathBuf>,
    pub tokens: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub real: Option<PathBuf>,
    pub nonce: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub results: Vec<PathBuf>,
    pub reports: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub dataset: Option<String>,
    pub system: Option<String>,
    /// `tsv` (token file) or `gold` (a gold file used as a tokenization).
    pub tokens_format: Option<String>,
    pub boundary_averaging: Option<BoundaryAveraging>,
    pub group_by: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenOptions {
    pub n: Option<usize>,
    pub allow_geminate: Option<bool>,
    /// `real`, `nonce`, or `none`.
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub task: Option<String>,
    pub lang: Option<String>,
    pub shots: Option<u8>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub retry_limit: Option<u32>,
    pub concurrency: Option<usize>,
    pub backoff_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
    pub requests_per_second: Option<f64>,
    /// In-process stand-in model: `oracle` or `root-echo`.
    pub mock: Option<String>,
    pub omit_timing: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Short digest of everything except the output location.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.paths.out = None;
        let json = serde_json::to_string(&hashed).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Set `slot` when the flag was given.
pub fn overlay<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

/// Set a boolean option only when the switch is on.
pub fn overlay_switch(slot: &mut Option<bool>, flag: bool) {
    if flag {
        *slot = Some(true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_path() {
        let a = RunConfig { seed: Some(7), ..RunConfig::default() };
        let mut b = a.clone();
        b.paths.out = Some("elsewhere.jsonl".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(8);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig { seed: Some(3), ..RunConfig::default() };
        cfg.probe.model = Some("gpt-4o".into());
        cfg.metrics.boundary_averaging = Some(BoundaryAveraging::PerWord);
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
