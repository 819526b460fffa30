use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Hyperparams, ModelConfig};
use super::loss::ElementWeights;
use super::normalize::{ScalarStats, TargetStats};
use super::params::{ParamRecord, ParamSet};
use super::train::EpochRecord;
use crate::error::{Error, Result};
use crate::provenance::Provenance;

pub const CHECKPOINT_FORMAT: &str = "qtkit-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    Atomic { stats: TargetStats },
    Molecular { stats: ScalarStats },
}

/// Structured-text parameter dump with everything needed to reuse a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub config: ModelConfig,
    pub config_hash: String,
    pub hyperparams: Option<Hyperparams>,
    pub normalization: Normalization,
    pub element_weights: ElementWeights,
    pub best_epoch: Option<usize>,
    pub best_loss: Option<f64>,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn new(
        provenance: Provenance,
        config: &ModelConfig,
        params: &ParamSet,
        normalization: Normalization,
    ) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            provenance,
            config: config.clone(),
            config_hash: config.hash(),
            hyperparams: None,
            normalization,
            element_weights: ElementWeights::UNIFORM,
            best_epoch: None,
            best_loss: None,
            history: Vec::new(),
            params: params.to_records(),
        }
    }

    /// Parameters rebuilt and shape-checked against the stored configuration.
    pub fn param_set(&self) -> Result<ParamSet> {
        ParamSet::from_records(&self.config, self.params.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint format {} v{}", ck.format, ck.version)));
        }
        let actual = ck.config.hash();
        if actual != ck.config_hash {
            return Err(Error::ConfigMismatch { expected: ck.config_hash.clone(), found: actual });
        }
        ck.param_set()?;
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Checkpoint> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtnet::config::Variant;

    fn sample() -> Checkpoint {
        let cfg = ModelConfig::tiny(Variant::Sg8_12, 1, 4);
        let p = ParamSet::init(&cfg, 2).unwrap();
        let stats = TargetStats { n_mean: 1.0, n_std: 2.0, li_mean: 0.5, li_std: 0.1, mu_rms: 0.3, q_rms: 0.7 };
        Checkpoint::new(Provenance::detached(2), &cfg, &p, Normalization::Atomic { stats })
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let ck = sample();
        let back = Checkpoint::from_json(&ck.to_json()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.param_set().unwrap(), ck.param_set().unwrap());
    }

    #[test]
    fn tampered_config_detected() {
        let mut ck = sample();
        ck.config.depth = 2;
        assert!(matches!(Checkpoint::from_json(&ck.to_json()), Err(Error::ConfigMismatch { .. })));
    }

    #[test]
    fn missing_file_reported() {
        let err = Checkpoint::read(Path::new("/nonexistent/ck.json")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }
}
