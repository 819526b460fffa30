//! Provenance stamps embedded in every emitted artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance { config_hash: config_hash.into(), version: TOOLKIT_VERSION.to_string(), seed }
    }

    /// Stamp for artifacts produced outside a configured run (tests, ad hoc use).
    pub fn detached(seed: u64) -> Self {
        Provenance::new(hash_bytes(b""), seed)
    }

    /// Single-line form used as the leading comment of CSV and text artifacts.
    pub fn comment_line(&self) -> String {
        format!("# config_hash={} version={} seed={}", self.config_hash, self.version, self.seed)
    }

    pub fn parse_comment_line(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(1, "provenance line must start with '#'"))?;
        let mut hash = None;
        let mut version = None;
        let mut seed = None;
        for tok in body.split_whitespace() {
            match tok.split_once('=') {
                Some(("config_hash", v)) => hash = Some(v.to_string()),
                Some(("version", v)) => version = Some(v.to_string()),
                Some(("seed", v)) => {
                    seed = Some(v.parse::<u64>().map_err(|_| Error::parse(1, format!("bad seed '{v}'")))?)
                }
                _ => {}
            }
        }
        match (hash, version, seed) {
            (Some(config_hash), Some(version), Some(seed)) => Ok(Provenance { config_hash, version, seed }),
            _ => Err(Error::parse(1, "incomplete provenance line")),
        }
    }

    /// Fails with [`Error::ConfigMismatch`] when `other` came from a different config.
    pub fn check_same_config(&self, other: &Provenance) -> Result<()> {
        if self.config_hash != other.config_hash {
            return Err(Error::ConfigMismatch { expected: self.config_hash.clone(), found: other.config_hash.clone() });
        }
        Ok(())
    }
}

/// Lowercase hex SHA-256.
pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Splits a leading provenance comment from text artifacts.
pub fn split_provenance(text: &str) -> Result<(Provenance, &str)> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    Ok((Provenance::parse_comment_line(first.trim_end())?, rest))
}
