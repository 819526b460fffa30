//! Pipeline stages. Each reads its inputs from the output directory, checks
//! that they carry the current config hash, and writes provenance-stamped
//! artifacts. A stage whose outputs already carry the current hash is skipped
//! unless `--force` is given.

mod cluster;
mod dipole;
mod eval;
mod infer;
mod ingest;
mod report;
mod split;
mod stats;
mod train;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use qtkit_core::environments::AtomLabels;
use qtkit_core::ingest::{read_dataset, Dataset};
use qtkit_core::provenance::{split_provenance, Provenance};
use qtkit_core::splits::FoldPlan;

use crate::config::RunConfig;
use crate::error::{AtPath, CliError, Result};

pub use cluster::run as cluster;
pub use dipole::run as dipole;
pub use eval::run as eval;
pub use infer::run as infer;
pub use ingest::run as ingest;
pub use report::run as report;
pub use split::run as split;
pub use stats::run as stats;
pub use train::run as train;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub prov: Provenance,
    pub force: bool,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out_dir: PathBuf, force: bool) -> Ctx {
        let prov = Provenance::new(cfg.hash(), cfg.seed);
        Ctx { cfg, out_dir, prov, force }
    }

    pub fn path(&self, rel: &Path) -> PathBuf {
        self.out_dir.join(rel)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.path(&self.cfg.paths.dataset)
    }

    pub fn labels_path(&self) -> PathBuf {
        self.path(&self.cfg.paths.labels)
    }

    pub fn held_path(&self) -> PathBuf {
        self.labels_path().with_file_name("held.txt")
    }

    pub fn plan_path(&self) -> PathBuf {
        self.path(&self.cfg.paths.plan)
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.path(&self.cfg.paths.checkpoints)
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.path(&self.cfg.paths.reports).join(name)
    }

    /// True when every output exists with the current config hash. An output
    /// stamped with another hash is an error unless `--force` was given.
    pub fn up_to_date(&self, outputs: &[PathBuf]) -> Result<bool> {
        let mut all = true;
        for p in outputs {
            if !p.exists() {
                all = false;
                continue;
            }
            let prov = artifact_provenance(p)?;
            if prov.config_hash != self.prov.config_hash {
                if self.force {
                    all = false;
                    continue;
                }
                return Err(CliError::At {
                    path: p.clone(),
                    source: qtkit_core::Error::ConfigMismatch {
                        expected: self.prov.config_hash.clone(),
                        found: prov.config_hash,
                    },
                });
            }
        }
        Ok(all && !self.force)
    }

    /// Fails unless `path` exists and was produced under the current config.
    pub fn check_input(&self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(qtkit_core::Error::MissingArtifact(path.to_path_buf()).into());
        }
        let prov = artifact_provenance(path)?;
        self.prov.check_same_config(&prov).at(path)
    }

    pub fn read_text(&self, path: &Path) -> Result<String> {
        self.check_input(path)?;
        fs::read_to_string(path).at(path)
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let path = self.dataset_path();
        self.check_input(&path)?;
        read_dataset_file(&path)
    }

    pub fn load_labels(&self) -> Result<AtomLabels> {
        let path = self.labels_path();
        let text = self.read_text(&path)?;
        AtomLabels::from_text(&text).at(&path)
    }

    pub fn load_plan(&self) -> Result<FoldPlan> {
        let path = self.plan_path();
        let text = self.read_text(&path)?;
        FoldPlan::from_json(&text).at(&path)
    }

    /// Text artifact with the provenance comment as its first line.
    pub fn write_stamped(&self, path: &Path, body: &str) -> Result<()> {
        write_file(path, &format!("{}\n{body}", self.prov.comment_line()))
    }
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(qtkit_core::Error::MissingArtifact(path.to_path_buf()).into());
    }
    let f = fs::File::open(path).at(path)?;
    read_dataset(BufReader::new(f)).at(path)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).at(dir)?;
    }
    fs::write(path, contents).at(path)
}

/// Provenance of any artifact: a leading `#` comment line, or a
/// `provenance` field in the first JSON line or the whole JSON document.
pub fn artifact_provenance(path: &Path) -> Result<Provenance> {
    let text = fs::read_to_string(path).at(path)?;
    if text.starts_with('#') {
        return split_provenance(&text).map(|(p, _)| p).at(path);
    }
    let first = text.lines().next().unwrap_or("");
    let from_value = |v: serde_json::Value| -> Option<Provenance> {
        serde_json::from_value(v.get("provenance")?.clone()).ok()
    };
    serde_json::from_str::<serde_json::Value>(first)
        .ok()
        .and_then(from_value)
        .or_else(|| serde_json::from_str::<serde_json::Value>(&text).ok().and_then(from_value))
        .ok_or_else(|| CliError::At {
            path: path.to_path_buf(),
            source: qtkit_core::Error::Parse { line: 1, msg: "artifact carries no provenance".into() },
        })
}

/// Stratum names contain `/`; file names use `_` instead.
pub fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}
