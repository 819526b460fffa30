//! Run configuration: one TOML file with a block per stage. Command-line
//! `--set block.key=value` overrides are applied to the parsed TOML before
//! it is deserialized, so they accept exactly the keys the file does.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qtkit_core::downstream::Aggregation;
use qtkit_core::environments::{ClusterParams, ElementClustering, PcaTarget, SoapParams};
use qtkit_core::ingest::Element;
use qtkit_core::provenance::hash_bytes;
use qtkit_core::qtnet::{Hyperparams, LossKind, ModelConfig, Variant};
use qtkit_core::splits::AcyclicPolicy;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub ingest: IngestBlock,
    pub cluster: ClusterBlock,
    pub split: SplitBlock,
    pub train: TrainBlock,
    pub eval: EvalBlock,
    pub experiment: ExperimentBlock,
    pub infer: InferBlock,
    pub dipole: DipoleBlock,
}

/// Artifact locations relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub labels: PathBuf,
    pub plan: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            dataset: "dataset.jsonl".into(),
            labels: "labels.txt".into(),
            plan: "plan.json".into(),
            checkpoints: "checkpoints".into(),
            reports: "reports".into(),
        }
    }
}

/// Input paths here are resolved against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestBlock {
    pub xyz_dir: Option<PathBuf>,
    pub sumviz_dir: Option<PathBuf>,
    pub exclusions: Option<PathBuf>,
    pub strict_targets: bool,
    pub require_properties: bool,
    pub require_targets: bool,
}

impl Default for IngestBlock {
    fn default() -> Self {
        IngestBlock {
            xyz_dir: None,
            sumviz_dir: None,
            exclusions: None,
            strict_targets: true,
            require_properties: true,
            require_targets: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementBlock {
    pub element: Element,
    /// Fixed component count; takes precedence over `pca_variance`.
    #[serde(default)]
    pub pca_components: Option<usize>,
    #[serde(default)]
    pub pca_variance: Option<f64>,
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl ElementBlock {
    fn to_core(self) -> Result<ElementClustering> {
        let pca = match (self.pca_components, self.pca_variance) {
            (Some(k), _) => PcaTarget::Components(k),
            (None, Some(v)) => PcaTarget::Variance(v),
            (None, None) => PcaTarget::Variance(0.99),
        };
        Ok(ElementClustering {
            element: self.element,
            pca,
            cluster: ClusterParams { min_cluster_size: self.min_cluster_size, min_samples: self.min_samples },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterBlock {
    pub cutoff: f64,
    pub n_max: usize,
    pub l_max: usize,
    pub sigma: f64,
    pub elements: Vec<ElementBlock>,
    /// Held-out labels such as `N_13`. When empty the rarest label whose
    /// expansion holds out between `min_share` and `max_share` of the
    /// molecules is chosen.
    pub held: Vec<String>,
    /// Close the held set under co-occurrence at `expand_threshold`.
    pub expand: bool,
    pub expand_threshold: f64,
    pub min_share: f64,
    pub max_share: f64,
}

impl Default for ClusterBlock {
    fn default() -> Self {
        let soap = SoapParams::default();
        let elements = ElementClustering::reference()
            .iter()
            .map(|e| ElementBlock {
                element: e.element,
                pca_components: match e.pca {
                    PcaTarget::Components(k) => Some(k),
                    PcaTarget::Variance(_) => None,
                },
                pca_variance: None,
                min_cluster_size: e.cluster.min_cluster_size,
                min_samples: e.cluster.min_samples,
            })
            .collect();
        ClusterBlock {
            cutoff: soap.cutoff,
            n_max: soap.n_max,
            l_max: soap.l_max,
            sigma: soap.sigma,
            elements,
            held: Vec::new(),
            expand: true,
            expand_threshold: 0.9,
            min_share: 0.05,
            max_share: 0.4,
        }
    }
}

impl ClusterBlock {
    pub fn soap(&self) -> SoapParams {
        SoapParams { cutoff: self.cutoff, n_max: self.n_max, l_max: self.l_max, sigma: self.sigma }
    }

    pub fn per_element(&self) -> Result<Vec<ElementClustering>> {
        self.elements.iter().map(|e| e.to_core()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitBlock {
    /// One seed per repeat; defaults to `seed, seed+1, ...` for 5 repeats.
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub acyclic: AcyclicPolicy,
}

impl Default for SplitBlock {
    fn default() -> Self {
        SplitBlock { seeds: Vec::new(), folds: 5, acyclic: AcyclicPolicy::Shared }
    }
}

/// Architecture and optimizer overrides on top of a variant preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOverrides {
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub loss: Option<LossKind>,
}

impl ModelOverrides {
    pub fn model(&self, variant: Variant) -> ModelConfig {
        let mut cfg = ModelConfig::preset(variant);
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(w) = self.width {
            cfg = ModelConfig { width: w, mlp_hidden: w, filter_hidden: w, ..cfg };
        }
        cfg
    }

    pub fn hyper(&self, variant: Variant, seed: u64) -> Hyperparams {
        let mut h = Hyperparams::preset(variant);
        h.seed = seed;
        if let Some(v) = self.epochs {
            h.epochs = v;
        }
        if let Some(v) = self.lr {
            h.lr = v;
        }
        if let Some(v) = self.batch_size {
            h.batch_size = v;
        }
        if let Some(v) = self.weight_decay {
            h.weight_decay = v;
        }
        if let Some(v) = self.loss {
            h.loss = v;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainBlock {
    pub variants: Vec<Variant>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub loss: Option<LossKind>,
}

impl Default for TrainBlock {
    fn default() -> Self {
        TrainBlock {
            variants: vec![Variant::Sg8_12],
            depth: None,
            width: None,
            epochs: None,
            lr: None,
            batch_size: None,
            weight_decay: None,
            loss: None,
        }
    }
}

macro_rules! overrides_of {
    ($t:ty) => {
        impl $t {
            pub fn overrides(&self) -> ModelOverrides {
                ModelOverrides {
                    depth: self.depth,
                    width: self.width,
                    epochs: self.epochs,
                    lr: self.lr,
                    batch_size: self.batch_size,
                    weight_decay: self.weight_decay,
                    loss: self.loss,
                }
            }
        }
    };
}

overrides_of!(TrainBlock);
overrides_of!(ExperimentBlock);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalBlock {
    pub batch_size: usize,
}

impl Default for EvalBlock {
    fn default() -> Self {
        EvalBlock { batch_size: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QtaSource {
    /// Ground-truth per-atom targets from the dataset.
    Truth,
    /// The ensemble-inferred table written by `infer`.
    Inferred,
}

/// Informed-vs-blind molecular experiment, run by `eval` when enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub enabled: bool,
    pub fractions: Vec<f64>,
    pub properties: Vec<String>,
    pub val_share: f64,
    pub informed_inputs: QtaSource,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub loss: Option<LossKind>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        let grid = qtkit_core::downstream::ExperimentGrid::default();
        ExperimentBlock {
            enabled: false,
            fractions: grid.fractions,
            properties: grid.properties,
            val_share: grid.val_share,
            informed_inputs: QtaSource::Truth,
            depth: None,
            width: None,
            epochs: None,
            lr: None,
            batch_size: None,
            weight_decay: None,
            loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferBlock {
    /// Trained variant whose checkpoints form the ensemble; defaults to the
    /// first entry of `train.variants`.
    pub variant: Option<Variant>,
    /// Molecules to annotate; defaults to the run's dataset.
    pub dataset: Option<PathBuf>,
    pub aggregation: Aggregation,
    pub batch_size: usize,
}

impl Default for InferBlock {
    fn default() -> Self {
        InferBlock { variant: None, dataset: None, aggregation: Aggregation::Mean, batch_size: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipoleBlock {
    pub source: QtaSource,
}

impl Default for DipoleBlock {
    fn default() -> Self {
        DipoleBlock { source: QtaSource::Truth }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let origin = path.map_or_else(|| PathBuf::from("<defaults>"), Path::to_path_buf);
        let err = |msg: String| CliError::Config { path: origin.clone(), msg };
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| err(e.to_string()))?;
                text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o).map_err(err)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| err(e.to_string()))?;
        cfg.validate().map_err(err)?;
        Ok(cfg)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.split.folds < 2 {
            return Err("split.folds must be at least 2".into());
        }
        if self.train.variants.is_empty() {
            return Err("train.variants must name at least one variant".into());
        }
        if self.train.variants.contains(&Variant::Molecular) {
            return Err("train.variants trains atomic models; the molecular variant belongs to [experiment]".into());
        }
        if !(self.cluster.min_share < self.cluster.max_share) {
            return Err("cluster.min_share must be below cluster.max_share".into());
        }
        Ok(())
    }

    pub fn split_seeds(&self) -> Vec<u64> {
        if self.split.seeds.is_empty() {
            (0..5).map(|i| self.seed.wrapping_add(i)).collect()
        } else {
            self.split.seeds.clone()
        }
    }

    /// SHA-256 of the canonical JSON form; recorded in every artifact.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hash_bytes(&json)
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, falling back to a string.
fn apply_override(table: &mut toml::Table, spec: &str) -> std::result::Result<(), String> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| format!("override '{spec}' is not key=value"))?;
    let value = parse_literal(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("override '{spec}' has an empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("override '{spec}': '{p}' is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
