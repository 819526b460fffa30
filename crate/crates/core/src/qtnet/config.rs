use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::hash_bytes;

/// Block sequence run inside every message-passing layer.
pub const LAYER_ORDER: &str = "edge<-edge,node<-node,edge<-node,node-ff,edge-ff";

/// Distance cap for radial features of fully connected graphs (Bohr).
pub const FULL_GRAPH_RBF_CUTOFF: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "SG-8-12")]
    Sg8_12,
    #[serde(rename = "SG-8-5")]
    Sg8_5,
    #[serde(rename = "SFC2")]
    Sfc2,
    #[serde(rename = "SGFC")]
    Sgfc,
    #[serde(rename = "SGNN")]
    Sgnn,
    #[serde(rename = "molecular")]
    Molecular,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Sg8_12, Variant::Sg8_5, Variant::Sfc2, Variant::Sgfc, Variant::Sgnn, Variant::Molecular];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sg8_12 => "SG-8-12",
            Variant::Sg8_5 => "SG-8-5",
            Variant::Sfc2 => "SFC2",
            Variant::Sgfc => "SGFC",
            Variant::Sgnn => "SGNN",
            Variant::Molecular => "molecular",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown model variant '{s}'")))
    }
}

/// How edges are drawn between atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Connectivity {
    /// Every ordered pair of distinct atoms.
    Full,
    /// Per receiver, up to `max_nn` nearest senders with `r <= cutoff`.
    Cutoff { cutoff: f64, max_nn: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// Per-atom 10-component output from a softmax-weighted sum of per-layer heads.
    Atomic,
    /// Sum-pooled molecular head with `outputs` values per molecule.
    Molecular { outputs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub depth: usize,
    /// Node and edge feature width; also the element embedding size.
    pub width: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub filter_hidden: usize,
    pub filter_layers: usize,
    pub gate_layers: usize,
    pub n_rbf: usize,
    pub legendre_degree: usize,
    pub connectivity: Connectivity,
    pub rbf_cutoff: f64,
    pub augment: bool,
    /// Feed raw r̂ / Ĝ components to the geometric filters.
    pub directional_filters: bool,
    pub head: Head,
    /// Concatenate per-atom QTA values to the node-encoder inputs.
    pub informed: bool,
    pub layer_order: String,
}

impl ModelConfig {
    pub fn preset(variant: Variant) -> ModelConfig {
        let mut cfg = ModelConfig {
            variant,
            depth: 7,
            width: 48,
            mlp_hidden: 48,
            mlp_layers: 2,
            filter_hidden: 48,
            filter_layers: 1,
            gate_layers: 1,
            n_rbf: 16,
            legendre_degree: 6,
            connectivity: Connectivity::Cutoff { cutoff: 8.0, max_nn: 12 },
            rbf_cutoff: 8.0,
            augment: true,
            directional_filters: true,
            head: Head::Atomic,
            informed: false,
            layer_order: LAYER_ORDER.to_string(),
        };
        match variant {
            Variant::Sg8_12 => {}
            Variant::Sg8_5 => cfg.connectivity = Connectivity::Cutoff { cutoff: 8.0, max_nn: 5 },
            Variant::Sfc2 | Variant::Sgfc => {
                cfg.connectivity = Connectivity::Full;
                cfg.rbf_cutoff = FULL_GRAPH_RBF_CUTOFF;
                cfg.augment = variant == Variant::Sfc2;
            }
            Variant::Sgnn => {
                cfg.connectivity = Connectivity::Cutoff { cutoff: 5.25, max_nn: 5 };
                cfg.rbf_cutoff = 5.25;
                cfg.augment = false;
            }
            Variant::Molecular => {
                cfg.depth = 4;
                cfg.connectivity = Connectivity::Cutoff { cutoff: 3.5, max_nn: 4 };
                cfg.rbf_cutoff = 3.5;
                cfg.augment = false;
                cfg.directional_filters = false;
                cfg.head = Head::Molecular { outputs: 1 };
            }
        }
        cfg
    }

    /// A small configuration for tests and desk-scale experiments.
    pub fn tiny(variant: Variant, depth: usize, width: usize) -> ModelConfig {
        ModelConfig { depth, width, mlp_hidden: width, filter_hidden: width, ..ModelConfig::preset(variant) }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("depth", self.depth),
            ("width", self.width),
            ("mlp_hidden", self.mlp_hidden),
            ("filter_hidden", self.filter_hidden),
            ("n_rbf", self.n_rbf),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("model config: {name} must be positive")));
            }
        }
        if !(self.rbf_cutoff > 0.0) {
            return Err(Error::invalid("model config: rbf_cutoff must be positive"));
        }
        if let Connectivity::Cutoff { cutoff, max_nn } = self.connectivity {
            if !(cutoff > 0.0) || max_nn == 0 {
                return Err(Error::invalid("model config: cutoff and max_nn must be positive"));
            }
            if cutoff > self.rbf_cutoff {
                return Err(Error::invalid("model config: graph cutoff exceeds rbf_cutoff"));
            }
        }
        if let Head::Molecular { outputs: 0 } = self.head {
            return Err(Error::invalid("model config: molecular head needs at least one output"));
        }
        if self.informed && self.head == Head::Atomic {
            return Err(Error::invalid("model config: informed inputs are only defined for the molecular head"));
        }
        if self.layer_order != LAYER_ORDER {
            return Err(Error::invalid(format!(
                "model config: unsupported layer order '{}' (expected '{LAYER_ORDER}')",
                self.layer_order
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hash_bytes(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// Width of the radial/directional input to the node-message filters.
    pub(crate) fn node_geo_dim(&self) -> usize {
        self.n_rbf + if self.directional_filters { 3 } else { 0 }
    }

    pub(crate) fn edge_geo_dim(&self) -> usize {
        self.n_rbf + if self.directional_filters { 5 } else { 0 }
    }

    pub(crate) fn pair_geo_dim(&self) -> usize {
        self.legendre_degree + 1 + if self.directional_filters { 5 } else { 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementWeighting {
    /// `w_Z = sqrt(N_at / N_Z)` over the training atoms.
    SqrtInverseFrequency,
    /// `w_Z = 1 / N_Z`, so the weights of each element sum to one.
    PerElementSumToOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// Per-atom mean of the four property terms with component averaging.
    V1,
    /// Element-weighted terms with full vector and Frobenius tensor norms.
    V2 { weighting: ElementWeighting },
    /// Plain mean squared error (molecular head).
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Hyperparams {
    pub fn preset(variant: Variant) -> Hyperparams {
        let v2 = LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency };
        let (batch_size, epochs, lr, weight_decay, loss) = match variant {
            Variant::Sg8_12 => (256, 2000, 3.8e-3, 1.1e-4, v2),
            Variant::Sg8_5 => (2048, 2000, 3.8e-3, 1.1e-4, v2),
            Variant::Sfc2 => (256, 2000, 2.7e-3, 1.6e-4, v2),
            Variant::Sgfc => (128, 3000, 2.7e-3, 1.6e-4, LossKind::V1),
            Variant::Sgnn => (1024, 3000, 5.5e-3, 9.1e-4, LossKind::V1),
            Variant::Molecular => (256, 2000, 3.8e-3, 1.1e-4, LossKind::Mse),
        };
        Hyperparams { lr, weight_decay, batch_size, epochs, seed: 0, loss }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) || self.batch_size == 0 {
            return Err(Error::invalid("hyperparameters: lr > 0, weight_decay >= 0 and batch_size >= 1 required"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip() {
        for v in Variant::ALL {
            let cfg = ModelConfig::preset(v);
            cfg.validate().unwrap();
            let back: ModelConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn hash_changes_with_config() {
        let a = ModelConfig::preset(Variant::Sg8_12);
        let mut b = a.clone();
        b.depth = 6;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ModelConfig::preset(Variant::Sg8_12).hash());
    }

    #[test]
    fn table_hyperparameters() {
        let h = Hyperparams::preset(Variant::Sgnn);
        assert_eq!((h.batch_size, h.epochs, h.lr, h.weight_decay), (1024, 3000, 5.5e-3, 9.1e-4));
        assert_eq!(Hyperparams::preset(Variant::Sgfc).loss, LossKind::V1);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ModelConfig::preset(Variant::Sg8_12);
        c.depth = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::preset(Variant::Sg8_12);
        c.layer_order = "node-ff".into();
        assert!(c.validate().is_err());
        let mut c = ModelConfig::preset(Variant::Sg8_12);
        c.informed = true;
        assert!(c.validate().is_err());
    }
}
