use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Head, ModelConfig};
use crate::error::{Error, Result};

/// Number of per-atom outputs: N, λ, μ (3), Q (5).
pub const ATOM_OUTPUTS: usize = 10;
/// Width of the optional informed per-atom input.
pub const INFORMED_INPUTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Glorot,
    Zeros,
    Ones,
    Embedding,
}

#[derive(Debug, Clone, PartialEq)]
struct Spec {
    name: String,
    rows: usize,
    cols: usize,
    init: Init,
}

#[derive(Default)]
struct Layout {
    specs: Vec<Spec>,
}

impl Layout {
    fn push(&mut self, name: String, rows: usize, cols: usize, init: Init) {
        self.specs.push(Spec { name, rows, cols, init });
    }

    fn linear(&mut self, prefix: &str, k: usize, fan_in: usize, fan_out: usize) {
        self.push(format!("{prefix}.w{k}"), fan_in, fan_out, Init::Glorot);
        self.push(format!("{prefix}.b{k}"), 1, fan_out, Init::Zeros);
    }

    fn mlp(&mut self, prefix: &str, fan_in: usize, hidden: usize, layers: usize, fan_out: usize) {
        let mut d = fan_in;
        for k in 0..layers {
            self.linear(prefix, k, d, hidden);
            d = hidden;
        }
        self.linear(prefix, layers, d, fan_out);
    }

    fn layer_norm(&mut self, prefix: &str, width: usize) {
        self.push(format!("{prefix}.gamma"), 1, width, Init::Ones);
        self.push(format!("{prefix}.beta"), 1, width, Init::Zeros);
    }
}

fn layout(cfg: &ModelConfig) -> Layout {
    let f = cfg.width;
    let (h, hl) = (cfg.mlp_hidden, cfg.mlp_layers);
    let (g, gl) = (cfg.filter_hidden, cfg.filter_layers);
    let extra = if cfg.informed { INFORMED_INPUTS } else { 0 };
    let mut l = Layout::default();
    l.push("embed".into(), 4, f, Init::Embedding);

    l.mlp("enc.node.mlp", 2 * (f + extra), h, hl, f);
    l.mlp("enc.node.filter", cfg.node_geo_dim(), g, gl, f);
    l.layer_norm("enc.node.ln", f);
    l.mlp("enc.edge.mlp_a", f, h, hl, f);
    l.layer_norm("enc.edge.ln_a", f);
    l.mlp("enc.edge.mlp_b", f, h, hl, f);
    l.mlp("enc.edge.filter", cfg.edge_geo_dim(), g, gl, f);
    l.layer_norm("enc.edge.ln", f);

    for k in 0..cfg.depth {
        for (block, geo) in [("e2e", cfg.pair_geo_dim()), ("n2n", cfg.node_geo_dim()), ("n2e", cfg.edge_geo_dim())] {
            let p = format!("layer{k}.{block}");
            l.layer_norm(&format!("{p}.ln_edge"), f);
            l.layer_norm(&format!("{p}.ln_node"), f);
            l.mlp(&format!("{p}.mlp"), 3 * f, h, hl, f);
            l.mlp(&format!("{p}.filter"), geo, g, gl, f);
            l.mlp(&format!("{p}.gate"), f, h, cfg.gate_layers, f);
        }
        let p = format!("layer{k}.node_ff");
        l.layer_norm(&format!("{p}.ln"), f);
        l.push(format!("{p}.reminder"), f, f, Init::Glorot);
        l.mlp(&format!("{p}.mlp"), 2 * f, h, hl, f);
        l.mlp(&format!("{p}.gate"), f, h, cfg.gate_layers, f);
        let p = format!("layer{k}.edge_ff");
        l.layer_norm(&format!("{p}.ln"), f);
        l.mlp(&format!("{p}.mlp"), f, h, hl, f);
        l.mlp(&format!("{p}.gate"), f, h, cfg.gate_layers, f);
        if cfg.head == Head::Atomic {
            let p = format!("layer{k}.head");
            l.layer_norm(&format!("{p}.ln"), f);
            l.mlp(&format!("{p}.mlp"), f, h, hl, f);
            l.linear(&format!("{p}.out"), 0, f, ATOM_OUTPUTS);
        }
    }
    match cfg.head {
        Head::Atomic => l.push("readout.logits".into(), 1, cfg.depth, Init::Zeros),
        Head::Molecular { outputs } => {
            l.layer_norm("mol.ln", f);
            l.mlp("mol.mlp", f, h, hl, outputs);
        }
    }
    l
}

/// Number of trainable scalars for a configuration.
pub fn param_count(cfg: &ModelConfig) -> usize {
    layout(cfg).specs.iter().map(|s| s.rows * s.cols).sum()
}

/// Named parameter matrices in a fixed order determined by the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, usize>,
}

/// Serialized form of one parameter matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamSet {
    /// Seeded initialization: Glorot-uniform weights, zero biases, unit
    /// layer-norm gains, unit-variance embeddings and uniform readout logits.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<ParamSet> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = layout(cfg).specs;
        let mut names = Vec::with_capacity(specs.len());
        let mut values = Vec::with_capacity(specs.len());
        for s in specs {
            let v = match s.init {
                Init::Zeros => Array2::zeros((s.rows, s.cols)),
                Init::Ones => Array2::ones((s.rows, s.cols)),
                Init::Glorot => {
                    let a = (6.0 / (s.rows + s.cols) as f64).sqrt();
                    Array2::from_shape_simple_fn((s.rows, s.cols), || rng.random_range(-a..a))
                }
                Init::Embedding => {
                    let a = 3f64.sqrt();
                    Array2::from_shape_simple_fn((s.rows, s.cols), || rng.random_range(-a..a))
                }
            };
            names.push(s.name);
            values.push(v);
        }
        Ok(ParamSet::assemble(names, values))
    }

    fn assemble(names: Vec<String>, values: Vec<Array2<f64>>) -> ParamSet {
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        ParamSet { names, values, index }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.values
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index_of(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.index_of(name).map(|i| &mut self.values[i])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| ParamRecord { name: n.clone(), rows: v.nrows(), cols: v.ncols(), data: v.iter().copied().collect() })
            .collect()
    }

    /// Rebuilds a parameter set, checking names and shapes against `cfg`.
    pub fn from_records(cfg: &ModelConfig, records: Vec<ParamRecord>) -> Result<ParamSet> {
        let specs = layout(cfg).specs;
        if specs.len() != records.len() {
            return Err(Error::invalid(format!(
                "parameter count mismatch: configuration needs {} matrices, found {}",
                specs.len(),
                records.len()
            )));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut values = Vec::with_capacity(specs.len());
        for (s, r) in specs.into_iter().zip(records) {
            if s.name != r.name || s.rows != r.rows || s.cols != r.cols {
                return Err(Error::invalid(format!(
                    "parameter shape mismatch: expected {} {}x{}, found {} {}x{}",
                    s.name, s.rows, s.cols, r.name, r.rows, r.cols
                )));
            }
            let v = Array2::from_shape_vec((r.rows, r.cols), r.data)
                .map_err(|e| Error::invalid(format!("parameter {}: {e}", r.name)))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(format!("parameter {} has non-finite entries", r.name)));
            }
            names.push(r.name);
            values.push(v);
        }
        Ok(ParamSet::assemble(names, values))
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.values.iter().map(|v| Array2::zeros(v.dim())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qtnet::config::Variant;

    #[test]
    fn default_width_matches_parameter_budget() {
        let n = param_count(&ModelConfig::preset(Variant::Sg8_12));
        let target = 686_049.0;
        assert!(((n as f64) - target).abs() / target < 0.05, "{n}");
        assert_eq!(n, 698_045);
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let cfg = ModelConfig::tiny(Variant::Sg8_12, 2, 8);
        let a = ParamSet::init(&cfg, 3).unwrap();
        let b = ParamSet::init(&cfg, 3).unwrap();
        let c = ParamSet::init(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n_scalars(), param_count(&cfg));
        assert_eq!(a.get("readout.logits").unwrap().dim(), (1, 2));
        assert!(a.get("layer1.head.out.w0").is_some());
        assert!(a.get("layer2.head.out.w0").is_none());
    }

    #[test]
    fn records_roundtrip_and_validate() {
        let cfg = ModelConfig::tiny(Variant::Molecular, 1, 4);
        let p = ParamSet::init(&cfg, 1).unwrap();
        let back = ParamSet::from_records(&cfg, p.to_records()).unwrap();
        assert_eq!(back, p);
        let other = ModelConfig::tiny(Variant::Molecular, 1, 5);
        assert!(ParamSet::from_records(&other, p.to_records()).is_err());
    }
}
