use std::rc::Rc;

use ndarray::Array2;

use super::config::{Head, ModelConfig};
use super::graph::Batch;
use super::params::ParamSet;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Result of a forward pass recorded on a tape.
pub struct Forward {
    /// Per-atom (`n_nodes × 10`) or per-graph (`n_graphs × outputs`) predictions.
    pub output: Var,
    /// Per-layer atomic head outputs; empty for the molecular head.
    pub layer_outputs: Vec<Var>,
    /// Softmax readout weights (`1 × depth`) for the atomic head.
    pub alpha: Option<Var>,
}

struct Ctx<'a> {
    tape: &'a mut Tape,
    cfg: &'a ModelConfig,
    params: &'a ParamSet,
    cache: Vec<Option<Var>>,
}

impl Ctx<'_> {
    fn p(&mut self, name: &str) -> Var {
        let i = self.params.index_of(name).unwrap_or_else(|| panic!("parameter {name} missing from layout"));
        if let Some(v) = self.cache[i] {
            return v;
        }
        let v = self.tape.param(i, self.params.values()[i].clone());
        self.cache[i] = Some(v);
        v
    }

    fn linear(&mut self, x: Var, prefix: &str, k: usize) -> Var {
        let w = self.p(&format!("{prefix}.w{k}"));
        let b = self.p(&format!("{prefix}.b{k}"));
        let y = self.tape.matmul(x, w);
        self.tape.add_bias(y, b)
    }

    fn mlp(&mut self, mut x: Var, prefix: &str, hidden_layers: usize) -> Var {
        for k in 0..hidden_layers {
            let y = self.linear(x, prefix, k);
            x = self.tape.silu(y);
        }
        self.linear(x, prefix, hidden_layers)
    }

    /// The standard MLP applied to the row-wise concatenation of `parts`,
    /// each optionally gathered by an index. The first layer multiplies each
    /// part by its block of `w0` before gathering, so the wide concatenated
    /// matrix is never formed.
    fn std_mlp_cat(&mut self, parts: &[(Var, Option<&Rc<Vec<usize>>>)], prefix: &str) -> Var {
        let w = self.p(&format!("{prefix}.w0"));
        let b = self.p(&format!("{prefix}.b0"));
        let mut start = 0;
        let mut projected = Vec::with_capacity(parts.len());
        for &(x, idx) in parts {
            let k = self.tape.value(x).ncols();
            let block = self.tape.rows(w, start, k);
            start += k;
            projected.push((self.tape.matmul(x, block), idx));
        }
        assert_eq!(start, self.tape.value(w).nrows(), "{prefix}: concatenated width");
        let y = self.tape.gather_sum(&projected);
        let mut x = self.tape.add_bias(y, b);
        let hidden = self.cfg.mlp_layers;
        for k in 1..=hidden {
            x = self.tape.silu(x);
            x = self.linear(x, prefix, k);
        }
        x
    }

    fn std_mlp(&mut self, x: Var, prefix: &str) -> Var {
        self.mlp(x, prefix, self.cfg.mlp_layers)
    }

    fn filter(&mut self, geo: Var, prefix: &str) -> Var {
        let y = self.mlp(geo, prefix, self.cfg.filter_layers);
        self.tape.tanh(y)
    }

    fn ln(&mut self, x: Var, prefix: &str) -> Var {
        let g = self.p(&format!("{prefix}.gamma"));
        let b = self.p(&format!("{prefix}.beta"));
        self.tape.layer_norm(x, g, b)
    }

    /// `h + sigmoid(gate(h)) ⊙ m`.
    fn residual(&mut self, h: Var, prefix: &str, m: Var) -> Var {
        let g = self.mlp(h, &format!("{prefix}.gate"), self.cfg.gate_layers);
        let g = self.tape.sigmoid(g);
        let upd = self.tape.mul(g, m);
        self.tape.add(h, upd)
    }

    fn check_finite(&self, vars: &[Var], stage: &str) -> Result<()> {
        for v in vars {
            if self.tape.value(*v).iter().any(|x| !x.is_finite()) {
                return Err(Error::numeric(format!("non-finite features after {stage}")));
            }
        }
        Ok(())
    }
}

/// Records the forward pass for `batch` on `tape`.
pub fn forward(tape: &mut Tape, cfg: &ModelConfig, params: &ParamSet, batch: &Batch) -> Result<Forward> {
    if cfg.informed != batch.node_extra.is_some() {
        return Err(Error::invalid("informed configuration and batch node inputs disagree"));
    }
    let n = batch.n_nodes;
    let ne = batch.n_edges;
    let mut c = Ctx { tape, cfg, params, cache: vec![None; params.len()] };

    let geo_node = c.tape.constant(batch.geo_node.clone());
    let geo_edge = c.tape.constant(batch.geo_edge.clone());
    let geo_pair = c.tape.constant(batch.geo_pair.clone());

    let embed = c.p("embed");
    let emb = c.tape.gather(embed, &batch.species);
    let node_in = match &batch.node_extra {
        Some(x) => {
            let x = c.tape.constant(x.clone());
            c.tape.concat(&[emb, x])
        }
        None => emb,
    };

    // node encoder
    let m = c.std_mlp_cat(&[(node_in, Some(&batch.recv)), (node_in, Some(&batch.send))], "enc.node.mlp");
    let f = c.filter(geo_node, "enc.node.filter");
    let m = c.tape.mul(m, f);
    let s = c.tape.scatter_sum(m, &batch.recv, n);
    let mut h = c.ln(s, "enc.node.ln");

    // edge encoder
    let a = c.std_mlp(h, "enc.edge.mlp_a");
    let ar = c.tape.gather(a, &batch.recv);
    let as_ = c.tape.gather(a, &batch.send);
    let s = c.tape.add(ar, as_);
    let s = c.ln(s, "enc.edge.ln_a");
    let m = c.std_mlp(s, "enc.edge.mlp_b");
    let f = c.filter(geo_edge, "enc.edge.filter");
    let m = c.tape.mul(m, f);
    let mut e = c.ln(m, "enc.edge.ln");
    c.check_finite(&[h, e], "encoders")?;

    let mut layer_outputs = Vec::new();
    for k in 0..cfg.depth {
        // edge <- edge through the shared node
        let p = format!("layer{k}.e2e");
        let te = c.ln(e, &format!("{p}.ln_edge"));
        let tn = c.ln(h, &format!("{p}.ln_node"));
        let parts = [(te, Some(&batch.ee_recv)), (te, Some(&batch.ee_send)), (tn, Some(&batch.ee_mid))];
        let m = c.std_mlp_cat(&parts, &format!("{p}.mlp"));
        let f = c.filter(geo_pair, &format!("{p}.filter"));
        let m = c.tape.mul(m, f);
        let m = c.tape.scatter_sum(m, &batch.ee_recv, ne);
        e = c.residual(e, &p, m);

        // node <- node through the connecting edge
        let p = format!("layer{k}.n2n");
        let te = c.ln(e, &format!("{p}.ln_edge"));
        let tn = c.ln(h, &format!("{p}.ln_node"));
        let parts = [(tn, Some(&batch.recv)), (tn, Some(&batch.send)), (te, None)];
        let m = c.std_mlp_cat(&parts, &format!("{p}.mlp"));
        let f = c.filter(geo_node, &format!("{p}.filter"));
        let m = c.tape.mul(m, f);
        let m = c.tape.scatter_sum(m, &batch.recv, n);
        h = c.residual(h, &p, m);

        // edge <- its two end nodes, the other end as intermediary
        let p = format!("layer{k}.n2e");
        let te = c.ln(e, &format!("{p}.ln_edge"));
        let tn = c.ln(h, &format!("{p}.ln_node"));
        let parts = [(te, Some(&batch.ne_recv)), (tn, Some(&batch.ne_send)), (tn, Some(&batch.ne_mid))];
        let m = c.std_mlp_cat(&parts, &format!("{p}.mlp"));
        let f = c.filter(geo_edge, &format!("{p}.filter"));
        let f = c.tape.gather(f, &batch.ne_recv);
        let m = c.tape.mul(m, f);
        let m = c.tape.scatter_sum(m, &batch.ne_recv, ne);
        e = c.residual(e, &p, m);

        // node feed-forward with the element reminder
        let p = format!("layer{k}.node_ff");
        let tn = c.ln(h, &format!("{p}.ln"));
        let w = c.p(&format!("{p}.reminder"));
        let rem = c.tape.matmul(emb, w);
        let x = c.tape.concat(&[tn, rem]);
        let m = c.std_mlp(x, &format!("{p}.mlp"));
        h = c.residual(h, &p, m);

        let p = format!("layer{k}.edge_ff");
        let te = c.ln(e, &format!("{p}.ln"));
        let m = c.std_mlp(te, &format!("{p}.mlp"));
        e = c.residual(e, &p, m);
        c.check_finite(&[h, e], &format!("layer {k}"))?;

        if cfg.head == Head::Atomic {
            let p = format!("layer{k}.head");
            let x = c.ln(h, &format!("{p}.ln"));
            let x = c.std_mlp(x, &format!("{p}.mlp"));
            layer_outputs.push(c.linear(x, &format!("{p}.out"), 0));
        }
    }

    let (output, alpha) = match cfg.head {
        Head::Atomic => {
            let logits = c.p("readout.logits");
            let alpha = c.tape.softmax(logits);
            let mut acc = None;
            for (l, y) in layer_outputs.iter().enumerate() {
                let a = c.tape.select(alpha, l);
                let term = c.tape.scale_by(*y, a);
                acc = Some(match acc {
                    Some(prev) => c.tape.add(prev, term),
                    None => term,
                });
            }
            (acc.expect("depth >= 1"), Some(alpha))
        }
        Head::Molecular { .. } => {
            let x = c.ln(h, "mol.ln");
            let pooled = c.tape.scatter_sum(x, &batch.node_graph, batch.n_graphs);
            (c.std_mlp(pooled, "mol.mlp"), None)
        }
    };
    c.check_finite(&[output], "readout")?;
    Ok(Forward { output, layer_outputs, alpha })
}

/// Forward pass without keeping the tape.
pub fn predict(cfg: &ModelConfig, params: &ParamSet, batch: &Batch) -> Result<Array2<f64>> {
    let mut tape = Tape::new();
    let out = forward(&mut tape, cfg, params, batch)?;
    Ok(tape.value(out.output).clone())
}
