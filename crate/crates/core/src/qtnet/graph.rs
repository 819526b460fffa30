use std::rc::Rc;

use log::warn;
use ndarray::Array2;

use super::config::{Connectivity, ModelConfig};
use crate::error::{Error, Result};
use crate::geometry::{gyration_tensor, legendre_basis, rbf_basis_into, Traceless5, Vec3};
use crate::ingest::{Element, MoleculeRecord};

/// Below this Frobenius norm the relative gyration of two edges is treated as zero.
const RELATIVE_GYRATION_FLOOR: f64 = 1e-9;

/// Directed molecular graph with per-edge geometry.
///
/// Edge `(i, j)` carries information from sender `j` to receiver `i`;
/// `rhat` points from the receiver to the sender.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    pub species: Vec<Element>,
    pub positions: Vec<Vec3>,
    pub edges: Vec<(usize, usize)>,
    pub rhat: Vec<Vec3>,
    pub dist: Vec<f64>,
    pub gyration: Vec<Traceless5>,
}

impl GraphInstance {
    pub fn n_nodes(&self) -> usize {
        self.species.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn in_degree(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes()];
        for &(i, _) in &self.edges {
            d[i] += 1;
        }
        d
    }
}

pub fn build_graph(mol: &MoleculeRecord, cfg: &ModelConfig) -> Result<GraphInstance> {
    mol.validate()?;
    let g = build_graph_from(&mol.elements, &mol.positions, cfg.connectivity)
        .map_err(|e| Error::invalid(format!("molecule {}: {e}", mol.id)))?;
    if let Some(r) = g.dist.iter().copied().find(|&r| r > cfg.rbf_cutoff) {
        return Err(Error::invalid(format!(
            "molecule {}: edge length {r:.3} exceeds the radial-basis cutoff {}",
            mol.id, cfg.rbf_cutoff
        )));
    }
    let sparse = g.in_degree().iter().filter(|&&d| d < 2).count();
    if sparse > 0 {
        warn!("molecule {}: {sparse} atom(s) with fewer than 2 neighbors", mol.id);
    }
    Ok(g)
}

/// Graph construction from raw species and positions (Bohr).
pub fn build_graph_from(species: &[Element], positions: &[Vec3], conn: Connectivity) -> Result<GraphInstance> {
    let n = species.len();
    if n != positions.len() {
        return Err(Error::invalid("species and positions differ in length"));
    }
    if n < 2 {
        return Err(Error::invalid(format!("degenerate graph: {n} atom(s), at least 2 required")));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| ((positions[j] - positions[i]).norm(), j)).collect();
        if let Connectivity::Cutoff { cutoff, max_nn } = conn {
            cand.retain(|&(r, _)| r <= cutoff);
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(max_nn);
            cand.sort_by_key(|c| c.1);
        }
        edges.extend(cand.into_iter().map(|(_, j)| (i, j)));
    }
    if edges.is_empty() {
        return Err(Error::invalid("degenerate graph: no atom pair within the cutoff"));
    }
    let mut rhat = Vec::with_capacity(edges.len());
    let mut dist = Vec::with_capacity(edges.len());
    let mut gyration = Vec::with_capacity(edges.len());
    for &(i, j) in &edges {
        let d = positions[j] - positions[i];
        let u = d.normalized().ok_or_else(|| Error::invalid(format!("atoms {i} and {j} coincide")))?;
        rhat.push(u);
        dist.push(d.norm());
        gyration.push(gyration_tensor(u)?);
    }
    Ok(GraphInstance { species: species.to_vec(), positions: positions.to_vec(), edges, rhat, dist, gyration })
}

/// Disjoint union of graphs with all index lists and filter inputs the
/// forward pass needs.
pub struct Batch {
    pub n_graphs: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub species: Rc<Vec<usize>>,
    pub node_graph: Rc<Vec<usize>>,
    pub recv: Rc<Vec<usize>>,
    pub send: Rc<Vec<usize>>,
    pub edge_ids: Rc<Vec<usize>>,
    /// `[r̂, RBF]` per edge (RBF only without directional filters).
    pub geo_node: Array2<f64>,
    /// `[Ĝ, RBF]` per edge.
    pub geo_edge: Array2<f64>,
    pub ee_recv: Rc<Vec<usize>>,
    pub ee_send: Rc<Vec<usize>>,
    pub ee_mid: Rc<Vec<usize>>,
    /// `[Ĝ_rs, P_0..P_L(cos)]` per edge pair.
    pub geo_pair: Array2<f64>,
    pub ne_recv: Rc<Vec<usize>>,
    pub ne_send: Rc<Vec<usize>>,
    pub ne_mid: Rc<Vec<usize>>,
    /// Optional per-atom extra inputs for the node encoder.
    pub node_extra: Option<Array2<f64>>,
}

impl Batch {
    pub fn new(graphs: &[&GraphInstance], cfg: &ModelConfig, node_extra: Option<Array2<f64>>) -> Result<Batch> {
        let n_nodes: usize = graphs.iter().map(|g| g.n_nodes()).sum();
        let n_edges: usize = graphs.iter().map(|g| g.n_edges()).sum();
        if let Some(x) = &node_extra {
            if x.nrows() != n_nodes {
                return Err(Error::invalid(format!("node extras have {} rows for {n_nodes} nodes", x.nrows())));
            }
        }
        let dir = cfg.directional_filters;
        let mut species = Vec::with_capacity(n_nodes);
        let mut node_graph = Vec::with_capacity(n_nodes);
        let mut recv = Vec::with_capacity(n_edges);
        let mut send = Vec::with_capacity(n_edges);
        let mut geo_node = Array2::zeros((n_edges, cfg.node_geo_dim()));
        let mut geo_edge = Array2::zeros((n_edges, cfg.edge_geo_dim()));
        let (mut ee_recv, mut ee_send, mut ee_mid) = (Vec::new(), Vec::new(), Vec::new());
        let mut pair_rows: Vec<f64> = Vec::new();
        let (mut ne_recv, mut ne_send, mut ne_mid) = (Vec::new(), Vec::new(), Vec::new());
        let mut rbf = vec![0.0; cfg.n_rbf];
        let (mut node_off, mut edge_off) = (0, 0);
        for (gi, g) in graphs.iter().enumerate() {
            species.extend(g.species.iter().map(|e| e.index()));
            node_graph.extend(std::iter::repeat_n(gi, g.n_nodes()));
            let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.n_nodes()];
            for (k, &(i, j)) in g.edges.iter().enumerate() {
                incident[i].push(k);
                incident[j].push(k);
            }
            for (k, &(i, j)) in g.edges.iter().enumerate() {
                let e = edge_off + k;
                recv.push(node_off + i);
                send.push(node_off + j);
                rbf_basis_into(g.dist[k], cfg.rbf_cutoff, &mut rbf)?;
                let mut c = 0;
                if dir {
                    for v in g.rhat[k].to_array() {
                        geo_node[(e, c)] = v;
                        c += 1;
                    }
                }
                for &v in &rbf {
                    geo_node[(e, c)] = v;
                    c += 1;
                }
                let mut c = 0;
                if dir {
                    for v in g.gyration[k].to_array() {
                        geo_edge[(e, c)] = v;
                        c += 1;
                    }
                }
                for &v in &rbf {
                    geo_edge[(e, c)] = v;
                    c += 1;
                }
                for (shared, other) in [(i, j), (j, i)] {
                    ne_recv.push(e);
                    ne_send.push(node_off + shared);
                    ne_mid.push(node_off + other);
                }
                for shared in [i, j] {
                    for &s in &incident[shared] {
                        let (a, b) = g.edges[s];
                        if s == k || (a == j && b == i) {
                            continue;
                        }
                        ee_recv.push(e);
                        ee_send.push(edge_off + s);
                        ee_mid.push(node_off + shared);
                        let (gr, gs) = (g.gyration[k], g.gyration[s]);
                        if dir {
                            let diff = gr.sub(gs);
                            let norm = diff.frob_norm();
                            let rel =
                                if norm < RELATIVE_GYRATION_FLOOR { Traceless5::ZERO } else { diff.scale(1.0 / norm) };
                            pair_rows.extend(rel.to_array());
                        }
                        pair_rows.extend(legendre_basis(gr.frob_dot(gs), cfg.legendre_degree));
                    }
                }
            }
            node_off += g.n_nodes();
            edge_off += g.n_edges();
        }
        let n_pairs = ee_recv.len();
        let geo_pair = Array2::from_shape_vec((n_pairs, cfg.pair_geo_dim()), pair_rows).expect("pair feature layout");
        Ok(Batch {
            n_graphs: graphs.len(),
            n_nodes,
            n_edges,
            species: Rc::new(species),
            node_graph: Rc::new(node_graph),
            recv: Rc::new(recv),
            send: Rc::new(send),
            edge_ids: Rc::new((0..n_edges).collect()),
            geo_node,
            geo_edge,
            ee_recv: Rc::new(ee_recv),
            ee_send: Rc::new(ee_send),
            ee_mid: Rc::new(ee_mid),
            geo_pair,
            ne_recv: Rc::new(ne_recv),
            ne_send: Rc::new(ne_send),
            ne_mid: Rc::new(ne_mid),
            node_extra,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.ee_recv.len()
    }
}
