//! Hierarchical density-based clustering with excess-of-mass selection.
//!
//! Core distance is the distance to the `min_samples`-th nearest sample,
//! counting the sample itself. Single-linkage merges of equal mutual
//! reachability are applied simultaneously, so the hierarchy is n-ary and
//! independent of tie order. Stability uses λ = 1/distance.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::invalid("min_cluster_size must be at least 2"));
        }
        if self.min_samples == 0 || self.min_samples > self.min_cluster_size {
            return Err(Error::invalid(format!(
                "min_samples must lie in 1..={}, got {}",
                self.min_cluster_size, self.min_samples
            )));
        }
        Ok(())
    }
}

/// Cluster index per sample; `None` is noise.
pub type ClusterLabels = Vec<Option<usize>>;

fn dist(x: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
    x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub(crate) fn core_distances(x: &ArrayView2<f64>, min_samples: usize) -> Vec<f64> {
    let n = x.nrows();
    let k = min_samples.min(n);
    let mut row = vec![0.0; n];
    (0..n)
        .map(|i| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = dist(x, i, j);
            }
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Prim's MST on the mutual-reachability graph; ties go to the lower index.
fn mst(x: &ArrayView2<f64>, core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = x.nrows();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = dist(x, cur, j).max(core[cur]).max(core[j]);
            if w < best[j] {
                best[j] = w;
                from[j] = cur;
            }
            if best[j] < next_w {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next].min(next), from[next].max(next), next_w));
        cur = next;
    }
    edges
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
}

/// Node of the n-ary single-linkage tree. Leaves are samples.
struct Node {
    children: Vec<usize>,
    lambda: f64,
    size: usize,
}

/// Runs the clustering; deterministic for a given sample order and
/// permutation-equivariant up to relabeling.
pub fn hdbscan_cluster(x: ArrayView2<f64>, params: &ClusterParams) -> Result<ClusterLabels> {
    params.validate()?;
    let n = x.nrows();
    if n < params.min_cluster_size || n < 2 {
        return Ok(vec![None; n]);
    }
    let core = core_distances(&x, params.min_samples);
    let mut edges = mst(&x, &core);
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let max_w = edges.last().map_or(0.0, |e| e.2);
    if !(max_w > 0.0) {
        return Ok(vec![None; n]);
    }
    let floor = max_w * 1e-12;

    // bottom-up n-ary tree; equal weights merge together
    let mut nodes: Vec<Node> = (0..n).map(|_| Node { children: Vec::new(), lambda: f64::INFINITY, size: 1 }).collect();
    let mut dsu = Dsu { parent: (0..n).collect() };
    let mut top: Vec<usize> = (0..n).collect(); // DSU root → tree node
    let mut e = 0;
    while e < edges.len() {
        let w = edges[e].2;
        let mut g = e;
        while g < edges.len() && edges[g].2 == w {
            g += 1;
        }
        let lambda = 1.0 / w.max(floor);
        // group the touched components by their merged root
        let mut touched: Vec<usize> = Vec::new();
        for &(a, b, _) in &edges[e..g] {
            touched.push(dsu.find(a));
            touched.push(dsu.find(b));
        }
        touched.sort_unstable();
        touched.dedup();
        let old_top: Vec<(usize, usize)> = touched.iter().map(|&r| (r, top[r])).collect();
        for &(a, b, _) in &edges[e..g] {
            let (ra, rb) = (dsu.find(a), dsu.find(b));
            if ra != rb {
                let (lo, hi) = (ra.min(rb), ra.max(rb));
                dsu.parent[hi] = lo;
            }
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (r, node) in old_top {
            let root = dsu.find(r);
            match groups.iter_mut().find(|(g, _)| *g == root) {
                Some((_, v)) => v.push(node),
                None => groups.push((root, vec![node])),
            }
        }
        for (root, children) in groups {
            let size = children.iter().map(|&c| nodes[c].size).sum();
            nodes.push(Node { children, lambda, size });
            top[root] = nodes.len() - 1;
        }
        e = g;
    }
    let root = nodes.len() - 1;
    debug_assert_eq!(nodes[root].size, n);

    let condensed = condense(&nodes, root, params.min_cluster_size);
    Ok(condensed.labels(n))
}

/// Condensed cluster hierarchy.
pub(crate) struct Condensed {
    pub parent: Vec<Option<usize>>,
    pub birth: Vec<f64>,
    pub stability: Vec<f64>,
    /// Cluster each sample last belonged to.
    pub point_cluster: Vec<(usize, usize)>,
}

fn leaves(nodes: &[Node], start: usize, out: &mut Vec<usize>) {
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        if nodes[v].children.is_empty() {
            out.push(v);
        } else {
            stack.extend(nodes[v].children.iter().copied());
        }
    }
}

fn condense(nodes: &[Node], root: usize, mcs: usize) -> Condensed {
    let mut c = Condensed { parent: vec![None], birth: vec![0.0], stability: vec![0.0], point_cluster: Vec::new() };
    let mut buf = Vec::new();
    // (tree node, cluster)
    let mut stack = vec![(root, 0usize)];
    while let Some((v, cl)) = stack.pop() {
        let node = &nodes[v];
        let lambda = node.lambda;
        if node.children.is_empty() {
            // a lone sample reached without a split cannot happen for mcs ≥ 2
            c.point_cluster.push((v, cl));
            continue;
        }
        let large: Vec<usize> = node.children.iter().copied().filter(|&ch| nodes[ch].size >= mcs).collect();
        for &ch in node.children.iter().filter(|&&ch| nodes[ch].size < mcs) {
            buf.clear();
            leaves(nodes, ch, &mut buf);
            c.stability[cl] += buf.len() as f64 * (lambda - c.birth[cl]);
            c.point_cluster.extend(buf.iter().map(|&p| (p, cl)));
        }
        match large.len() {
            0 => {}
            1 => stack.push((large[0], cl)),
            _ => {
                for &ch in &large {
                    c.stability[cl] += nodes[ch].size as f64 * (lambda - c.birth[cl]);
                    c.parent.push(Some(cl));
                    c.birth.push(lambda);
                    c.stability.push(0.0);
                    stack.push((ch, c.parent.len() - 1));
                }
            }
        }
    }
    c
}

impl Condensed {
    /// Excess-of-mass selection, root excluded.
    fn select(&self) -> Vec<bool> {
        let m = self.parent.len();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(k);
            }
        }
        let mut selected = vec![false; m];
        let mut subtree = vec![0.0; m];
        // children always have larger ids than their parent
        for k in (1..m).rev() {
            let child_sum: f64 = children[k].iter().map(|&ch| subtree[ch]).sum();
            if children[k].is_empty() || self.stability[k] >= child_sum {
                selected[k] = true;
                subtree[k] = self.stability[k];
                let mut stack = children[k].clone();
                while let Some(d) = stack.pop() {
                    selected[d] = false;
                    stack.extend(children[d].iter().copied());
                }
            } else {
                subtree[k] = child_sum;
            }
        }
        selected
    }

    fn labels(&self, n: usize) -> ClusterLabels {
        let selected = self.select();
        let owner = |mut cl: usize| -> Option<usize> {
            loop {
                if selected[cl] {
                    return Some(cl);
                }
                cl = self.parent[cl]?;
            }
        };
        let mut point_owner = vec![None; n];
        for &(p, cl) in &self.point_cluster {
            point_owner[p] = owner(cl);
        }
        let mut remap: Vec<Option<usize>> = vec![None; self.parent.len()];
        let mut next = 0;
        point_owner
            .into_iter()
            .map(|o| {
                o.map(|cl| {
                    *remap[cl].get_or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn too_few_points_are_noise() {
        let x = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 2.0]).unwrap();
        let p = ClusterParams { min_cluster_size: 5, min_samples: 2 };
        assert_eq!(hdbscan_cluster(x.view(), &p).unwrap(), vec![None; 3]);
    }

    #[test]
    fn identical_points_are_noise() {
        let x = Array2::<f64>::zeros((10, 2));
        let p = ClusterParams { min_cluster_size: 3, min_samples: 2 };
        assert_eq!(hdbscan_cluster(x.view(), &p).unwrap(), vec![None; 10]);
    }

    #[test]
    fn two_tight_groups() {
        let mut v = Vec::new();
        for i in 0..6 {
            v.push(i as f64 * 0.01);
        }
        for i in 0..6 {
            v.push(10.0 + i as f64 * 0.01);
        }
        let x = Array2::from_shape_vec((12, 1), v).unwrap();
        let p = ClusterParams { min_cluster_size: 4, min_samples: 2 };
        let l = hdbscan_cluster(x.view(), &p).unwrap();
        assert!(l[..6].iter().all(|&c| c == Some(0)));
        assert!(l[6..].iter().all(|&c| c == Some(1)));
    }

    #[test]
    fn params_validated() {
        let x = Array2::<f64>::zeros((4, 1));
        assert!(hdbscan_cluster(x.view(), &ClusterParams { min_cluster_size: 3, min_samples: 4 }).is_err());
        assert!(hdbscan_cluster(x.view(), &ClusterParams { min_cluster_size: 1, min_samples: 1 }).is_err());
    }
}
