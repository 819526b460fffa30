//! Bemis–Murcko scaffolds keyed by an iterative neighborhood-refinement hash.

use sha2::{Digest, Sha256};

use crate::ingest::MolGraph;

/// Key shared by every molecule without rings.
pub const ACYCLIC: &str = "ACYCLIC";

/// Repeatedly strips atoms of degree ≤ 1; returns the surviving atom mask.
pub fn scaffold_atoms(g: &MolGraph) -> Vec<bool> {
    let adj = g.adjacency();
    let mut alive = vec![true; g.n_atoms()];
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut queue: Vec<usize> = (0..g.n_atoms()).filter(|&i| degree[i] <= 1).collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &(u, _) in &adj[v] {
            if alive[u] {
                degree[u] -= 1;
                if degree[u] == 1 {
                    queue.push(u);
                }
            }
        }
    }
    alive
}

fn hash64(parts: &[u8]) -> u64 {
    let d = Sha256::digest(parts);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Canonical scaffold key, or [`ACYCLIC`] when nothing survives pruning.
pub fn murcko_scaffold(g: &MolGraph) -> String {
    let alive = scaffold_atoms(g);
    let atoms: Vec<usize> = (0..g.n_atoms()).filter(|&i| alive[i]).collect();
    if atoms.is_empty() {
        return ACYCLIC.to_string();
    }
    let mut local = vec![usize::MAX; g.n_atoms()];
    for (k, &a) in atoms.iter().enumerate() {
        local[a] = k;
    }
    let mut nbrs: Vec<Vec<(usize, u8)>> = vec![Vec::new(); atoms.len()];
    let mut n_bonds = 0;
    for b in &g.bonds {
        if alive[b.a] && alive[b.b] {
            nbrs[local[b.a]].push((local[b.b], b.order.as_u8()));
            nbrs[local[b.b]].push((local[b.a], b.order.as_u8()));
            n_bonds += 1;
        }
    }
    let mut colors: Vec<u64> = atoms
        .iter()
        .map(|&a| {
            let at = &g.atoms[a];
            hash64(format!("{}|{}|{}", at.element, at.aromatic, nbrs[local[a]].len()).as_bytes())
        })
        .collect();
    for _ in 0..atoms.len() {
        let next: Vec<u64> = (0..atoms.len())
            .map(|i| {
                let mut ctx: Vec<(u8, u64)> = nbrs[i].iter().map(|&(j, o)| (o, colors[j])).collect();
                ctx.sort_unstable();
                let mut buf = colors[i].to_le_bytes().to_vec();
                for (o, c) in ctx {
                    buf.push(o);
                    buf.extend_from_slice(&c.to_le_bytes());
                }
                hash64(&buf)
            })
            .collect();
        let stable = distinct(&next) == distinct(&colors);
        colors = next;
        if stable {
            break;
        }
    }
    let mut sorted = colors;
    sorted.sort_unstable();
    let mut h = Sha256::new();
    h.update((atoms.len() as u64).to_le_bytes());
    h.update((n_bonds as u64).to_le_bytes());
    for c in sorted {
        h.update(c.to_le_bytes());
    }
    let d = h.finalize();
    let hex: String = d[..12].iter().map(|b| format!("{b:02x}")).collect();
    format!("S{}", hex)
}

fn distinct(v: &[u64]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_smiles;

    fn key(s: &str) -> String {
        murcko_scaffold(&parse_smiles(s).unwrap())
    }

    #[test]
    fn toluene_shares_benzene_key() {
        assert_eq!(key("Cc1ccccc1"), key("c1ccccc1"));
        assert_eq!(key("CCc1ccc(O)cc1N"), key("c1ccccc1"));
    }

    #[test]
    fn acyclic_molecules() {
        assert_eq!(key("CCC"), ACYCLIC);
        assert_eq!(key("C"), ACYCLIC);
        assert_eq!(key("CC(=O)NC=N"), ACYCLIC);
    }

    #[test]
    fn different_rings_differ() {
        assert_ne!(key("C1CC1"), key("C1CCC1"));
        assert_ne!(key("c1ccccc1"), key("c1ccncc1"));
        assert_ne!(key("c1ccccc1"), key("C1CCCCC1"));
        // linker retained between two rings
        assert_ne!(key("C1CC1CC1CC1"), key("C1CC1C1CC1"));
        assert_eq!(key("C1CC1CC1CC1"), key("OC1CC1CC1CC1C"));
    }

    #[test]
    fn independent_of_atom_order() {
        assert_eq!(key("c1ccncc1"), key("n1ccccc1"));
        assert_eq!(key("C1CC1CC1CC1"), key("C1CC1CC1CC1"));
        assert_eq!(key("C1CCC2CC2C1"), key("C1CC2CC2CC1"));
    }
}
