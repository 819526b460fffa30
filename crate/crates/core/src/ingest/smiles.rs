//! SMILES subset parser producing a heavy-atom molecular graph.
//!
//! Supported: organic-subset atoms `C N O` and aromatic `c n o`; bracket
//! atoms over `H C N O c n o` with an optional hydrogen count
//! (`[nH]`, `[CH2]`); bonds `- = # :`; branches; ring closures `0-9` and
//! `%nn`; `.` separated components. Stereo marks, charges, isotopes and any
//! other element fail with the offending position. Implicit hydrogens are
//! not materialized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::record::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn as_u8(self) -> u8 {
        self.code()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphAtom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// Explicit hydrogen count from a bracket atom.
    pub hydrogens: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphBond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolGraph {
    pub atoms: Vec<GraphAtom>,
    pub bonds: Vec<GraphBond>,
    pub ring_atom: Vec<bool>,
    pub ring_bond: Vec<bool>,
}

impl MolGraph {
    /// Builds the graph and perceives ring membership.
    pub fn new(atoms: Vec<GraphAtom>, bonds: Vec<GraphBond>) -> Result<Self> {
        for b in &bonds {
            if b.a >= atoms.len() || b.b >= atoms.len() {
                return Err(Error::invalid(format!("bond {}-{} references a missing atom", b.a, b.b)));
            }
            if b.a == b.b {
                return Err(Error::invalid(format!("self bond on atom {}", b.a)));
            }
        }
        let ring_bond = non_bridges(atoms.len(), &bonds);
        let mut ring_atom = vec![false; atoms.len()];
        for (b, &r) in bonds.iter().zip(&ring_bond) {
            if r {
                ring_atom[b.a] = true;
                ring_atom[b.b] = true;
            }
        }
        Ok(MolGraph { atoms, bonds, ring_atom, ring_bond })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.a].push((b.b, b.order));
            adj[b.b].push((b.a, b.order));
        }
        adj
    }

    pub fn n_components(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        for s in 0..self.atoms.len() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Cyclomatic number `E − V + C`.
    pub fn n_rings(&self) -> usize {
        (self.bonds.len() + self.n_components()).saturating_sub(self.atoms.len())
    }
}

/// Marks bonds lying on a cycle (i.e. not bridges), via DFS low-links.
fn non_bridges(n: usize, bonds: &[GraphBond]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, b) in bonds.iter().enumerate() {
        adj[b.a].push((b.b, k));
        adj[b.b].push((b.a, k));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_cycle = vec![true; bonds.len()];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (node, parent edge, next adjacency index)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(&mut (u, pe, ref mut it)) = stack.last_mut() {
            if *it < adj[u].len() {
                let (v, e) = adj[u][*it];
                *it += 1;
                if e == pe {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        on_cycle[pe] = false;
                    }
                }
            }
        }
    }
    on_cycle
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos, msg: msg.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn bracket_atom(&mut self) -> Result<GraphAtom> {
        let open = self.pos;
        self.pos += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return self.err("isotopes are not supported");
        }
        let (element, aromatic) = match self.peek() {
            Some(b'C') => (Element::C, false),
            Some(b'N') => (Element::N, false),
            Some(b'O') => (Element::O, false),
            Some(b'H') => (Element::H, false),
            Some(b'c') => (Element::C, true),
            Some(b'n') => (Element::N, true),
            Some(b'o') => (Element::O, true),
            _ => return self.err("unsupported bracket atom"),
        };
        self.pos += 1;
        if element != Element::H && self.peek().is_some_and(|c| c.is_ascii_lowercase()) {
            return self.err("unsupported element in bracket atom");
        }
        if self.peek() == Some(b'@') {
            return self.err("stereochemistry is not supported");
        }
        let mut hydrogens = Some(0);
        if self.peek() == Some(b'H') {
            self.pos += 1;
            let mut count = 1u8;
            if let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                count = d - b'0';
                self.pos += 1;
            }
            hydrogens = Some(count);
        }
        match self.peek() {
            Some(b']') => {
                self.pos += 1;
                Ok(GraphAtom { element, aromatic, charge: 0, hydrogens })
            }
            Some(b'+') | Some(b'-') => self.err("charged atoms are not supported"),
            Some(b':') => self.err("atom classes are not supported"),
            None => {
                self.pos = open;
                self.err("unterminated bracket atom")
            }
            _ => self.err("unexpected character in bracket atom"),
        }
    }
}

/// Parses a SMILES string into a [`MolGraph`].
pub fn parse_smiles(smiles: &str) -> Result<MolGraph> {
    let mut p = Parser { s: smiles.as_bytes(), pos: 0 };
    let mut atoms: Vec<GraphAtom> = Vec::new();
    let mut bonds: Vec<GraphBond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut branch_stack: Vec<(Option<usize>, usize)> = Vec::new();
    let mut pending_bond: Option<(BondOrder, usize)> = None;
    // ring number -> (atom, explicit bond, position opened)
    let mut rings: std::collections::BTreeMap<u32, (usize, Option<BondOrder>, usize)> = Default::default();

    let default_order = |a: &GraphAtom, b: &GraphAtom| {
        if a.aromatic && b.aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    };

    if smiles.is_empty() {
        return p.err("empty SMILES");
    }

    while let Some(c) = p.peek() {
        let start = p.pos;
        let atom = match c {
            b'C' | b'N' | b'O' => {
                let next = p.s.get(p.pos + 1).copied();
                if c == b'C' && next == Some(b'l') {
                    return p.err("chlorine is not supported");
                }
                p.pos += 1;
                let element = match c {
                    b'C' => Element::C,
                    b'N' => Element::N,
                    _ => Element::O,
                };
                Some(GraphAtom { element, aromatic: false, charge: 0, hydrogens: None })
            }
            b'c' | b'n' | b'o' => {
                p.pos += 1;
                let element = match c {
                    b'c' => Element::C,
                    b'n' => Element::N,
                    _ => Element::O,
                };
                Some(GraphAtom { element, aromatic: true, charge: 0, hydrogens: None })
            }
            b'[' => Some(p.bracket_atom()?),
            _ => None,
        };
        if let Some(atom) = atom {
            let idx = atoms.len();
            atoms.push(atom);
            if let Some(pv) = prev {
                let order = pending_bond.take().map(|(o, _)| o).unwrap_or_else(|| default_order(&atoms[pv], &atom));
                bonds.push(GraphBond { a: pv, b: idx, order });
            } else if pending_bond.is_some() {
                p.pos = start;
                return p.err("bond symbol without a preceding atom");
            }
            prev = Some(idx);
            continue;
        }
        match c {
            b'-' | b'=' | b'#' | b':' => {
                if pending_bond.is_some() {
                    return p.err("two consecutive bond symbols");
                }
                let order = match c {
                    b'-' => BondOrder::Single,
                    b'=' => BondOrder::Double,
                    b'#' => BondOrder::Triple,
                    _ => BondOrder::Aromatic,
                };
                pending_bond = Some((order, p.pos));
                p.pos += 1;
            }
            b'(' => {
                if prev.is_none() {
                    return p.err("branch without a preceding atom");
                }
                branch_stack.push((prev, p.pos));
                p.pos += 1;
            }
            b')' => {
                let Some((at, _)) = branch_stack.pop() else {
                    return p.err("unbalanced ')'");
                };
                if pending_bond.is_some() {
                    return p.err("dangling bond before ')'");
                }
                prev = at;
                p.pos += 1;
            }
            b'0'..=b'9' | b'%' => {
                let Some(owner) = prev else {
                    return p.err("ring closure without a preceding atom");
                };
                let num = if c == b'%' {
                    let d = p.s.get(p.pos + 1..p.pos + 3).filter(|d| d.iter().all(u8::is_ascii_digit));
                    let Some(d) = d else {
                        return p.err("'%' must be followed by two digits");
                    };
                    p.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                } else {
                    p.pos += 1;
                    (c - b'0') as u32
                };
                let explicit = pending_bond.take().map(|(o, _)| o);
                match rings.remove(&num) {
                    Some((other, open_bond, _)) => {
                        if other == owner {
                            return p.err("ring closure onto the same atom");
                        }
                        if bonds.iter().any(|b| (b.a == other && b.b == owner) || (b.a == owner && b.b == other)) {
                            return p.err("ring closure duplicates an existing bond");
                        }
                        let order = match (open_bond, explicit) {
                            (Some(a), Some(b)) if a != b => return p.err("conflicting ring-closure bond orders"),
                            (Some(a), _) | (None, Some(a)) => a,
                            (None, None) => default_order(&atoms[other], &atoms[owner]),
                        };
                        bonds.push(GraphBond { a: other, b: owner, order });
                    }
                    None => {
                        rings.insert(num, (owner, explicit, p.pos));
                    }
                }
            }
            b'.' => {
                if pending_bond.is_some() {
                    return p.err("bond symbol before '.'");
                }
                prev = None;
                p.pos += 1;
            }
            b'/' | b'\\' | b'@' => return p.err("stereochemistry is not supported"),
            b'+' => return p.err("charges are not supported"),
            _ => return p.err(format!("unsupported token '{}'", c as char)),
        }
    }

    if let Some((_, pos)) = branch_stack.last() {
        return Err(Error::Syntax { pos: *pos, msg: "unbalanced '('".into() });
    }
    if let Some((_, pos)) = pending_bond {
        return Err(Error::Syntax { pos, msg: "dangling bond at end of input".into() });
    }
    if let Some((num, (_, _, pos))) = rings.iter().next() {
        return Err(Error::Syntax { pos: pos - 1, msg: format!("unclosed ring bond {num}") });
    }
    MolGraph::new(atoms, bonds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acetamide_like_chain() {
        let g = parse_smiles("CC(=O)NC=N").unwrap();
        assert_eq!(g.n_atoms(), 6);
        assert_eq!(g.bonds.len(), 5);
        assert_eq!(g.n_rings(), 0);
        assert!(g.ring_atom.iter().all(|r| !r));
        assert_eq!(g.bonds[1].order, BondOrder::Double);
    }

    #[test]
    fn benzene() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.n_atoms(), 6);
        assert_eq!(g.bonds.len(), 6);
        assert_eq!(g.n_rings(), 1);
        assert!(g.atoms.iter().all(|a| a.aromatic));
        assert!(g.bonds.iter().all(|b| b.order == BondOrder::Aromatic));
        assert!(g.ring_atom.iter().all(|&r| r));
    }

    #[test]
    fn methylcyclopropane() {
        let g = parse_smiles("C1CC1C").unwrap();
        assert_eq!((g.n_atoms(), g.bonds.len(), g.n_rings()), (4, 4, 1));
        assert_eq!(g.ring_atom, vec![true, true, true, false]);
    }

    #[test]
    fn bracket_atoms_and_percent_rings() {
        let g = parse_smiles("c1cc[nH]c1").unwrap();
        assert_eq!(g.atoms[3].hydrogens, Some(1));
        assert_eq!(g.n_rings(), 1);
        let g = parse_smiles("C%12CCC%12").unwrap();
        assert_eq!(g.n_rings(), 1);
        let g = parse_smiles("C.C").unwrap();
        assert_eq!(g.n_components(), 2);
        assert_eq!(g.n_rings(), 0);
    }

    #[test]
    fn fused_rings() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        assert_eq!((g.n_atoms(), g.bonds.len(), g.n_rings()), (10, 11, 2));
    }

    #[test]
    fn errors_carry_positions() {
        let cases: &[(&str, usize)] = &[
            ("CC(C", 2),
            ("CC)C", 2),
            ("C1CC", 1),
            ("CC=", 2),
            ("C[NH+]C", 4),
            ("F", 0),
            ("C/C=C/C", 1),
            ("CCl", 1),
            ("", 0),
        ];
        for &(s, want) in cases {
            match parse_smiles(s) {
                Err(Error::Syntax { pos, .. }) => assert_eq!(pos, want, "{s}"),
                other => panic!("{s}: expected syntax error, got {other:?}"),
            }
        }
    }
}
