//! Seeded generator of small organic molecules with analytically defined
//! per-atom targets, used for desk-scale tests and the bundled fixture.
//!
//! Heavy-atom skeletons are drawn from a small SMILES grammar (optional
//! ring cores joined by short chains, at most 9 heavy atoms), hydrogens fill
//! the remaining valence, and 3-D coordinates come from a relaxation of
//! bond, angle and repulsion springs. Targets are smooth functions of the
//! geometry: electronegativity-driven charge transfer for N, a
//! coordination-dependent delocalization for λ, and pair sums of r̂ and Ĝ
//! for μ and Q. Molecular properties are deterministic functions of the
//! same quantities; μ is the norm of the summed atomic dipoles.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{gyration_tensor, Traceless5, Vec3, DEBYE_PER_AU};
use crate::ingest::{parse_smiles, AtomTargets, BondOrder, Dataset, Element, MoleculeRecord, Qm9Props};
use crate::provenance::Provenance;

/// Size and seed of the bundled fixture.
pub const FIXTURE_MOLECULES: usize = 50;
pub const FIXTURE_SEED: u64 = 20_240_613;

const MAX_HEAVY: usize = 9;

const CORES: [&str; 20] = [
    "C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1", "c1ccccc1", "c1ccncc1", "C1CCOC1", "C1CCNCC1", "c1ccoc1", "C1=CCCC1",
    "C1COC1", "C1CN1", "C1CO1", "C1CNC1", "C1CCNC1", "c1cncnc1", "C1CCOCC1", "C1CNCCN1", "C1=CCC=C1", "c1cnoc1",
];
const CHAIN_ATOMS: [&str; 6] = ["C", "C", "C", "N", "O", "C"];
const BRANCHES: [&str; 5] = ["(C)", "(O)", "(=O)", "(N)", "(C)"];

fn electronegativity(e: Element) -> f64 {
    match e {
        Element::H => 2.20,
        Element::C => 2.55,
        Element::N => 3.04,
        Element::O => 3.44,
    }
}

fn valence(e: Element) -> u32 {
    match e {
        Element::H => 1,
        Element::C => 4,
        Element::N => 3,
        Element::O => 2,
    }
}

fn chain<R: Rng>(rng: &mut R, len: usize) -> String {
    let mut s = String::new();
    for _ in 0..len {
        let a = *CHAIN_ATOMS.choose(rng).expect("non-empty");
        s.push_str(a);
        if a == "C" && rng.random_bool(0.25) {
            s.push_str(BRANCHES.choose(rng).expect("non-empty"));
        }
    }
    s
}

/// Random SMILES from the skeleton grammar.
fn random_smiles<R: Rng>(rng: &mut R) -> String {
    let n_rings = *[0usize, 1, 1, 1, 2].choose(rng).expect("non-empty");
    let len = rng.random_range(if n_rings == 0 { 1..6 } else { 0..3 });
    let mut s = chain(rng, len);
    for k in 0..n_rings {
        if k > 0 {
            let len = rng.random_range(0..2);
            s.push_str(&chain(rng, len));
        }
        s.push_str(CORES.choose(rng).expect("non-empty"));
    }
    let len = rng.random_range(0..3);
    s.push_str(&chain(rng, len));
    s
}

struct Skeleton {
    elements: Vec<Element>,
    /// Bonds as (a, b, length in Bohr).
    bonds: Vec<(usize, usize, f64)>,
    triple_at: Vec<bool>,
    planar_at: Vec<bool>,
}

/// Heavy atoms from the SMILES graph plus implicit hydrogens; `None` when
/// a valence is exceeded or the skeleton is too large.
fn skeleton(smiles: &str) -> Option<Skeleton> {
    let g = parse_smiles(smiles).ok()?;
    if g.atoms.len() > MAX_HEAVY || g.n_components() != 1 {
        return None;
    }
    let n = g.atoms.len();
    let mut elements: Vec<Element> = g.atoms.iter().map(|a| a.element).collect();
    let mut bonds = Vec::new();
    let mut order2 = vec![0u32; n];
    let mut triple_at = vec![false; n];
    let mut planar_at = vec![false; n];
    for b in &g.bonds {
        let (len, twice) = match b.order {
            BondOrder::Single => (2.87, 2),
            BondOrder::Double => (2.50, 4),
            BondOrder::Triple => (2.25, 6),
            BondOrder::Aromatic => (2.63, 3),
        };
        order2[b.a] += twice;
        order2[b.b] += twice;
        if b.order == BondOrder::Triple {
            triple_at[b.a] = true;
            triple_at[b.b] = true;
        }
        if matches!(b.order, BondOrder::Double | BondOrder::Aromatic) {
            planar_at[b.a] = true;
            planar_at[b.b] = true;
        }
        bonds.push((b.a, b.b, len));
    }
    for i in 0..n {
        let used = order2[i] / 2;
        let v = valence(elements[i]);
        if used > v {
            return None;
        }
        let h = g.atoms[i].hydrogens.map(u32::from).unwrap_or(v - used);
        for _ in 0..h {
            elements.push(Element::H);
            triple_at.push(false);
            planar_at.push(false);
            bonds.push((i, elements.len() - 1, 2.06));
        }
    }
    Some(Skeleton { elements, bonds, triple_at, planar_at })
}

/// Relaxes bond, angle and repulsion springs from a random start.
fn embed<R: Rng>(sk: &Skeleton, rng: &mut R) -> Vec<Vec3> {
    let n = sk.elements.len();
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(a, b, l) in &sk.bonds {
        nbrs[a].push((b, l));
        nbrs[b].push((a, l));
    }
    // target distances: bonds and 1-3 pairs; repulsion for everything else
    let mut target = vec![vec![None::<f64>; n]; n];
    for (c, list) in nbrs.iter().enumerate() {
        let angle = if sk.triple_at[c] && list.len() == 2 {
            std::f64::consts::PI
        } else if sk.planar_at[c] {
            120f64.to_radians()
        } else {
            109.47f64.to_radians()
        };
        for (x, &(a, la)) in list.iter().enumerate() {
            target[c][a] = Some(la);
            for &(b, lb) in &list[x + 1..] {
                let d = (la * la + lb * lb - 2.0 * la * lb * angle.cos()).sqrt();
                if target[a][b].is_none() {
                    target[a][b] = Some(d);
                    target[b][a] = Some(d);
                }
            }
        }
    }
    let scale = 2.5 * (n as f64).cbrt();
    let mut x: Vec<Vec3> = (0..n)
        .map(|_| Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect();
    let repulse = 4.5;
    for it in 0..3000 {
        let step = if it < 2000 { 0.05 } else { 0.02 };
        let mut grad = vec![Vec3::ZERO; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = x[j] - x[i];
                let r = d.norm().max(1e-6);
                let force = match target[i][j] {
                    Some(t) => 2.0 * (r - t),
                    None if r < repulse => 0.5 * (r - repulse),
                    None => continue,
                };
                let g = d * (force / r);
                grad[i] += g;
                grad[j] += -g;
            }
        }
        for (p, g) in x.iter_mut().zip(&grad) {
            *p += *g * step;
        }
    }
    let c = x.iter().fold(Vec3::ZERO, |acc, p| acc + *p) * (1.0 / n as f64);
    x.iter().map(|p| *p - c).collect()
}

fn switch(r: f64) -> f64 {
    (-(r / 3.0) * (r / 3.0)).exp()
}

/// Analytic per-atom targets for a geometry (Bohr).
pub fn analytic_targets(elements: &[Element], positions: &[Vec3]) -> Result<Vec<AtomTargets>> {
    let n = elements.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (zi, xi) = (f64::from(elements[i].atomic_number()), electronegativity(elements[i]));
        let mut n_e = zi;
        let mut coord = 0.0;
        let mut mu = Vec3::ZERO;
        let mut quad = Traceless5::ZERO;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = positions[j] - positions[i];
            let u = d.normalized().ok_or_else(|| Error::invalid(format!("atoms {i} and {j} coincide")))?;
            let s = switch(d.norm());
            let xj = electronegativity(elements[j]);
            n_e += 0.35 * (xi - xj) * s;
            coord += s;
            mu += u * (0.2 * (xj - xi + 0.3) * s);
            let zj = f64::from(elements[j].atomic_number());
            quad = quad.add(gyration_tensor(u)?.scale(0.3 * (1.0 + 0.025 * (zj - zi)) * s));
        }
        let li = n_e * (1.0 - (0.1 + 0.15 * coord.tanh()) / zi.max(1.0).sqrt());
        out.push(AtomTargets { n_e, li, mu, quad });
    }
    Ok(out)
}

fn molecular_props(sk: &Skeleton, smiles: &str, targets: &[AtomTargets]) -> Qm9Props {
    let heavy = sk.elements.iter().filter(|e| **e != Element::H).count() as f64;
    let hydrogens = sk.elements.len() as f64 - heavy;
    let aromatic = smiles.chars().filter(|c| c.is_ascii_lowercase()).count() as f64;
    let double = smiles.matches('=').count() as f64;
    let hetero = smiles.chars().filter(|c| matches!(c, 'N' | 'O' | 'n' | 'o')).count() as f64;
    let energy: f64 = sk
        .elements
        .iter()
        .zip(targets)
        .map(|(e, t)| {
            let base = match e {
                Element::H => -0.50,
                Element::C => -37.85,
                Element::N => -54.60,
                Element::O => -75.10,
            };
            base + 0.05 * (t.n_e - f64::from(e.atomic_number())).powi(2)
        })
        .sum();
    let alpha: f64 = targets.iter().map(|t| 0.6 * t.n_e + 1.5 * t.li).sum::<f64>() + 3.0 * heavy;
    let dip = targets.iter().fold(Vec3::ZERO, |acc, t| acc + t.mu);
    Qm9Props {
        alpha: Some(alpha),
        gap: Some(0.35 - 0.005 * aromatic - 0.02 * double - 0.008 * hetero),
        u0: Some(energy - 0.1 * sk.bonds.len() as f64),
        cv: Some(3.0 + 1.2 * heavy + 0.8 * hydrogens),
        mu: Some(dip.norm() * DEBYE_PER_AU),
    }
}

/// `n` molecules with distinct SMILES, ids `syn_00000`, `syn_00001`, …
pub fn generate_molecules(n: usize, seed: u64) -> Result<Vec<MoleculeRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * (n + 10) {
            return Err(Error::invalid(format!("could not generate {n} distinct molecules")));
        }
        let smiles = random_smiles(&mut rng);
        if seen.contains(&smiles) {
            continue;
        }
        let Some(sk) = skeleton(&smiles) else { continue };
        let positions = embed(&sk, &mut rng);
        let targets = analytic_targets(&sk.elements, &positions)?;
        if targets.iter().any(|t| t.validate().is_err()) {
            continue;
        }
        let qm9 = molecular_props(&sk, &smiles, &targets);
        seen.insert(smiles.clone());
        out.push(MoleculeRecord {
            id: format!("syn_{:05}", out.len()),
            elements: sk.elements,
            positions,
            smiles,
            qm9,
            targets: Some(targets),
        });
    }
    Ok(out)
}

pub fn synthetic_dataset(n: usize, seed: u64) -> Result<Dataset> {
    Ok(Dataset::new(Provenance::detached(seed), generate_molecules(n, seed)?))
}

/// The 50-molecule dataset shipped as a test fixture.
pub fn fixture_dataset() -> Result<Dataset> {
    synthetic_dataset(FIXTURE_MOLECULES, FIXTURE_SEED)
}

/// Renders a molecule with targets as a `.sumviz`-style summary that
/// [`crate::ingest::parse_sumviz`] reads back exactly.
pub fn write_sumviz(mol: &MoleculeRecord) -> Result<String> {
    use std::fmt::Write;
    let targets =
        mol.targets.as_ref().ok_or_else(|| Error::invalid(format!("molecule {} has no targets", mol.id)))?;
    let labels: Vec<String> = mol.elements.iter().enumerate().map(|(i, e)| format!("{}{}", e.symbol(), i + 1)).collect();
    let rule = "-".repeat(60);
    let mut s = String::new();
    let _ = writeln!(s, "Synthetic summary for {}\n", mol.id);
    let _ = writeln!(s, "Nuclear Charges and Cartesian Coordinates:\n{rule}");
    let _ = writeln!(s, "  Atom  Charge  X  Y  Z\n{rule}");
    for ((l, e), p) in labels.iter().zip(&mol.elements).zip(&mol.positions) {
        let _ = writeln!(s, "  {l}  {:.1}  {:e}  {:e}  {:e}", e.atomic_number(), p.x, p.y, p.z);
    }
    let _ = writeln!(s, "{rule}\n\nSome Atomic Properties:\n{rule}\n  Atom  N  LI\n{rule}");
    for (l, t) in labels.iter().zip(targets) {
        let _ = writeln!(s, "  {l}  {:e}  {:e}", t.n_e, t.li);
    }
    let _ = writeln!(s, "\nAtomic Multipole Moments:\n  Atom  Mu_x  Mu_y  Mu_z  Q_xy  Q_xz  Q_yz  Q_an  Q_zz");
    for (l, t) in labels.iter().zip(targets) {
        let q = t.quad.to_array();
        let _ = writeln!(
            s,
            "  {l}  {:e}  {:e}  {:e}  {:e}  {:e}  {:e}  {:e}  {:e}",
            t.mu.x, t.mu.y, t.mu.z, q[0], q[1], q[2], q[3], q[4]
        );
    }
    Ok(s)
}
