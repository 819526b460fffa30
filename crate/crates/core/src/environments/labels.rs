//! Per-atom environment labels, co-occurrence statistics and the
//! leakage-free holdout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::environments::hdbscan::{hdbscan_cluster, ClusterParams};
use crate::environments::pca::{pca_fit, pca_transform, PcaTarget};
use crate::environments::soap::{SoapCalculator, SoapParams};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, Element};

/// Element-scoped cluster label; `cluster == None` is noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnvLabel {
    pub element: Element,
    pub cluster: Option<usize>,
}

impl EnvLabel {
    pub fn new(element: Element, cluster: usize) -> Self {
        EnvLabel { element, cluster: Some(cluster) }
    }

    pub fn noise(element: Element) -> Self {
        EnvLabel { element, cluster: None }
    }

    pub fn is_noise(&self) -> bool {
        self.cluster.is_none()
    }
}

impl fmt::Display for EnvLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cluster {
            Some(c) => write!(f, "{}_{}", self.element, c),
            None => write!(f, "{}_NOISE", self.element),
        }
    }
}

impl FromStr for EnvLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (el, cl) = s.split_once('_').ok_or_else(|| Error::invalid(format!("bad label '{s}'")))?;
        let element: Element = el.parse()?;
        match cl {
            "NOISE" | "-1" => Ok(EnvLabel::noise(element)),
            _ => cl
                .parse()
                .map(|c| EnvLabel::new(element, c))
                .map_err(|_| Error::invalid(format!("bad cluster id in label '{s}'"))),
        }
    }
}

/// Per-element pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementClustering {
    pub element: Element,
    pub pca: PcaTarget,
    pub cluster: ClusterParams,
}

impl ElementClustering {
    /// Settings used for the published labels (per-element PCA sizes and
    /// cluster thresholds).
    pub fn reference() -> [ElementClustering; 4] {
        let mk = |element, k, mcs, ms| ElementClustering {
            element,
            pca: PcaTarget::Components(k),
            cluster: ClusterParams { min_cluster_size: mcs, min_samples: ms },
        };
        [mk(Element::H, 20, 850, 200), mk(Element::C, 35, 850, 200), mk(Element::N, 30, 100, 30), mk(Element::O, 20, 100, 30)]
    }
}

/// Labels for every atom, keyed by molecule ID.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomLabels {
    pub by_molecule: BTreeMap<String, Vec<EnvLabel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementReport {
    pub element: Element,
    pub n_atoms: usize,
    pub pca_components: usize,
    pub variance_retained: f64,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub n_clusters: usize,
    pub noise_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub elements: Vec<ElementReport>,
}

impl ClusterReport {
    /// CSV with one row per element.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "element,n_atoms,pca_components,variance_retained_pct,min_cluster_size,min_samples,n_clusters,noise_pct\n",
        );
        for e in &self.elements {
            s.push_str(&format!(
                "{},{},{},{:.2},{},{},{},{:.2}\n",
                e.element,
                e.n_atoms,
                e.pca_components,
                100.0 * e.variance_retained,
                e.min_cluster_size,
                e.min_samples,
                e.n_clusters,
                100.0 * e.noise_fraction
            ));
        }
        s
    }
}

/// Computes SOAP for every atom, then PCA and clustering per element.
pub fn label_atoms(ds: &Dataset, soap: &SoapParams, per_element: &[ElementClustering]) -> Result<(AtomLabels, ClusterReport)> {
    let species = [Element::H, Element::C, Element::N, Element::O];
    let calc = SoapCalculator::new(*soap, &species)?;
    let mut labels: BTreeMap<String, Vec<EnvLabel>> = ds
        .molecules
        .iter()
        .map(|m| (m.id.clone(), m.elements.iter().map(|&e| EnvLabel::noise(e)).collect()))
        .collect();
    if labels.len() != ds.molecules.len() {
        return Err(Error::invalid("duplicate molecule IDs in dataset"));
    }
    let mut reports = Vec::new();
    for cfg in per_element {
        let sites: Vec<(usize, usize)> = ds
            .molecules
            .iter()
            .enumerate()
            .flat_map(|(mi, m)| m.elements.iter().enumerate().filter(|(_, &e)| e == cfg.element).map(move |(ai, _)| (mi, ai)))
            .collect();
        let mut report = ElementReport {
            element: cfg.element,
            n_atoms: sites.len(),
            pca_components: 0,
            variance_retained: 0.0,
            min_cluster_size: cfg.cluster.min_cluster_size,
            min_samples: cfg.cluster.min_samples,
            n_clusters: 0,
            noise_fraction: if sites.is_empty() { 0.0 } else { 1.0 },
        };
        if sites.len() >= 2 {
            let mut x = Array2::zeros((sites.len(), calc.dimension()));
            for (row, &(mi, ai)) in sites.iter().enumerate() {
                let d = calc.descriptor(&ds.molecules[mi], ai)?;
                x.row_mut(row).assign(&ndarray::ArrayView1::from(&d));
            }
            let pca = match cfg.pca {
                PcaTarget::Components(k) => PcaTarget::Components(k.min(calc.dimension())),
                t => t,
            };
            let model = pca_fit(x.view(), pca)?;
            let z = pca_transform(&model, x.view())?;
            let cl = hdbscan_cluster(z.view(), &cfg.cluster)?;
            report.pca_components = model.n_components();
            report.variance_retained = model.explained_ratio();
            report.n_clusters = cl.iter().flatten().max().map_or(0, |m| m + 1);
            report.noise_fraction = cl.iter().filter(|c| c.is_none()).count() as f64 / cl.len() as f64;
            for (&(mi, ai), c) in sites.iter().zip(cl) {
                labels.get_mut(&ds.molecules[mi].id).expect("present")[ai] = EnvLabel { element: cfg.element, cluster: c };
            }
        }
        log::info!(
            "{}: {} atoms, {} clusters, {:.1}% noise",
            cfg.element,
            report.n_atoms,
            report.n_clusters,
            100.0 * report.noise_fraction
        );
        reports.push(report);
    }
    Ok((AtomLabels { by_molecule: labels }, ClusterReport { elements: reports }))
}

impl AtomLabels {
    /// Non-noise labels present in at least one molecule, sorted.
    pub fn all_labels(&self) -> Vec<EnvLabel> {
        let set: BTreeSet<EnvLabel> = self.by_molecule.values().flatten().filter(|l| !l.is_noise()).copied().collect();
        set.into_iter().collect()
    }

    pub fn molecule_label_set(&self, id: &str) -> BTreeSet<EnvLabel> {
        self.by_molecule.get(id).map(|v| v.iter().copied().collect()).unwrap_or_default()
    }

    /// Text form: `molecule_id atom_index element cluster`, noise as `-1`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, labels) in &self.by_molecule {
            for (i, l) in labels.iter().enumerate() {
                let c = l.cluster.map_or(-1, |c| c as i64);
                s.push_str(&format!("{id} {i} {} {c}\n", l.element));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut by_molecule: BTreeMap<String, Vec<EnvLabel>> = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::parse(ln + 1, "expected 'molecule_id atom_index element cluster'"));
            }
            let idx: usize = f[1].parse().map_err(|_| Error::parse(ln + 1, "bad atom index"))?;
            let element: Element = f[2].parse().map_err(|e: Error| Error::parse(ln + 1, e.to_string()))?;
            let c: i64 = f[3].parse().map_err(|_| Error::parse(ln + 1, "bad cluster id"))?;
            let label = if c < 0 { EnvLabel::noise(element) } else { EnvLabel::new(element, c as usize) };
            let v = by_molecule.entry(f[0].to_string()).or_default();
            if idx != v.len() {
                return Err(Error::parse(ln + 1, format!("atom index {idx} out of sequence")));
            }
            v.push(label);
        }
        Ok(AtomLabels { by_molecule })
    }
}

/// Conditional co-occurrence `P(b present | a present)` over molecules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cooccurrence {
    pub labels: Vec<EnvLabel>,
    /// `matrix[a][b]`.
    pub matrix: Vec<Vec<f64>>,
    pub support: Vec<usize>,
}

impl Cooccurrence {
    pub fn zero_support(&self) -> Vec<EnvLabel> {
        self.labels.iter().zip(&self.support).filter(|(_, &s)| s == 0).map(|(l, _)| *l).collect()
    }

    pub fn get(&self, a: &EnvLabel, b: &EnvLabel) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.matrix[i][j])
    }
}

pub fn cooccurrence(labels: &AtomLabels, universe: &[EnvLabel]) -> Cooccurrence {
    let k = universe.len();
    let mut counts = vec![vec![0usize; k]; k];
    let mut support = vec![0usize; k];
    for v in labels.by_molecule.values() {
        let present: Vec<usize> = (0..k).filter(|&i| v.contains(&universe[i])).collect();
        for &a in &present {
            support[a] += 1;
            for &b in &present {
                counts[a][b] += 1;
            }
        }
    }
    let matrix = (0..k)
        .map(|a| (0..k).map(|b| if support[a] == 0 { 0.0 } else { counts[a][b] as f64 / support[a] as f64 }).collect())
        .collect();
    let co = Cooccurrence { labels: universe.to_vec(), matrix, support };
    for l in co.zero_support() {
        log::warn!("label {l} has zero support");
    }
    co
}

/// Adds every label `b` with `P(b | a) ≥ threshold` for some held `a`,
/// repeated until closed.
pub fn expand_held_labels(co: &Cooccurrence, seed: &[EnvLabel], threshold: f64) -> BTreeSet<EnvLabel> {
    let mut held: BTreeSet<EnvLabel> = seed.iter().copied().collect();
    loop {
        let mut added = false;
        for a in held.clone() {
            let Some(i) = co.labels.iter().position(|l| *l == a) else { continue };
            for (j, b) in co.labels.iter().enumerate() {
                if co.matrix[i][j] >= threshold && held.insert(*b) {
                    added = true;
                }
            }
        }
        if !added {
            return held;
        }
    }
}

/// Splits molecule IDs (in `ids` order) into train pool and holdout.
pub fn build_holdout(ids: &[String], labels: &AtomLabels, held: &BTreeSet<EnvLabel>) -> Result<(Vec<String>, Vec<String>)> {
    for h in held {
        if !labels.by_molecule.values().any(|v| v.contains(h)) {
            return Err(Error::invalid(format!("held label {h} has zero support")));
        }
    }
    let mut pool = Vec::new();
    let mut holdout = Vec::new();
    for id in ids {
        let v = labels.by_molecule.get(id).ok_or_else(|| Error::invalid(format!("no labels for molecule {id}")))?;
        if v.iter().any(|l| held.contains(l)) {
            holdout.push(id.clone());
        } else {
            pool.push(id.clone());
        }
    }
    for id in &pool {
        if labels.by_molecule[id].iter().any(|l| held.contains(l)) {
            return Err(Error::numeric(format!("held-label leakage into training molecule {id}")));
        }
    }
    Ok((pool, holdout))
}

/// Labels whose every occurrence already lies inside the holdout.
pub fn absorbed_labels(labels: &AtomLabels, holdout: &[String]) -> Vec<EnvLabel> {
    let hold: BTreeSet<&str> = holdout.iter().map(String::as_str).collect();
    labels
        .all_labels()
        .into_iter()
        .filter(|l| labels.by_molecule.iter().filter(|(_, v)| v.contains(l)).all(|(id, _)| hold.contains(id.as_str())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> AtomLabels {
        let h = |c| EnvLabel::new(Element::H, c);
        let mut m = BTreeMap::new();
        m.insert("m1".into(), vec![h(0), h(1)]);
        m.insert("m2".into(), vec![h(0)]);
        m.insert("m3".into(), vec![h(0), h(2)]);
        m.insert("m4".into(), vec![h(1), h(2)]);
        m.insert("m5".into(), vec![h(0), EnvLabel::noise(Element::H)]);
        AtomLabels { by_molecule: m }
    }

    #[test]
    fn label_text_round_trip() {
        let l = toy();
        assert_eq!(AtomLabels::from_text(&l.to_text()).unwrap(), l);
        assert_eq!("N_13".parse::<EnvLabel>().unwrap(), EnvLabel::new(Element::N, 13));
        assert_eq!(EnvLabel::noise(Element::O).to_string(), "O_NOISE");
    }

    #[test]
    fn hand_counted_cooccurrence() {
        let l = toy();
        let u = l.all_labels();
        let co = cooccurrence(&l, &u);
        let h = |c| EnvLabel::new(Element::H, c);
        // H_0 in m1,m2,m3,m5; H_1 in m1,m4; H_2 in m3,m4
        assert_eq!(co.get(&h(0), &h(1)), Some(0.25));
        assert_eq!(co.get(&h(1), &h(0)), Some(0.5));
        assert_eq!(co.get(&h(2), &h(1)), Some(0.5));
        assert_eq!(co.get(&h(0), &h(0)), Some(1.0));
    }

    #[test]
    fn holdout_and_absorption() {
        let l = toy();
        let ids: Vec<String> = l.by_molecule.keys().cloned().collect();
        let held: BTreeSet<_> = [EnvLabel::new(Element::H, 1)].into_iter().collect();
        let (pool, hold) = build_holdout(&ids, &l, &held).unwrap();
        assert_eq!(hold, vec!["m1", "m4"]);
        assert_eq!(pool, vec!["m2", "m3", "m5"]);
        assert_eq!(absorbed_labels(&l, &hold), vec![EnvLabel::new(Element::H, 1)]);
        let missing: BTreeSet<_> = [EnvLabel::new(Element::C, 0)].into_iter().collect();
        assert!(build_holdout(&ids, &l, &missing).is_err());
    }

    #[test]
    fn expansion_follows_threshold() {
        let l = toy();
        let co = cooccurrence(&l, &l.all_labels());
        let held = expand_held_labels(&co, &[EnvLabel::new(Element::H, 1)], 0.5);
        assert_eq!(held.len(), 3);
        let held = expand_held_labels(&co, &[EnvLabel::new(Element::H, 1)], 0.9);
        assert_eq!(held.len(), 1);
    }
}
