use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Traceless5, Vec3};
use crate::ingest::{AtomTargets, Element, MoleculeRecord};
use crate::provenance::{split_provenance, Provenance};
use crate::qtnet::{
    build_graph, predict_examples, Checkpoint, Example, Head, ModelConfig, Normalization, ParamSet, TargetStats,
    ATOM_OUTPUTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

/// How a deployment ensemble is assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: usize,
    pub seeds: Vec<u64>,
    pub aggregation: Aggregation,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { members: 5, seeds: (0..5).collect(), aggregation: Aggregation::Mean }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub stats: TargetStats,
}

impl EnsembleMember {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<EnsembleMember> {
        let Normalization::Atomic { stats } = ck.normalization else {
            return Err(Error::invalid("ensemble members need atomic-head checkpoints"));
        };
        Ok(EnsembleMember { config: ck.config.clone(), params: ck.param_set()?, stats })
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    members: Vec<EnsembleMember>,
    aggregation: Aggregation,
}

impl Ensemble {
    pub fn new(members: Vec<EnsembleMember>, aggregation: Aggregation) -> Result<Ensemble> {
        let first = members.first().ok_or_else(|| Error::invalid("ensemble has no members"))?;
        if first.config.head != Head::Atomic {
            return Err(Error::invalid("ensemble members need the atomic head"));
        }
        let hash = first.config.hash();
        if let Some(m) = members.iter().find(|m| m.config.hash() != hash) {
            return Err(Error::ConfigMismatch { expected: hash, found: m.config.hash() });
        }
        Ok(Ensemble { members, aggregation })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Ensemble prediction for one molecule in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredMolecule {
    pub id: String,
    pub elements: Vec<Element>,
    pub atoms: Vec<AtomTargets>,
    /// Per-atom RMS over the 10 components of the member standard deviation.
    pub spread: Vec<f64>,
}

fn aggregate(values: &mut [f64], how: Aggregation) -> f64 {
    match how {
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            }
        }
    }
}

/// Predicts N, λ, μ, Q for every atom, de-normalizing each member with its
/// own statistics before aggregating.
pub fn infer_qta(ens: &Ensemble, molecules: &[&MoleculeRecord], batch_size: usize) -> Result<Vec<InferredMolecule>> {
    let cfg = &ens.members[0].config;
    let examples: Vec<Example> = molecules
        .iter()
        .map(|m| {
            Ok(Example {
                id: m.id.clone(),
                graph: build_graph(m, cfg)?,
                target: Array2::zeros((m.n_atoms(), ATOM_OUTPUTS)),
                extra: None,
            })
        })
        .collect::<Result<_>>()?;
    let per_member: Vec<Vec<Array2<f64>>> = ens
        .members
        .iter()
        .map(|m| {
            let preds = predict_examples(&m.config, &m.params, &examples, batch_size)?;
            Ok(preds
                .into_iter()
                .map(|p| {
                    let phys = m.stats.invert_matrix(&p);
                    let mut out = Array2::zeros(p.dim());
                    for (i, a) in phys.iter().enumerate() {
                        for (c, v) in a.to_array().into_iter().enumerate() {
                            out[(i, c)] = v;
                        }
                    }
                    out
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let k = ens.members.len() as f64;
    let mut out = Vec::with_capacity(molecules.len());
    for (mi, mol) in molecules.iter().enumerate() {
        let mut atoms = Vec::with_capacity(mol.n_atoms());
        let mut spread = Vec::with_capacity(mol.n_atoms());
        for i in 0..mol.n_atoms() {
            let mut agg = [0.0; ATOM_OUTPUTS];
            let mut var_sum = 0.0;
            for (c, slot) in agg.iter_mut().enumerate() {
                let mut vals: Vec<f64> = per_member.iter().map(|p| p[mi][(i, c)]).collect();
                let mean = vals.iter().sum::<f64>() / k;
                var_sum += vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
                *slot = aggregate(&mut vals, ens.aggregation);
            }
            atoms.push(AtomTargets::from_array(&agg));
            spread.push((var_sum / ATOM_OUTPUTS as f64).sqrt());
        }
        out.push(InferredMolecule { id: mol.id.clone(), elements: mol.elements.clone(), atoms, spread });
    }
    Ok(out)
}

const INFERRED_HEADER: &str = "molecule_id,atom_index,element,N,lambda,mu_x,mu_y,mu_z,Q_xy,Q_xz,Q_yz,Q_an,Q_zz,spread";

/// Per-atom release file in atomic units.
pub fn write_inferred_csv(prov: &Provenance, rows: &[InferredMolecule]) -> String {
    let mut s = format!("{}\n{INFERRED_HEADER}\n", prov.comment_line());
    for m in rows {
        for (i, (a, e)) in m.atoms.iter().zip(&m.elements).enumerate() {
            let _ = write!(s, "{},{i},{}", m.id, e.symbol());
            for v in a.to_array() {
                let _ = write!(s, ",{v:?}");
            }
            let _ = writeln!(s, ",{:?}", m.spread[i]);
        }
    }
    s
}

pub fn read_inferred_csv(text: &str) -> Result<(Provenance, Vec<InferredMolecule>)> {
    let (prov, body) = split_provenance(text)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    if rdr.headers()?.iter().collect::<Vec<_>>().join(",") != INFERRED_HEADER {
        return Err(Error::parse(2, format!("expected header '{INFERRED_HEADER}'")));
    }
    let mut out: Vec<InferredMolecule> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 3;
        let num = |c: usize| -> Result<f64> {
            rec[c].trim().parse().map_err(|_| Error::parse(line, format!("bad number '{}'", &rec[c])))
        };
        let idx: usize = rec[1].trim().parse().map_err(|_| Error::parse(line, "bad atom index"))?;
        let element: Element = rec[2].trim().parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let atom = AtomTargets {
            n_e: num(3)?,
            li: num(4)?,
            mu: Vec3::new(num(5)?, num(6)?, num(7)?),
            quad: Traceless5::from_array([num(8)?, num(9)?, num(10)?, num(11)?, num(12)?]),
        };
        let spread = num(13)?;
        let id = rec[0].to_string();
        match out.last_mut() {
            Some(m) if m.id == id => {
                if idx != m.atoms.len() {
                    return Err(Error::parse(line, format!("atom index {idx} out of order")));
                }
                m.elements.push(element);
                m.atoms.push(atom);
                m.spread.push(spread);
            }
            _ => {
                if idx != 0 {
                    return Err(Error::parse(line, "molecule must start at atom 0"));
                }
                out.push(InferredMolecule { id, elements: vec![element], atoms: vec![atom], spread: vec![spread] });
            }
        }
    }
    Ok((prov, out))
}

/// A trained model eligible for a deployment ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub repeat: usize,
    pub fold: usize,
    pub val_loss: f64,
}

/// Index of the lowest-validation-loss candidate of every repeat, in
/// repeat order; ties go to the lower fold.
pub fn best_of_repeat(candidates: &[Candidate]) -> Vec<usize> {
    let mut repeats: Vec<usize> = candidates.iter().map(|c| c.repeat).collect();
    repeats.sort_unstable();
    repeats.dedup();
    repeats
        .into_iter()
        .filter_map(|r| {
            candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.repeat == r && c.val_loss.is_finite())
                .min_by(|a, b| a.1.val_loss.total_cmp(&b.1.val_loss).then(a.1.fold.cmp(&b.1.fold)))
                .map(|(i, _)| i)
        })
        .collect()
}
