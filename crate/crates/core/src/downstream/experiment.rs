use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AtomTargets, MoleculeRecord};
use crate::provenance::Provenance;
use crate::qtnet::{
    build_graph, predict_examples, train, Example, GraphInstance, Head, Hyperparams, ModelConfig, ScalarStats,
    TargetStats, Variant,
};
use crate::splits::FoldPlan;
use crate::stats::{paired_battery, r2, PairedBattery, ScoreMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Per-atom QTA vectors are appended to the node inputs.
    Informed,
    /// Geometry and elements only.
    Blind,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Informed => "informed",
            Mode::Blind => "blind",
        }
    }
}

/// Training-set fractions and properties swept inside every fold cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub fractions: Vec<f64>,
    pub properties: Vec<String>,
    /// Share of each cell's training side held out for early stopping.
    /// With 5 folds, 1/8 of the 80% gives a 70/10/20 split.
    pub val_share: f64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            fractions: vec![0.01, 0.05, 0.1, 1.0],
            properties: crate::ingest::Qm9Props::TARGETS.iter().map(|s| s.to_string()).collect(),
            val_share: 0.125,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.properties.is_empty() {
            return Err(Error::invalid("experiment grid needs fractions and properties"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(Error::invalid(format!("training fraction {f} outside (0, 1]")));
        }
        if !(self.val_share > 0.0 && self.val_share < 1.0) {
            return Err(Error::invalid(format!("validation share {} outside (0, 1)", self.val_share)));
        }
        Ok(())
    }
}

/// Stratum label used in score matrices, e.g. `0.05/gap`.
pub fn stratum(fraction: f64, property: &str) -> String {
    format!("{fraction}/{property}")
}

/// Molecule IDs of one fold cell. `train_pool` is the full training side;
/// each fraction takes a prefix of it, so smaller subsets are nested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSplit {
    pub repeat: usize,
    pub fold: usize,
    pub train_pool: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl CellSplit {
    pub fn train_subset(&self, fraction: f64) -> &[String] {
        let n = ((fraction * self.train_pool.len() as f64).ceil() as usize).clamp(2.min(self.train_pool.len()), self.train_pool.len());
        &self.train_pool[..n]
    }
}

fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(p.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Deterministic train/val/test IDs for every plan cell. The split depends on
/// the plan and `seed` only, never on the mode.
pub fn experiment_splits(plan: &FoldPlan, grid: &ExperimentGrid, seed: u64) -> Result<Vec<CellSplit>> {
    grid.validate()?;
    plan.cells()
        .map(|cell| {
            let mut side = cell.train_ids.clone();
            side.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, &[cell.repeat as u64, cell.fold as u64])));
            let n_val = ((grid.val_share * side.len() as f64).round() as usize).max(1);
            if side.len() < n_val + 2 {
                return Err(Error::invalid(format!(
                    "cell r{} f{} has {} training molecules, too few to split",
                    cell.repeat,
                    cell.fold,
                    side.len()
                )));
            }
            let train_pool = side.split_off(n_val);
            let mut val_ids = side;
            val_ids.sort();
            Ok(CellSplit { repeat: cell.repeat, fold: cell.fold, train_pool, val_ids, test_ids: cell.val_ids })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularExperiment {
    pub config: ModelConfig,
    pub hyper: Hyperparams,
    pub grid: ExperimentGrid,
}

impl Default for MolecularExperiment {
    fn default() -> Self {
        MolecularExperiment {
            config: ModelConfig::preset(Variant::Molecular),
            hyper: Hyperparams::preset(Variant::Molecular),
            grid: ExperimentGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub mode: Mode,
    pub stratum: String,
    pub repeat: usize,
    pub fold: usize,
    pub id: String,
    pub truth: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Test-set R² per cell; model = mode name, 1-based repeat and fold.
    pub scores: ScoreMatrix,
    pub splits: Vec<CellSplit>,
    pub parity: Vec<ParityRow>,
}

/// Trains one single-property molecular model per (cell, fraction, property)
/// and scores it on the cell's held-out fold.
///
/// `qta` replaces the molecules' own per-atom targets as informed inputs
/// (e.g. ensemble-inferred values); blind mode never reads either source.
pub fn run_molecular_experiment(
    exp: &MolecularExperiment,
    mode: Mode,
    molecules: &[MoleculeRecord],
    plan: &FoldPlan,
    qta: Option<&HashMap<String, Vec<AtomTargets>>>,
) -> Result<ExperimentOutput> {
    let mut cfg = exp.config.clone();
    cfg.head = Head::Molecular { outputs: 1 };
    cfg.informed = mode == Mode::Informed;
    cfg.validate()?;
    let splits = experiment_splits(plan, &exp.grid, exp.hyper.seed)?;
    let by_id: HashMap<&str, &MoleculeRecord> = molecules.iter().map(|m| (m.id.as_str(), m)).collect();
    let needed: BTreeSet<&str> = plan.pool_ids();
    let mut graphs: HashMap<&str, GraphInstance> = HashMap::new();
    for id in &needed {
        let m = by_id.get(id).ok_or_else(|| Error::invalid(format!("plan molecule {id} not in dataset")))?;
        graphs.insert(id, build_graph(m, &cfg)?);
    }
    let qta_of = |id: &str| -> Result<&[AtomTargets]> {
        let found = match qta {
            Some(map) => map.get(id).map(Vec::as_slice),
            None => by_id[id].targets.as_deref(),
        };
        let atoms = found.ok_or_else(|| Error::invalid(format!("informed mode: molecule {id} has no QTA inputs")))?;
        if atoms.len() != by_id[id].n_atoms() {
            return Err(Error::invalid(format!("QTA inputs for {id} have {} atoms", atoms.len())));
        }
        Ok(atoms)
    };
    let property_of = |id: &str, prop: &str| -> Result<f64> {
        by_id[id].qm9.get(prop).ok_or_else(|| Error::invalid(format!("molecule {id} lacks property '{prop}'")))
    };

    let mut scores = ScoreMatrix::default();
    let mut parity = Vec::new();
    for split in &splits {
        for (fi, &fraction) in exp.grid.fractions.iter().enumerate() {
            let train_ids = split.train_subset(fraction);
            let qta_stats = if cfg.informed {
                let mut atoms = Vec::new();
                for id in train_ids {
                    atoms.extend_from_slice(qta_of(id)?);
                }
                Some(TargetStats::fit(&atoms)?)
            } else {
                None
            };
            for (pi, prop) in exp.grid.properties.iter().enumerate() {
                let ys: Vec<Vec<f64>> = train_ids.iter().map(|id| Ok(vec![property_of(id, prop)?])).collect::<Result<_>>()?;
                let y_stats = ScalarStats::fit(&ys)?;
                let make = |ids: &[String]| -> Result<Vec<Example>> {
                    ids.iter()
                        .map(|id| {
                            let y = y_stats.apply(&[property_of(id, prop)?]);
                            let extra = match &qta_stats {
                                Some(s) => Some(s.apply_matrix(qta_of(id)?)),
                                None => None,
                            };
                            Ok(Example {
                                id: id.clone(),
                                graph: graphs[id.as_str()].clone(),
                                target: Array2::from_shape_vec((1, 1), y).expect("1x1"),
                                extra,
                            })
                        })
                        .collect()
                };
                let train_set = make(train_ids)?;
                let val_set = make(&split.val_ids)?;
                let test_set = make(&split.test_ids)?;
                let mut hyper = exp.hyper.clone();
                hyper.seed = mix(exp.hyper.seed, &[split.repeat as u64, split.fold as u64, fi as u64, pi as u64]);
                let outcome = train(&cfg, &hyper, &train_set, &val_set)?;
                let preds = predict_examples(&cfg, &outcome.params, &test_set, hyper.batch_size)?;
                let st = stratum(fraction, prop);
                let mut truth = Vec::with_capacity(preds.len());
                let mut pred = Vec::with_capacity(preds.len());
                for (id, p) in split.test_ids.iter().zip(&preds) {
                    let t = property_of(id, prop)?;
                    let yhat = y_stats.invert(&[p[(0, 0)]])[0];
                    truth.push(t);
                    pred.push(yhat);
                    parity.push(ParityRow {
                        mode,
                        stratum: st.clone(),
                        repeat: split.repeat + 1,
                        fold: split.fold + 1,
                        id: id.clone(),
                        truth: t,
                        prediction: yhat,
                    });
                }
                let score = r2(&truth, &pred)?;
                log::info!("{} r{} f{} {st}: R2 {score:.4}", mode.name(), split.repeat + 1, split.fold + 1);
                scores.push(mode.name(), split.repeat + 1, split.fold + 1, &st, "r2", score);
            }
        }
    }
    Ok(ExperimentOutput { scores, splits, parity })
}

/// Informed-minus-blind paired statistics for one stratum.
pub fn paired_comparison(
    scores: &ScoreMatrix,
    stratum: &str,
    repeats: usize,
    folds: usize,
) -> Result<PairedBattery> {
    let s = [stratum.to_string()];
    let a = scores.fold_grid(Mode::Informed.name(), "r2", &s, repeats, folds)?;
    let b = scores.fold_grid(Mode::Blind.name(), "r2", &s, repeats, folds)?;
    paired_battery(&a, &b)
}

pub fn write_parity_csv(prov: &Provenance, rows: &[ParityRow]) -> String {
    let mut s = format!("{}\nmode,stratum,repeat,fold,molecule_id,truth,prediction\n", prov.comment_line());
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:?},{:?}",
            r.mode.name(),
            r.stratum,
            r.repeat,
            r.fold,
            r.id,
            r.truth,
            r.prediction
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splits::{build_plan, scaffold_groups, AcyclicPolicy};
    use crate::synthetic::generate_molecules;
    use rand::Rng;

    fn small_plan(mols: &[MoleculeRecord], repeats: usize, folds: usize) -> FoldPlan {
        let refs: Vec<&MoleculeRecord> = mols.iter().collect();
        let pool = scaffold_groups(&refs, AcyclicPolicy::Singleton).unwrap();
        let seeds: Vec<u64> = (0..repeats as u64).collect();
        build_plan(&pool, &[], &seeds, folds, Provenance::detached(0)).unwrap()
    }

    fn tiny_experiment(property: &str, epochs: usize) -> MolecularExperiment {
        let mut config = ModelConfig::tiny(Variant::Molecular, 1, 8);
        config.head = Head::Molecular { outputs: 1 };
        let mut hyper = Hyperparams::preset(Variant::Molecular);
        hyper.epochs = epochs;
        hyper.batch_size = 8;
        hyper.lr = 3e-3;
        hyper.weight_decay = 0.0;
        MolecularExperiment {
            config,
            hyper,
            grid: ExperimentGrid { fractions: vec![1.0], properties: vec![property.into()], val_share: 0.125 },
        }
    }

    fn random_qta(mols: &[MoleculeRecord], seed: u64) -> HashMap<String, Vec<AtomTargets>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        mols.iter()
            .map(|m| {
                let atoms = (0..m.n_atoms())
                    .map(|_| {
                        let mut a = [0.0; 10];
                        for v in &mut a {
                            *v = rng.random_range(-1.0..1.0);
                        }
                        a[0] += 5.0;
                        a[1] = a[0] - 1.0;
                        AtomTargets::from_array(&a)
                    })
                    .collect();
                (m.id.clone(), atoms)
            })
            .collect()
    }

    #[test]
    fn splits_are_disjoint_and_nested() {
        let mols = generate_molecules(40, 2).unwrap();
        let plan = small_plan(&mols, 2, 5);
        let grid = ExperimentGrid::default();
        let splits = experiment_splits(&plan, &grid, 9).unwrap();
        assert_eq!(splits.len(), 10);
        for s in &splits {
            let tr: BTreeSet<_> = s.train_pool.iter().collect();
            let va: BTreeSet<_> = s.val_ids.iter().collect();
            let te: BTreeSet<_> = s.test_ids.iter().collect();
            assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
            assert_eq!(tr.len() + va.len() + te.len(), 40);
            assert_eq!(va.len(), 4);
            let small = s.train_subset(0.05);
            let large = s.train_subset(0.1);
            assert!(small.len() >= 2 && large.starts_with(small));
            assert_eq!(s.train_subset(1.0).len(), s.train_pool.len());
        }
        assert_eq!(splits, experiment_splits(&plan, &grid, 9).unwrap());
    }

    #[test]
    fn blind_mode_ignores_qta_inputs() {
        let mols = generate_molecules(20, 4).unwrap();
        let plan = small_plan(&mols, 1, 2);
        let exp = tiny_experiment("gap", 3);
        let a = run_molecular_experiment(&exp, Mode::Blind, &mols, &plan, Some(&random_qta(&mols, 1))).unwrap();
        let b = run_molecular_experiment(&exp, Mode::Blind, &mols, &plan, Some(&random_qta(&mols, 2))).unwrap();
        assert_eq!(a.scores, b.scores);
        assert!(a.scores.entries.iter().zip(&b.scores.entries).all(|(x, y)| x.value.to_bits() == y.value.to_bits()));
        let informed = run_molecular_experiment(&exp, Mode::Informed, &mols, &plan, Some(&random_qta(&mols, 1))).unwrap();
        assert_eq!(informed.splits, a.splits);
    }

    #[test]
    fn informed_mode_requires_qta() {
        let mut mols = generate_molecules(12, 4).unwrap();
        mols[3].targets = None;
        let plan = small_plan(&mols, 1, 2);
        let exp = tiny_experiment("gap", 1);
        assert!(run_molecular_experiment(&exp, Mode::Informed, &mols, &plan, None).is_err());
        assert!(run_molecular_experiment(&exp, Mode::Blind, &mols, &plan, None).is_ok());
    }

    #[test]
    fn informed_inputs_carry_signal_blind_cannot_see() {
        let mut mols = generate_molecules(60, 8).unwrap();
        let qta = random_qta(&mols, 3);
        // Property = sum over atoms of an injected per-atom scalar, which is
        // independent of geometry.
        for m in &mut mols {
            m.qm9.gap = Some(qta[&m.id].iter().map(|a| a.n_e - 5.0).sum());
        }
        let plan = small_plan(&mols, 1, 3);
        let exp = tiny_experiment("gap", 60);
        let blind = run_molecular_experiment(&exp, Mode::Blind, &mols, &plan, Some(&qta)).unwrap();
        let informed = run_molecular_experiment(&exp, Mode::Informed, &mols, &plan, Some(&qta)).unwrap();
        let mean = |s: &ScoreMatrix| s.entries.iter().map(|e| e.value).sum::<f64>() / s.entries.len() as f64;
        let (ri, rb) = (mean(&informed.scores), mean(&blind.scores));
        assert!(ri - rb > 0.2, "informed {ri} blind {rb}");
    }

    #[test]
    fn parity_csv_has_one_row_per_prediction() {
        let rows = vec![ParityRow {
            mode: Mode::Blind,
            stratum: stratum(0.1, "alpha"),
            repeat: 1,
            fold: 2,
            id: "m1".into(),
            truth: 1.5,
            prediction: 1.25,
        }];
        let text = write_parity_csv(&Provenance::detached(0), &rows);
        assert_eq!(text.lines().nth(2).unwrap(), "blind,0.1/alpha,1,2,m1,1.5,1.25");
    }
}
