//! Scaffold-grouped K-fold assignment and the repeated cross-validation plan.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{parse_smiles, MoleculeRecord};
use crate::provenance::Provenance;
use crate::splits::murcko::{murcko_scaffold, ACYCLIC};

/// How molecules without rings are grouped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcyclicPolicy {
    /// All acyclic molecules form one group.
    #[default]
    Shared,
    /// Each acyclic molecule is its own group.
    Singleton,
}

/// Scaffold key per molecule, in input order.
pub fn scaffold_groups(mols: &[&MoleculeRecord], policy: AcyclicPolicy) -> Result<Vec<(String, String)>> {
    mols.iter()
        .map(|m| {
            let g = parse_smiles(&m.smiles)?;
            let mut key = murcko_scaffold(&g);
            if key == ACYCLIC && policy == AcyclicPolicy::Singleton {
                key = format!("{ACYCLIC}:{}", m.id);
            }
            Ok((m.id.clone(), key))
        })
        .collect()
}

/// Assigns whole groups to `k` folds. Groups are shuffled under `seed`,
/// ordered largest first (stable), and each goes to the currently smallest
/// fold, lowest index on ties. Fold contents are sorted.
pub fn grouped_kfold(groups: &[(String, String)], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let mut by_key: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, key) in groups {
        by_key.entry(key.as_str()).or_default().push(id.as_str());
    }
    if by_key.len() < k {
        return Err(Error::invalid(format!("{} groups cannot fill {k} folds", by_key.len())));
    }
    let mut order: Vec<Vec<&str>> = by_key.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.sort_by_key(|g| std::cmp::Reverse(g.len()));
    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    for g in order {
        let target = (0..k).min_by_key(|&f| (folds[f].len(), f)).expect("k >= 2");
        folds[target].extend(g.iter().map(|s| s.to_string()));
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCell {
    pub repeat: usize,
    pub fold: usize,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub provenance: Provenance,
    pub repeats: usize,
    pub folds: usize,
    pub seeds: Vec<u64>,
    pub holdout_ids: Vec<String>,
    /// `folds[repeat][fold]` molecule IDs.
    pub assignment: Vec<Vec<Vec<String>>>,
    /// Scaffold key per molecule in the train pool.
    pub scaffolds: BTreeMap<String, String>,
}

pub const REPEATS: usize = 5;
pub const FOLDS: usize = 5;

/// One repeat per seed; validation is the fold, training the remaining folds.
pub fn build_plan(
    pool: &[(String, String)],
    holdout: &[String],
    seeds: &[u64],
    folds: usize,
    provenance: Provenance,
) -> Result<FoldPlan> {
    if pool.is_empty() {
        return Err(Error::invalid("empty train pool"));
    }
    let hold: BTreeSet<&str> = holdout.iter().map(String::as_str).collect();
    if let Some((id, _)) = pool.iter().find(|(id, _)| hold.contains(id.as_str())) {
        return Err(Error::invalid(format!("molecule {id} is in both the pool and the holdout")));
    }
    let mut assignment = Vec::with_capacity(seeds.len());
    for &s in seeds {
        assignment.push(grouped_kfold(pool, folds, s)?);
    }
    let mut holdout_ids = holdout.to_vec();
    holdout_ids.sort();
    let plan = FoldPlan {
        provenance,
        repeats: seeds.len(),
        folds,
        seeds: seeds.to_vec(),
        holdout_ids,
        assignment,
        scaffolds: pool.iter().cloned().collect(),
    };
    plan.verify()?;
    Ok(plan)
}

impl FoldPlan {
    pub fn cell(&self, repeat: usize, fold: usize) -> Result<PlanCell> {
        let folds = self
            .assignment
            .get(repeat)
            .ok_or_else(|| Error::invalid(format!("repeat {repeat} out of range")))?;
        let val_ids = folds.get(fold).ok_or_else(|| Error::invalid(format!("fold {fold} out of range")))?.clone();
        let mut train_ids: Vec<String> =
            folds.iter().enumerate().filter(|(f, _)| *f != fold).flat_map(|(_, ids)| ids.iter().cloned()).collect();
        train_ids.sort();
        Ok(PlanCell { repeat, fold, train_ids, val_ids })
    }

    pub fn cells(&self) -> impl Iterator<Item = PlanCell> + '_ {
        (0..self.repeats).flat_map(move |r| (0..self.folds).map(move |f| self.cell(r, f).expect("in range")))
    }

    pub fn pool_ids(&self) -> BTreeSet<&str> {
        self.scaffolds.keys().map(String::as_str).collect()
    }

    /// Checks partition, holdout disjointness and scaffold atomicity.
    pub fn verify(&self) -> Result<()> {
        let pool = self.pool_ids();
        let hold: BTreeSet<&str> = self.holdout_ids.iter().map(String::as_str).collect();
        if !pool.is_disjoint(&hold) {
            return Err(Error::invalid("holdout overlaps the train pool"));
        }
        for (r, folds) in self.assignment.iter().enumerate() {
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            let mut key_fold: BTreeMap<&str, usize> = BTreeMap::new();
            for (f, ids) in folds.iter().enumerate() {
                for id in ids {
                    if !seen.insert(id) {
                        return Err(Error::invalid(format!("repeat {r}: {id} appears in two folds")));
                    }
                    let key = self
                        .scaffolds
                        .get(id)
                        .ok_or_else(|| Error::invalid(format!("repeat {r}: unknown molecule {id}")))?;
                    if *key_fold.entry(key).or_insert(f) != f {
                        return Err(Error::invalid(format!("repeat {r}: scaffold {key} split across folds")));
                    }
                }
            }
            if seen != pool {
                return Err(Error::invalid(format!("repeat {r}: folds do not cover the train pool")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: FoldPlan = serde_json::from_str(s)?;
        p.verify()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singletons(n: usize) -> Vec<(String, String)> {
        (0..n).map(|i| (format!("m{i:03}"), format!("k{i}"))).collect()
    }

    #[test]
    fn ten_singletons_balance() {
        let f = grouped_kfold(&singletons(10), 5, 1).unwrap();
        assert!(f.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn big_group_alone() {
        let mut g: Vec<(String, String)> = (0..6).map(|i| (format!("b{i}"), "big".into())).collect();
        g.extend((0..4).map(|i| (format!("s{i}"), format!("s{i}"))));
        for seed in 0..10 {
            let f = grouped_kfold(&g, 5, seed).unwrap();
            let big = f.iter().find(|f| f.contains(&"b0".to_string())).unwrap();
            assert_eq!(big.len(), 6);
            assert!(f.iter().filter(|f| f.len() == 1).count() == 4);
        }
    }

    #[test]
    fn too_few_groups() {
        assert!(grouped_kfold(&singletons(4), 5, 0).is_err());
        assert!(grouped_kfold(&singletons(4), 1, 0).is_err());
    }

    #[test]
    fn plan_round_trip_and_cells() {
        let plan = build_plan(&singletons(25), &["h1".into()], &[1, 2, 3, 4, 5], 5, Provenance::detached(0)).unwrap();
        assert_eq!(plan.cells().count(), 25);
        for c in plan.cells() {
            assert_eq!(c.val_ids.len(), 5);
            assert_eq!(c.train_ids.len(), 20);
        }
        let back = FoldPlan::from_json(&plan.to_json().unwrap()).unwrap();
        assert_eq!(back, plan);
        assert_eq!(back.to_json().unwrap(), plan.to_json().unwrap());
        assert!(build_plan(&[], &[], &[1], 5, Provenance::detached(0)).is_err());
        assert!(build_plan(&singletons(5), &["m000".into()], &[1], 5, Provenance::detached(0)).is_err());
    }
}
