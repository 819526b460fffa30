//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use qtkit_core::ingest::MoleculeRecord;
use qtkit_core::splits::FoldPlan;

/// Relabels clusters by first appearance so partitions compare directly.
pub fn canonical(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
        })
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Density clustering by direct enumeration of the condensed tree: at every
/// distinct mutual-reachability level the connected components are
/// recomputed from scratch by graph search, and the final flat clustering is
/// the best-stability antichain found by trying every subset of clusters.
pub fn hdbscan_brute_force(points: &[Vec<f64>], min_cluster_size: usize, min_samples: usize) -> Vec<Option<usize>> {
    let n = points.len();
    if n < min_cluster_size || n < 2 {
        return vec![None; n];
    }
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| euclid(&points[i], &points[j])).collect();
            d.sort_by(f64::total_cmp);
            d[min_samples.min(n) - 1]
        })
        .collect();
    let mr = |i: usize, j: usize| euclid(&points[i], &points[j]).max(core[i]).max(core[j]);
    let mut levels: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            levels.push(mr(i, j));
        }
    }
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();

    // components of `members` using only edges strictly shorter than `w`
    let components = |members: &BTreeSet<usize>, w: f64| -> Vec<BTreeSet<usize>> {
        let mut left = members.clone();
        let mut out = Vec::new();
        while let Some(&s) = left.iter().next() {
            left.remove(&s);
            let mut comp = BTreeSet::from([s]);
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                let next: Vec<usize> = left.iter().copied().filter(|&v| mr(u, v) < w).collect();
                for v in next {
                    left.remove(&v);
                    comp.insert(v);
                    stack.push(v);
                }
            }
            out.push(comp);
        }
        out
    };

    struct Cl {
        parent: Option<usize>,
        birth: f64,
        stability: f64,
        alive: BTreeSet<usize>,
    }
    let mut cls = vec![Cl { parent: None, birth: 0.0, stability: 0.0, alive: (0..n).collect() }];
    let mut last_cluster = vec![0usize; n];
    let mut active = vec![0usize];
    for &w in &levels {
        let lambda = 1.0 / w;
        let mut next_active = Vec::new();
        for &c in &active {
            let comps = components(&cls[c].alive, w);
            let (large, small): (Vec<_>, Vec<_>) = comps.into_iter().partition(|s| s.len() >= min_cluster_size);
            let birth = cls[c].birth;
            for s in &small {
                cls[c].stability += s.len() as f64 * (lambda - birth);
                for &p in s {
                    last_cluster[p] = c;
                }
            }
            match large.len() {
                0 => cls[c].alive.clear(),
                1 => {
                    cls[c].alive = large.into_iter().next().expect("one");
                    next_active.push(c);
                }
                _ => {
                    cls[c].alive.clear();
                    for s in large {
                        cls[c].stability += s.len() as f64 * (lambda - birth);
                        for &p in &s {
                            last_cluster[p] = cls.len();
                        }
                        cls.push(Cl { parent: Some(c), birth: lambda, stability: 0.0, alive: s });
                        next_active.push(cls.len() - 1);
                    }
                }
            }
        }
        active = next_active;
    }

    let m = cls.len();
    let is_ancestor = |a: usize, mut b: usize| -> bool {
        while let Some(p) = cls[b].parent {
            if p == a {
                return true;
            }
            b = p;
        }
        false
    };
    let mut best: (f64, u64) = (-1.0, 0);
    for mask in 0u64..(1u64 << (m - 1)) {
        let chosen: Vec<usize> = (1..m).filter(|&k| mask >> (k - 1) & 1 == 1).collect();
        let antichain = chosen.iter().all(|&a| chosen.iter().all(|&b| a == b || !is_ancestor(a, b)));
        if !antichain {
            continue;
        }
        let total: f64 = chosen.iter().map(|&k| cls[k].stability).sum();
        if total > best.0 {
            best = (total, mask);
        }
    }
    let selected = |k: usize| k > 0 && best.1 >> (k - 1) & 1 == 1;
    let labels: Vec<Option<usize>> = (0..n)
        .map(|p| {
            let mut c = last_cluster[p];
            loop {
                if selected(c) {
                    return Some(c);
                }
                c = cls[c].parent?;
            }
        })
        .collect();
    canonical(&labels)
}

/// Heavy-atom and bond counts of a SMILES string by plain character
/// scanning: every atom token except the first of each dot-separated
/// component adds one bond, every matched ring-closure pair adds one more.
pub fn smiles_counts(s: &str) -> Option<(usize, usize)> {
    let chars: Vec<char> = s.chars().collect();
    let mut atoms = 0;
    let mut closures = 0;
    let mut open: BTreeSet<String> = BTreeSet::new();
    let mut depth = 0i32;
    let mut components = 1;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            'C' | 'N' | 'O' | 'c' | 'n' | 'o' => atoms += 1,
            '[' => {
                let end = chars[i..].iter().position(|&x| x == ']')? + i;
                atoms += 1;
                i = end;
            }
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            '-' | '=' | '#' | ':' => {}
            '.' => components += 1,
            '%' => {
                let label: String = chars.get(i + 1..i + 3)?.iter().collect();
                if !open.remove(&label) {
                    open.insert(label);
                } else {
                    closures += 1;
                }
                i += 2;
            }
            d if d.is_ascii_digit() => {
                let label = d.to_string();
                if !open.remove(&label) {
                    open.insert(label);
                } else {
                    closures += 1;
                }
            }
            _ => return None,
        }
        i += 1;
    }
    if depth != 0 || !open.is_empty() || atoms == 0 {
        return None;
    }
    Some((atoms, atoms - components + closures))
}

/// Draws from the studentized range distribution by direct simulation.
pub fn studentized_range_draws(k: usize, df: f64, draws: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new(df).expect("positive df");
    (0..draws)
        .map(|_| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for _ in 0..k {
                let z: f64 = StandardNormal.sample(&mut rng);
                lo = lo.min(z);
                hi = hi.max(z);
            }
            (hi - lo) / (chi.sample(&mut rng) / df).sqrt()
        })
        .collect()
}

pub fn empirical_quantile(mut x: Vec<f64>, q: f64) -> f64 {
    let idx = ((x.len() as f64 - 1.0) * q).round() as usize;
    let (_, v, _) = x.select_nth_unstable_by(idx, f64::total_cmp);
    *v
}

/// Two-sided exact signed-rank p-value by listing every sign assignment.
pub fn wilcoxon_enumerated(d: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = nz.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nz[a].abs().total_cmp(&nz[b].abs()));
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[idx[j + 1]].abs() == nz[idx[i]].abs() {
            j += 1;
        }
        for &k in &idx[i..=j] {
            rank[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    let w: f64 = (0..n).filter(|&k| nz[k] > 0.0).map(|k| rank[k]).sum();
    let (mut le, mut ge) = (0usize, 0usize);
    for mask in 0u32..(1 << n) {
        let s: f64 = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| rank[k]).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (w, (2.0 * (le.min(ge) as f64) / total).min(1.0))
}

/// Cells whose validation side shares a scaffold key with the training side.
pub fn scaffold_leaks(plan: &FoldPlan) -> usize {
    plan.cells()
        .filter(|cell| {
            let train: BTreeSet<&str> = cell.train_ids.iter().map(|id| plan.scaffolds[id].as_str()).collect();
            cell.val_ids.iter().any(|id| train.contains(plan.scaffolds[id].as_str()))
        })
        .count()
}

pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

pub fn ids(mols: &[MoleculeRecord]) -> Vec<String> {
    mols.iter().map(|m| m.id.clone()).collect()
}

/// Largest relative deviation of SOAP descriptors under a random rotation,
/// a translation and a reversal of atom order, over every atom of `mols`.
pub fn soap_invariance_error(mols: &[MoleculeRecord], seed: u64) -> f64 {
    use qtkit_core::environments::{SoapCalculator, SoapParams};
    use qtkit_core::geometry::{sample_rotation, Vec3};
    use qtkit_core::ingest::Element;

    let calc = SoapCalculator::new(SoapParams::default(), &[Element::H, Element::C, Element::N, Element::O]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for m in mols {
        let rot = sample_rotation(&mut rng);
        let shift = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let moved: Vec<Vec3> = m.positions.iter().map(|p| rot.rotate_vec(*p) + shift).collect();
        let n = m.n_atoms();
        let rev_el: Vec<Element> = m.elements.iter().rev().copied().collect();
        let rev_pos: Vec<Vec3> = m.positions.iter().rev().copied().collect();
        for i in 0..n {
            let base = calc.descriptor_raw(&m.elements, &m.positions, i).unwrap();
            let scale = base.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let a = calc.descriptor_raw(&m.elements, &moved, i).unwrap();
            let b = calc.descriptor_raw(&rev_el, &rev_pos, n - 1 - i).unwrap();
            for (x, (y, z)) in base.iter().zip(a.iter().zip(&b)) {
                worst = worst.max((x - y).abs() / scale).max((x - z).abs() / scale);
            }
        }
    }
    worst
}

/// Seeded small instances for the brute-force clustering oracle:
/// (points, min_cluster_size, min_samples).
pub fn small_cluster_instances(count: usize, seed: u64) -> Vec<(Vec<Vec<f64>>, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = rng.random_range(5..=12);
            let n_centers = rng.random_range(1..=3);
            let centers = uniform_points(&mut rng, n_centers, 2, 4.0);
            let pts = (0..n)
                .map(|i| {
                    let c = &centers[i % centers.len()];
                    c.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect()
                })
                .collect();
            let mcs = 2 + k % 3;
            let ms = 1 + k % mcs;
            (pts, mcs, ms)
        })
        .collect()
}

/// Two isotropic Gaussian blobs with unit σ whose centres are 20σ apart.
pub fn two_blobs(per_blob: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(2 * per_blob);
    let mut truth = Vec::with_capacity(2 * per_blob);
    for (b, cx) in [0.0, 20.0].into_iter().enumerate() {
        for _ in 0..per_blob {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            pts.push(vec![cx + x, y]);
            truth.push(b);
        }
    }
    (pts, truth)
}

pub fn to_array(points: &[Vec<f64>]) -> ndarray::Array2<f64> {
    let d = points.first().map_or(0, Vec::len);
    ndarray::Array2::from_shape_fn((points.len(), d), |(i, j)| points[i][j])
}

/// Environment labels, held set, holdout and 5×5 plan for a synthetic corpus.
pub struct SplitCorpus {
    pub dataset: qtkit_core::ingest::Dataset,
    pub labels: qtkit_core::environments::AtomLabels,
    pub held: BTreeSet<qtkit_core::environments::EnvLabel>,
    pub holdout: Vec<String>,
    pub plan: FoldPlan,
}

pub fn split_corpus(n: usize, seed: u64) -> SplitCorpus {
    use qtkit_core::environments::{
        build_holdout, cooccurrence, expand_held_labels, label_atoms, ClusterParams, ElementClustering, PcaTarget,
        SoapParams,
    };
    use qtkit_core::ingest::Element;
    use qtkit_core::provenance::Provenance;
    use qtkit_core::splits::{build_plan, scaffold_groups, AcyclicPolicy};

    let dataset = qtkit_core::synthetic::synthetic_dataset(n, seed).unwrap();
    let soap = SoapParams { cutoff: 6.0, n_max: 4, l_max: 3, sigma: 0.7 };
    let per_element: Vec<ElementClustering> = Element::ALL
        .iter()
        .map(|&element| ElementClustering {
            element,
            pca: PcaTarget::Components(6),
            cluster: ClusterParams { min_cluster_size: 15, min_samples: 5 },
        })
        .collect();
    let (labels, _) = label_atoms(&dataset, &soap, &per_element).unwrap();
    let universe = labels.all_labels();
    let co = cooccurrence(&labels, &universe);
    // first label (rarest first) whose co-occurrence closure holds out
    // between 5% and 40% of the corpus and leaves enough scaffolds for 5 folds
    let mut by_support: Vec<_> = co.labels.iter().zip(&co.support).filter(|(_, &s)| s > 0).collect();
    by_support.sort_by_key(|(l, s)| (**s, **l));
    let ids: Vec<String> = dataset.molecules.iter().map(|m| m.id.clone()).collect();
    let (held, holdout, groups) = by_support
        .iter()
        .find_map(|(l, _)| {
            let held = expand_held_labels(&co, &[**l], 0.9);
            let (pool_ids, holdout) = build_holdout(&ids, &labels, &held).unwrap();
            let share = holdout.len() as f64 / ids.len() as f64;
            let pool_set: BTreeSet<&str> = pool_ids.iter().map(String::as_str).collect();
            let pool_mols: Vec<&MoleculeRecord> =
                dataset.molecules.iter().filter(|m| pool_set.contains(m.id.as_str())).collect();
            let groups = scaffold_groups(&pool_mols, AcyclicPolicy::Shared).unwrap();
            let n_groups = groups.iter().map(|(_, k)| k.as_str()).collect::<BTreeSet<_>>().len();
            ((0.05..=0.4).contains(&share) && n_groups >= 10).then_some((held, holdout, groups))
        })
        .expect("no admissible held label in the synthetic corpus");
    let plan = build_plan(&groups, &holdout, &[11, 22, 33, 44, 55], 5, Provenance::detached(seed)).unwrap();
    SplitCorpus { dataset, labels, held, holdout, plan }
}

/// Training-side molecules carrying a held label, summed over all cells.
pub fn held_label_leaks(c: &SplitCorpus) -> usize {
    c.plan
        .cells()
        .map(|cell| {
            cell.train_ids
                .iter()
                .chain(&cell.val_ids)
                .filter(|id| c.labels.by_molecule[*id].iter().any(|l| c.held.contains(l)))
                .count()
        })
        .sum()
}

/// Largest relative gap between analytic and central-difference gradients
/// (h = 1e-5) over every scalar parameter; components below 1e-6 are
/// measured against 1e-6, the resolution of the difference quotient.
pub fn gradcheck(
    cfg: &qtkit_core::qtnet::ModelConfig,
    examples: &[qtkit_core::qtnet::Example],
    kind: qtkit_core::qtnet::LossKind,
    seed: u64,
) -> f64 {
    use qtkit_core::qtnet::{loss_and_gradient, ElementWeights, ParamSet};
    let mut params = ParamSet::init(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    // move zero-initialized biases, logits and norm affines off their init
    for v in params.values_mut() {
        v.mapv_inplace(|x| x + rng.random_range(-0.2..0.2));
    }
    let refs: Vec<&qtkit_core::qtnet::Example> = examples.iter().collect();
    let ew = ElementWeights([1.2, 0.8, 1.1, 0.9]);
    let (_, grads) = loss_and_gradient(cfg, &params, &refs, kind, &ew).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for p in 0..params.len() {
        for k in 0..params.values()[p].len() {
            let orig = params.values()[p].as_slice().unwrap()[k];
            params.values_mut()[p].as_slice_mut().unwrap()[k] = orig + h;
            let (lp, _) = loss_and_gradient(cfg, &params, &refs, kind, &ew).unwrap();
            params.values_mut()[p].as_slice_mut().unwrap()[k] = orig - h;
            let (lm, _) = loss_and_gradient(cfg, &params, &refs, kind, &ew).unwrap();
            params.values_mut()[p].as_slice_mut().unwrap()[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let an = grads[p].as_slice().unwrap()[k];
            worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-6));
        }
    }
    worst
}

/// Atomic examples for `n` random atoms placed along a jittered line.
pub fn random_molecule(n: usize, seed: u64) -> MoleculeRecord {
    use qtkit_core::geometry::Vec3;
    use qtkit_core::ingest::{Element, Qm9Props};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elements: Vec<Element> = (0..n).map(|i| Element::ALL[(i + seed as usize) % 4]).collect();
    let positions: Vec<Vec3> = (0..n)
        .map(|i| Vec3::new(2.2 * i as f64 + rng.random_range(-0.4..0.4), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let targets = Some(qtkit_core::synthetic::analytic_targets(&elements, &positions).unwrap());
    MoleculeRecord {
        id: format!("rand{seed}"),
        elements,
        positions,
        smiles: String::new(),
        qm9: Qm9Props::default(),
        targets,
    }
}

pub struct DeskRun {
    pub first_loss: f64,
    pub best_train_loss: f64,
    pub val_ccc_n: f64,
    pub epochs: usize,
}

impl DeskRun {
    pub fn reduction(&self) -> f64 {
        1.0 - self.best_train_loss / self.first_loss
    }
}

/// Trains the augmented 8-Bohr/12-neighbour variant at reduced width on the
/// first `n_train` molecules of `mols` and validates on the rest.
pub fn desk_training(
    mols: &[MoleculeRecord],
    n_train: usize,
    depth: usize,
    width: usize,
    epochs: usize,
) -> DeskRun {
    use qtkit_core::qtnet::{
        atomic_examples, predict_examples, train, ElementWeighting, Hyperparams, LossKind, ModelConfig, TargetStats,
        Variant,
    };
    let cfg = ModelConfig::tiny(Variant::Sg8_12, depth, width);
    let (tr, va) = mols.split_at(n_train);
    let stats = TargetStats::fit(tr.iter().flat_map(|m| m.targets.as_ref().unwrap())).unwrap();
    let tr_refs: Vec<&MoleculeRecord> = tr.iter().collect();
    let va_refs: Vec<&MoleculeRecord> = va.iter().collect();
    let train_ex = atomic_examples(&tr_refs, &cfg, &stats).unwrap();
    let val_ex = atomic_examples(&va_refs, &cfg, &stats).unwrap();
    let hyper = Hyperparams {
        lr: 3e-3,
        weight_decay: 1e-5,
        batch_size: 8,
        epochs,
        seed: 2024,
        loss: LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency },
    };
    let out = train(&cfg, &hyper, &train_ex, &val_ex).unwrap();
    let preds = predict_examples(&cfg, &out.params, &val_ex, 16).unwrap();
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (m, p) in va.iter().zip(&preds) {
        for (t, a) in m.targets.as_ref().unwrap().iter().zip(stats.invert_matrix(p)) {
            truth.push(t.n_e);
            pred.push(a.n_e);
        }
    }
    DeskRun {
        first_loss: out.history[0].train_loss,
        best_train_loss: out.history.iter().map(|r| r.train_loss).fold(f64::INFINITY, f64::min),
        val_ccc_n: qtkit_core::stats::ccc(&truth, &pred).unwrap(),
        epochs,
    }
}
