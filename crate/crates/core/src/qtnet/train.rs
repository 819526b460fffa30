use std::rc::Rc;

use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Head, Hyperparams, LossKind, ModelConfig};
use super::graph::{build_graph, Batch, GraphInstance};
use super::loss::{loss_weights, ElementWeights};
use super::model::forward;
use super::normalize::TargetStats;
use super::params::{ParamSet, ATOM_OUTPUTS};
use super::tape::Tape;
use crate::error::{Error, Result};
use crate::geometry::{sample_rotation, Rotation, Traceless5, Vec3};
use crate::ingest::MoleculeRecord;

/// One training or evaluation unit: a graph with normalized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub graph: GraphInstance,
    /// `n_atoms × 10` for the atomic head, `1 × outputs` for the molecular head.
    pub target: Array2<f64>,
    /// Normalized per-atom QTA inputs for informed models.
    pub extra: Option<Array2<f64>>,
}

fn rotate_qta_rows(m: &mut Array2<f64>, rot: &Rotation) {
    for mut row in m.rows_mut() {
        let mu = rot.rotate_vec(Vec3::new(row[2], row[3], row[4]));
        let q = rot.rotate5(Traceless5::from_array([row[5], row[6], row[7], row[8], row[9]]));
        for (c, v) in mu.to_array().into_iter().chain(q.to_array()).enumerate() {
            row[2 + c] = v;
        }
    }
}

impl Example {
    /// Atomic-head example; the molecule must carry per-atom targets.
    pub fn atomic(mol: &MoleculeRecord, cfg: &ModelConfig, stats: &TargetStats) -> Result<Example> {
        let targets =
            mol.targets.as_ref().ok_or_else(|| Error::invalid(format!("molecule {} has no atomic targets", mol.id)))?;
        Ok(Example {
            id: mol.id.clone(),
            graph: build_graph(mol, cfg)?,
            target: stats.apply_matrix(targets),
            extra: None,
        })
    }

    /// Co-rotates geometry, orientation-bearing targets and informed inputs.
    pub fn rotated(&self, rot: &Rotation) -> Example {
        let mut out = Example {
            id: self.id.clone(),
            graph: self.graph.rotated(rot),
            target: self.target.clone(),
            extra: self.extra.clone(),
        };
        if out.target.ncols() == ATOM_OUTPUTS && out.target.nrows() == out.graph.n_nodes() {
            rotate_qta_rows(&mut out.target, rot);
        }
        if let Some(x) = &mut out.extra {
            rotate_qta_rows(x, rot);
        }
        out
    }
}

pub fn atomic_examples(mols: &[&MoleculeRecord], cfg: &ModelConfig, stats: &TargetStats) -> Result<Vec<Example>> {
    mols.iter().map(|m| Example::atomic(m, cfg, stats)).collect()
}

/// Disjoint-union batch and stacked targets.
pub fn make_batch(cfg: &ModelConfig, examples: &[&Example]) -> Result<(Batch, Array2<f64>)> {
    let graphs: Vec<&GraphInstance> = examples.iter().map(|e| &e.graph).collect();
    let extra = if cfg.informed {
        let parts: Vec<_> = examples
            .iter()
            .map(|e| e.extra.as_ref().map(|x| x.view()).ok_or_else(|| Error::invalid(format!("example {} lacks informed inputs", e.id))))
            .collect::<Result<_>>()?;
        Some(concatenate(Axis(0), &parts).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let batch = Batch::new(&graphs, cfg, extra)?;
    let targets: Vec<_> = examples.iter().map(|e| e.target.view()).collect();
    let target = concatenate(Axis(0), &targets).map_err(|e| Error::invalid(format!("target shapes differ: {e}")))?;
    let expected_rows = match cfg.head {
        Head::Atomic => batch.n_nodes,
        Head::Molecular { .. } => batch.n_graphs,
    };
    if target.nrows() != expected_rows {
        return Err(Error::invalid(format!("targets have {} rows, model produces {expected_rows}", target.nrows())));
    }
    Ok((batch, target))
}

fn check_loss_kind(cfg: &ModelConfig, kind: LossKind) -> Result<()> {
    match (cfg.head, kind) {
        (Head::Atomic, LossKind::Mse) | (Head::Molecular { .. }, LossKind::V1 | LossKind::V2 { .. }) => {
            Err(Error::invalid("loss kind does not match the model head"))
        }
        _ => Ok(()),
    }
}

/// Summed weighted squared error and its normalizer for one batch, plus
/// gradients of `sum / denom` when requested.
fn batch_terms(
    cfg: &ModelConfig,
    params: &ParamSet,
    examples: &[&Example],
    kind: LossKind,
    ew: &ElementWeights,
    want_grad: bool,
) -> Result<(f64, f64, Option<Vec<Array2<f64>>>)> {
    let (batch, target) = make_batch(cfg, examples)?;
    let mut tape = Tape::new();
    let fwd = forward(&mut tape, cfg, params, &batch)?;
    let (w, denom) = loss_weights(kind, &batch.species, target.dim(), ew);
    let scaled = if denom > 0.0 { w / denom } else { w };
    let loss = tape.weighted_sq_err(fwd.output, Rc::new(target), Rc::new(scaled));
    let value = tape.value(loss)[(0, 0)];
    if !value.is_finite() {
        return Err(Error::numeric("non-finite loss"));
    }
    let grads = want_grad.then(|| {
        tape.backward(loss, params.len())
            .into_iter()
            .zip(params.values())
            .map(|(g, p)| g.unwrap_or_else(|| Array2::zeros(p.dim())))
            .collect()
    });
    Ok((value * denom, denom, grads))
}

/// Loss of one batch and its exact gradient for every parameter matrix.
pub fn loss_and_gradient(
    cfg: &ModelConfig,
    params: &ParamSet,
    examples: &[&Example],
    kind: LossKind,
    ew: &ElementWeights,
) -> Result<(f64, Vec<Array2<f64>>)> {
    check_loss_kind(cfg, kind)?;
    let (sum, denom, g) = batch_terms(cfg, params, examples, kind, ew, true)?;
    Ok((if denom > 0.0 { sum / denom } else { sum }, g.expect("gradient requested")))
}

/// Loss pooled exactly over a whole set, evaluated in chunks of `batch_size`.
pub fn set_loss(
    cfg: &ModelConfig,
    params: &ParamSet,
    examples: &[Example],
    kind: LossKind,
    ew: &ElementWeights,
    batch_size: usize,
) -> Result<f64> {
    check_loss_kind(cfg, kind)?;
    let (mut sum, mut denom) = (0.0, 0.0);
    for chunk in examples.chunks(batch_size.max(1)) {
        let refs: Vec<&Example> = chunk.iter().collect();
        let (s, d, _) = batch_terms(cfg, params, &refs, kind, ew, false)?;
        sum += s;
        denom += d;
    }
    Ok(if denom > 0.0 { sum / denom } else { 0.0 })
}

/// Normalized predictions, one matrix per example.
pub fn predict_examples(
    cfg: &ModelConfig,
    params: &ParamSet,
    examples: &[Example],
    batch_size: usize,
) -> Result<Vec<Array2<f64>>> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let refs: Vec<&Example> = chunk.iter().collect();
        let (batch, _) = make_batch(cfg, &refs)?;
        let pred = super::model::predict(cfg, params, &batch)?;
        let mut row = 0;
        for e in chunk {
            let n = match cfg.head {
                Head::Atomic => e.graph.n_nodes(),
                Head::Molecular { .. } => 1,
            };
            out.push(pred.slice(s![row..row + n, ..]).to_owned());
            row += n;
        }
    }
    Ok(out)
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(params: &ParamSet) -> AdamW {
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Array2<f64>], lr: f64, weight_decay: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params.values_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                *p -= lr * (update + weight_decay * *p);
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
    pub shuffle_seed: u64,
    pub rotation_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss (training
    /// loss when no validation set is given).
    pub params: ParamSet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_loss: Option<f64>,
    pub element_weights: ElementWeights,
}

/// Mini-batch training with fresh rotations per epoch when `cfg.augment`.
pub fn train(cfg: &ModelConfig, hyper: &Hyperparams, train: &[Example], val: &[Example]) -> Result<TrainOutcome> {
    train_monitored(cfg, hyper, train, val, |_, _| true)
}

/// [`train`] with a callback run after every epoch on the epoch record and
/// the current parameters. Returning `false` ends training after that epoch.
pub fn train_monitored(
    cfg: &ModelConfig,
    hyper: &Hyperparams,
    train: &[Example],
    val: &[Example],
    mut monitor: impl FnMut(&EpochRecord, &ParamSet) -> bool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    hyper.validate()?;
    check_loss_kind(cfg, hyper.loss)?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let ew = match hyper.loss {
        LossKind::V2 { weighting } => {
            ElementWeights::fit(train.iter().flat_map(|e| e.graph.species.iter().copied()), weighting)?
        }
        _ => ElementWeights::UNIFORM,
    };
    let mut params = ParamSet::init(cfg, hyper.seed)?;
    let mut best = params.clone();
    let mut best_epoch = None;
    let mut best_loss = None;
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut opt = AdamW::new(&params);
    let mut master = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5eed_cafe_f00d_d00d);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=hyper.epochs {
        let shuffle_seed = master.next_u64();
        let rotation_seed = master.next_u64();
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let rotated: Option<Vec<Example>> = cfg.augment.then(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(rotation_seed);
            train.iter().map(|e| e.rotated(&sample_rotation(&mut rng))).collect()
        });
        let pool = rotated.as_deref().unwrap_or(train);
        let (mut sum, mut denom) = (0.0, 0.0);
        for chunk in order.chunks(hyper.batch_size) {
            let refs: Vec<&Example> = chunk.iter().map(|&i| &pool[i]).collect();
            let (s, d, grads) = batch_terms(cfg, &params, &refs, hyper.loss, &ew, true)
                .map_err(|e| Error::numeric(format!("training diverged at epoch {epoch}: {e}")))?;
            sum += s;
            denom += d;
            opt.step(&mut params, &grads.expect("gradient requested"), hyper.lr, hyper.weight_decay);
            if !params.is_finite() {
                return Err(Error::numeric(format!("training diverged at epoch {epoch}: non-finite parameters")));
            }
        }
        let train_loss = if denom > 0.0 { sum / denom } else { 0.0 };
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(
                set_loss(cfg, &params, val, hyper.loss, &ew, hyper.batch_size)
                    .map_err(|e| Error::numeric(format!("validation failed at epoch {epoch}: {e}")))?,
            )
        };
        let score = val_loss.unwrap_or(train_loss);
        if best_loss.is_none_or(|b| score < b) {
            best_loss = Some(score);
            best_epoch = Some(epoch);
            best = params.clone();
        }
        log::debug!("epoch {epoch}: train {train_loss:.6e} val {val_loss:?}");
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: hyper.lr,
            shuffle_seed,
            rotation_seed: cfg.augment.then_some(rotation_seed),
        };
        let go_on = monitor(&record, &params);
        history.push(record);
        if !go_on {
            break;
        }
    }
    Ok(TrainOutcome { params: best, history, best_epoch, best_loss, element_weights: ew })
}
