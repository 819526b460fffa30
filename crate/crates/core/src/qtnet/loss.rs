use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{ElementWeighting, LossKind};
use super::params::ATOM_OUTPUTS;
use crate::error::{Error, Result};
use crate::ingest::Element;

/// Column weights of the v1 loss: N, λ, μ averaged over 3, Q averaged over 5.
const V1_COLUMNS: [f64; ATOM_OUTPUTS] = [1.0, 1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.2, 0.2, 0.2, 0.2, 0.2];
/// Column weights of the v2 loss: squared vector norm and Frobenius norm of Q.
const V2_COLUMNS: [f64; ATOM_OUTPUTS] = [1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 1.5];

/// Per-element atom weights for the v2 loss, indexed by [`Element::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementWeights(pub [f64; 4]);

impl ElementWeights {
    pub const UNIFORM: ElementWeights = ElementWeights([1.0; 4]);

    /// Weights from element counts over the training atoms; absent elements get 0.
    pub fn fit(species: impl IntoIterator<Item = Element>, weighting: ElementWeighting) -> Result<Self> {
        let mut counts = [0usize; 4];
        for e in species {
            counts[e.index()] += 1;
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("element weights need at least one atom"));
        }
        let mut w = [0.0; 4];
        for (wi, &c) in w.iter_mut().zip(&counts) {
            if c > 0 {
                *wi = match weighting {
                    ElementWeighting::SqrtInverseFrequency => (total as f64 / c as f64).sqrt(),
                    ElementWeighting::PerElementSumToOne => 1.0 / c as f64,
                };
            }
        }
        Ok(ElementWeights(w))
    }
}

/// Unnormalized per-entry weights and the normalizer of a loss, so that
/// `loss = Σ W ⊙ (pred − target)² / denom`. Keeping the two apart lets
/// batch losses be pooled exactly over a whole set.
pub fn loss_weights(kind: LossKind, species: &[usize], shape: (usize, usize), ew: &ElementWeights) -> (Array2<f64>, f64) {
    match kind {
        LossKind::V1 => {
            assert_eq!(shape, (species.len(), ATOM_OUTPUTS), "v1 loss needs per-atom outputs");
            let w = Array2::from_shape_fn(shape, |(_, c)| V1_COLUMNS[c] / 4.0);
            (w, species.len() as f64)
        }
        LossKind::V2 { .. } => {
            assert_eq!(shape, (species.len(), ATOM_OUTPUTS), "v2 loss needs per-atom outputs");
            let w = Array2::from_shape_fn(shape, |(i, c)| ew.0[species[i]] * V2_COLUMNS[c] / 4.0);
            let denom = species.iter().map(|&s| ew.0[s]).sum();
            (w, denom)
        }
        LossKind::Mse => (Array2::ones(shape), (shape.0 * shape.1) as f64),
    }
}

fn weighted(pred: &Array2<f64>, target: &Array2<f64>, w: &Array2<f64>, denom: f64) -> f64 {
    assert_eq!(pred.dim(), target.dim(), "prediction/target shape");
    let s: f64 = ndarray::Zip::from(pred).and(target).and(w).fold(0.0, |acc, &p, &t, &w| acc + w * (p - t) * (p - t));
    if denom > 0.0 {
        s / denom
    } else {
        0.0
    }
}

/// Per-atom average of `¼[ΔN² + Δλ² + Σ Δμ²/3 + Σ ΔQ²/5]`.
pub fn loss_v1(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let species = vec![0; pred.nrows()];
    let (w, d) = loss_weights(LossKind::V1, &species, pred.dim(), &ElementWeights::UNIFORM);
    weighted(pred, target, &w, d)
}

/// Weighted average of `¼[ΔN² + Δλ² + |Δμ|² + ‖ΔQ‖²_F]` with per-element weights.
pub fn loss_v2(pred: &Array2<f64>, target: &Array2<f64>, species: &[Element], ew: &ElementWeights) -> f64 {
    let idx: Vec<usize> = species.iter().map(|e| e.index()).collect();
    let kind = LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency };
    let (w, d) = loss_weights(kind, &idx, pred.dim(), ew);
    weighted(pred, target, &w, d)
}
