use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::Vec3;
use crate::ingest::Element;

fn random_example(n: usize, cfg: &ModelConfig, seed: u64) -> Example {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let species: Vec<Element> = (0..n).map(|i| Element::ALL[(i + seed as usize) % 4]).collect();
    let positions: Vec<Vec3> = (0..n)
        .map(|i| Vec3::new(1.3 * i as f64 + rng.random_range(-0.3..0.3), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let graph = build_graph_from(&species, &positions, cfg.connectivity).unwrap();
    let rows = match cfg.head {
        Head::Atomic => n,
        Head::Molecular { .. } => 1,
    };
    let cols = match cfg.head {
        Head::Atomic => ATOM_OUTPUTS,
        Head::Molecular { outputs } => outputs,
    };
    let target = Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0));
    let extra = cfg.informed.then(|| Array2::from_shape_simple_fn((n, INFORMED_INPUTS), || rng.random_range(-1.0..1.0)));
    Example { id: format!("m{seed}"), graph, target, extra }
}

/// Largest relative deviation between analytic and central-difference
/// gradients over every scalar parameter. Components smaller than `floor`
/// are measured against the floor: at `h = 1e-5` the difference quotient of
/// an O(1) loss carries ~1e-11 of rounding noise, so smaller gradients
/// cannot be resolved by the oracle itself.
pub(crate) fn gradcheck(cfg: &ModelConfig, examples: &[Example], kind: LossKind, seed: u64) -> f64 {
    let mut params = ParamSet::init(cfg, seed).unwrap();
    // non-trivial readout logits and layer-norm affines
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    for (name, v) in params.names().to_vec().into_iter().zip(params.values_mut()) {
        if name.ends_with("gamma") || name.ends_with("beta") || name.ends_with("logits") || name.contains(".b") {
            v.mapv_inplace(|x| x + rng.random_range(-0.3..0.3));
        }
    }
    let refs: Vec<&Example> = examples.iter().collect();
    let ew = ElementWeights([1.3, 0.7, 1.1, 0.9]);
    let (_, grads) = loss_and_gradient(cfg, &params, &refs, kind, &ew).unwrap();
    let h = 1e-5;
    let floor = 1e-6;
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
            let scale = an.abs().max(fd.abs()).max(floor);
            worst = worst.max((an - fd).abs() / scale);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences_atomic() {
    for (n, variant, kind) in [
        (2, Variant::Sfc2, LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency }),
        (3, Variant::Sgfc, LossKind::V1),
        (4, Variant::Sg8_12, LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency }),
    ] {
        let cfg = ModelConfig::tiny(variant, 1, 4);
        let ex = vec![random_example(n, &cfg, n as u64)];
        let worst = gradcheck(&cfg, &ex, kind, 11);
        assert!(worst < 1e-4, "{variant} with {n} atoms: worst relative error {worst:e}");
    }
}

#[test]
fn gradients_match_finite_differences_molecular_informed() {
    let mut cfg = ModelConfig::tiny(Variant::Molecular, 1, 4);
    cfg.informed = true;
    cfg.head = Head::Molecular { outputs: 2 };
    cfg.connectivity = Connectivity::Full;
    cfg.rbf_cutoff = FULL_GRAPH_RBF_CUTOFF;
    let ex = vec![random_example(3, &cfg, 1), random_example(2, &cfg, 2)];
    let worst = gradcheck(&cfg, &ex, LossKind::Mse, 5);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn readout_weights_are_a_distribution() {
    let cfg = ModelConfig::tiny(Variant::Sfc2, 3, 4);
    let mut params = ParamSet::init(&cfg, 0).unwrap();
    *params.get_mut("readout.logits").unwrap() = ndarray::array![[3.0, -20.0, 0.5]];
    let ex = random_example(3, &cfg, 0);
    let (batch, _) = make_batch(&cfg, &[&ex]).unwrap();
    let mut tape = tape::Tape::new();
    let f = forward(&mut tape, &cfg, &params, &batch).unwrap();
    let a = tape.value(f.alpha.unwrap());
    assert!((a.sum() - 1.0).abs() < 1e-12);
    let (_, grads) = loss_and_gradient(&cfg, &params, &[&ex], LossKind::V1, &ElementWeights::UNIFORM).unwrap();
    let gl = &grads[params.index_of("readout.logits").unwrap()];
    assert!(gl.sum().abs() < 1e-12);
}

fn zero_heads(cfg: &ModelConfig, params: &mut ParamSet) {
    for k in 0..cfg.depth {
        for name in [format!("layer{k}.head.out.w0"), format!("layer{k}.head.out.b0")] {
            params.get_mut(&name).unwrap().fill(0.0);
        }
    }
}

#[test]
fn zeroed_heads_give_zero_output_and_zero_bias_gradient() {
    let cfg = ModelConfig::tiny(Variant::Sg8_12, 2, 6);
    let mut params = ParamSet::init(&cfg, 4).unwrap();
    zero_heads(&cfg, &mut params);
    let mut ex = random_example(4, &cfg, 3);
    let (batch, _) = make_batch(&cfg, &[&ex]).unwrap();
    assert!(predict(&cfg, &params, &batch).unwrap().iter().all(|&x| x == 0.0));
    ex.target.fill(0.0);
    let kind = LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency };
    let (loss, grads) = loss_and_gradient(&cfg, &params, &[&ex], kind, &ElementWeights::UNIFORM).unwrap();
    assert_eq!(loss, 0.0);
    for k in 0..cfg.depth {
        let g = &grads[params.index_of(&format!("layer{k}.head.out.b0")).unwrap()];
        assert!(g.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn atom_permutation_permutes_outputs() {
    let cfg = ModelConfig::tiny(Variant::Sg8_12, 2, 6);
    let params = ParamSet::init(&cfg, 8).unwrap();
    let ex = random_example(5, &cfg, 7);
    let perm = [3, 0, 4, 1, 2];
    let species: Vec<Element> = perm.iter().map(|&i| ex.graph.species[i]).collect();
    let positions: Vec<Vec3> = perm.iter().map(|&i| ex.graph.positions[i]).collect();
    let g2 = build_graph_from(&species, &positions, cfg.connectivity).unwrap();
    let b1 = Batch::new(&[&ex.graph], &cfg, None).unwrap();
    let b2 = Batch::new(&[&g2], &cfg, None).unwrap();
    let y1 = predict(&cfg, &params, &b1).unwrap();
    let y2 = predict(&cfg, &params, &b2).unwrap();
    for (new, &old) in perm.iter().enumerate() {
        for c in 0..ATOM_OUTPUTS {
            assert!((y2[(new, c)] - y1[(old, c)]).abs() < 1e-10);
        }
    }
}

#[test]
fn batching_matches_single_molecule_predictions() {
    let cfg = ModelConfig::tiny(Variant::Sg8_5, 2, 5);
    let params = ParamSet::init(&cfg, 2).unwrap();
    let exs: Vec<Example> = (0..3).map(|s| random_example(3 + s as usize, &cfg, s)).collect();
    let together = predict_examples(&cfg, &params, &exs, 8).unwrap();
    let alone = predict_examples(&cfg, &params, &exs, 1).unwrap();
    for (a, b) in together.iter().zip(&alone) {
        assert!((a - b).iter().all(|d| d.abs() < 1e-12));
    }
}

#[test]
fn rbf_features_are_rotation_invariant() {
    let cfg = ModelConfig::tiny(Variant::Sg8_12, 1, 4);
    let ex = random_example(4, &cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = crate::geometry::sample_rotation(&mut rng);
    let b1 = Batch::new(&[&ex.graph], &cfg, None).unwrap();
    let b2 = Batch::new(&[&ex.graph.rotated(&r)], &cfg, None).unwrap();
    let rbf1 = b1.geo_node.slice(ndarray::s![.., 3..]).to_owned();
    let rbf2 = b2.geo_node.slice(ndarray::s![.., 3..]).to_owned();
    assert!((rbf1 - rbf2).iter().all(|d| d.abs() < 1e-10));
    let leg1 = b1.geo_pair.slice(ndarray::s![.., 5..]).to_owned();
    let leg2 = b2.geo_pair.slice(ndarray::s![.., 5..]).to_owned();
    assert!((leg1 - leg2).iter().all(|d| d.abs() < 1e-10));
}

fn hyper(epochs: usize, lr: f64, seed: u64, loss: LossKind) -> Hyperparams {
    Hyperparams { lr, weight_decay: 0.0, batch_size: 4, epochs, seed, loss }
}

#[test]
fn zero_epochs_return_initialization() {
    let cfg = ModelConfig::tiny(Variant::Sgfc, 1, 4);
    let ex = vec![random_example(3, &cfg, 1)];
    let out = train(&cfg, &hyper(0, 1e-3, 6, LossKind::V1), &ex, &[]).unwrap();
    assert_eq!(out.params, ParamSet::init(&cfg, 6).unwrap());
    assert!(out.history.is_empty());
}

#[test]
fn training_is_seed_deterministic() {
    let cfg = ModelConfig::tiny(Variant::Sfc2, 1, 4);
    let ex: Vec<Example> = (0..5).map(|s| random_example(3, &cfg, s)).collect();
    let h = hyper(4, 1e-2, 2, LossKind::V2 { weighting: ElementWeighting::SqrtInverseFrequency });
    let a = train(&cfg, &h, &ex[..4], &ex[4..]).unwrap();
    let b = train(&cfg, &h, &ex[..4], &ex[4..]).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.history, b.history);
    assert!(a.history.iter().all(|r| r.rotation_seed.is_some()));
}

#[test]
fn memorizes_a_single_molecule() {
    let cfg = ModelConfig::tiny(Variant::Sgfc, 1, 8);
    let ex = vec![random_example(3, &cfg, 4)];
    let out = train(&cfg, &hyper(300, 1e-2, 1, LossKind::V1), &ex, &[]).unwrap();
    let first = out.history[0].train_loss;
    let best = out.best_loss.unwrap();
    assert!(best < 1e-3 * first, "first {first:e} best {best:e}");
}
