mod common;

use qtkit_core::geometry::sample_rotation;
use qtkit_core::provenance::Provenance;
use qtkit_core::qtnet::{
    loss_v1, predict_examples, Checkpoint, Example, Hyperparams, LossKind, ModelConfig, Normalization, ParamSet,
    TargetStats, Variant,
};
use qtkit_core::synthetic::generate_molecules;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn twenty_molecules_halve_the_training_loss() {
    let mols = generate_molecules(20, 31).unwrap();
    let run = common::desk_training(&mols, 16, 1, 8, 200);
    assert!(run.reduction() >= 0.5, "loss {} -> {}", run.first_loss, run.best_train_loss);
}

#[test]
fn augmentation_requires_co_rotated_targets() {
    let mols = generate_molecules(3, 6).unwrap();
    let cfg = ModelConfig::preset(Variant::Sg8_12);
    let stats = TargetStats::fit(mols.iter().flat_map(|m| m.targets.as_ref().unwrap())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in &mols {
        let ex = Example::atomic(m, &cfg, &stats).unwrap();
        let rot = sample_rotation(&mut rng);
        let moved = ex.rotated(&rot);
        // a predictor that returns the stored targets of whatever geometry it sees
        let stored_rotated = moved.target.clone();
        assert_eq!(loss_v1(&stored_rotated, &moved.target), 0.0);
        // the same predictor fed the unrotated targets is penalized
        assert!(loss_v1(&ex.target, &moved.target) > 1e-6);
        // invariant columns do not move
        for (a, b) in ex.target.rows().into_iter().zip(moved.target.rows()) {
            assert_eq!(a[0], b[0]);
            assert_eq!(a[1], b[1]);
        }
    }
}

#[test]
fn checkpoint_reproduces_predictions() {
    let mols = generate_molecules(4, 8).unwrap();
    let cfg = ModelConfig::tiny(Variant::Sg8_5, 2, 6);
    let stats = TargetStats::fit(mols.iter().flat_map(|m| m.targets.as_ref().unwrap())).unwrap();
    let refs: Vec<_> = mols.iter().collect();
    let ex = qtkit_core::qtnet::atomic_examples(&refs, &cfg, &stats).unwrap();
    let hyper = Hyperparams { epochs: 3, batch_size: 2, loss: LossKind::V1, ..Hyperparams::preset(Variant::Sg8_5) };
    let out = qtkit_core::qtnet::train(&cfg, &hyper, &ex[..3], &ex[3..]).unwrap();
    let ck = Checkpoint::new(Provenance::new(cfg.hash(), hyper.seed), &cfg, &out.params, Normalization::Atomic { stats });
    let back = Checkpoint::from_json(&ck.to_json()).unwrap();
    let params: ParamSet = back.param_set().unwrap();
    assert_eq!(params, out.params);
    let a = predict_examples(&cfg, &out.params, &ex, 4).unwrap();
    let b = predict_examples(&back.config, &params, &ex, 4).unwrap();
    assert_eq!(a, b);
}
