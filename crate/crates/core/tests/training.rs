use mtdea_core::data::{two_task_graph, DatasetSplit, SplitRole, TwoTaskConfig};
use mtdea_core::eval::{evaluate, RankingScheme};
use mtdea_core::model::{checkpoint_bytes, checkpoint_load, checkpoint_save, ModelConfig, ModelScorer};
use mtdea_core::rng::substream;
use mtdea_core::train::{adapt, train, TrainConfig};
use rand::RngCore;

fn split(seed: u64, role: SplitRole) -> DatasetSplit {
    let cfg = TwoTaskConfig {
        seed,
        half: 20,
        edges_per_relation: 60,
        ..TwoTaskConfig::default()
    };
    two_task_graph(&cfg, role).unwrap().split
}

fn small() -> (ModelConfig, TrainConfig) {
    let model = ModelConfig {
        hidden_dim: 8,
        num_gnn_layers: 1,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        batch_positives: 32,
        lr: 1e-2,
        max_epochs: 6,
        patience: 6,
        adapt_epochs: 3,
        seed: 11,
        ..TrainConfig::default()
    };
    (model, train)
}

#[test]
fn same_seed_gives_identical_params_history_and_adaptation() {
    let (mcfg, tcfg) = small();
    let (tr, va, te) = (split(0, SplitRole::Train), split(1, SplitRole::Valid), split(2, SplitRole::Test));
    let (p1, h1) = train(&tr, Some(&va), &tcfg, &mcfg).unwrap();
    let (p2, h2) = train(&tr, Some(&va), &tcfg, &mcfg).unwrap();
    assert_eq!(checkpoint_bytes(&p1), checkpoint_bytes(&p2));
    assert_eq!(h1.to_csv(false), h2.to_csv(false));
    let a1 = adapt(&p1, te.observable(), &tcfg).unwrap();
    let a2 = adapt(&p2, te.observable(), &tcfg).unwrap();
    assert_eq!(a1, a2);

    let (p3, _) = train(&tr, Some(&va), &TrainConfig { seed: 12, ..tcfg }, &mcfg).unwrap();
    assert_ne!(checkpoint_bytes(&p1), checkpoint_bytes(&p3));
}

#[test]
fn early_stopping_returns_best_validation_epoch() {
    let (mcfg, tcfg) = small();
    let (tr, va) = (split(3, SplitRole::Train), split(4, SplitRole::Valid));
    let (params, hist) = train(&tr, Some(&va), &tcfg, &mcfg).unwrap();
    assert!(hist.epochs.len() <= tcfg.max_epochs);
    let best = hist.best_epoch.unwrap();
    let top = hist.epochs.iter().map(|e| e.val_mrr).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(hist.epochs[best].val_mrr, top);
    let val_seed = substream(tcfg.seed, "train.valid").next_u64();
    let scorer = ModelScorer::new(&params, va.observable()).unwrap();
    let again = evaluate(&scorer, va.observable(), va.missing(), RankingScheme::DUAL, val_seed).unwrap();
    assert_eq!(again.mrr, top);
}

#[test]
fn adaptation_freezes_everything_but_attention() {
    let (mcfg, tcfg) = small();
    let (params, _) = train(&split(5, SplitRole::Train), None, &tcfg, &mcfg).unwrap();
    let test = split(6, SplitRole::Test);
    let before = params.frozen_hash();
    let adapted = adapt(&params, test.observable(), &tcfg).unwrap();
    assert_eq!(params.frozen_hash(), before);
    let tuned = adapted.apply_to(&params).unwrap();
    assert_eq!(tuned.frozen_hash(), before);
    assert_eq!(adapted.losses.len(), tcfg.adapt_epochs);
    let alpha = adapted.attention.alpha();
    for r in 0..alpha.rows() {
        assert!((alpha.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn checkpoint_round_trip_preserves_scores() {
    let (mcfg, tcfg) = small();
    let tr = split(7, SplitRole::Train);
    let (params, _) = train(&tr, None, &tcfg, &mcfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint_save(&params, &path).unwrap();
    let loaded = checkpoint_load(&path).unwrap();
    assert_eq!(loaded, params);
    assert_eq!(checkpoint_bytes(&loaded), checkpoint_bytes(&params));
    let triplets = tr.missing().triplets();
    let a = ModelScorer::new(&params, tr.observable()).unwrap().score(triplets).unwrap();
    let b = ModelScorer::new(&loaded, tr.observable()).unwrap().score(triplets).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
