//! Trains the body of a model with attention pinned to the planted kinds of
//! a two-task synthetic graph, adapts on a fresh graph and reports how many
//! test relations land on their kind's task index.

use mtdea_core::data::{two_task_graph, SplitRole, TwoTaskConfig};
use mtdea_core::model::{AttentionWeights, ModelConfig, ModelParams, Trainable};
use mtdea_core::rng::substream;
use mtdea_core::train::{adapt, train_from, TrainConfig};

fn main() -> mtdea_core::Result<()> {
    let env = |k: &str, d: f64| std::env::var(k).ok().map_or(d, |v| v.parse().unwrap());
    let mut total = 0;
    for seed in 0..env("SEEDS", 3.0) as u64 {
        let tr = two_task_graph(&TwoTaskConfig { seed, ..TwoTaskConfig::default() }, SplitRole::Train)?;
        let te = two_task_graph(&TwoTaskConfig { seed: seed + 200, ..TwoTaskConfig::default() }, SplitRole::Test)?;
        let mcfg = ModelConfig { num_gnn_layers: env("GNN", 1.0) as usize, ..ModelConfig::default() };
        let tcfg = TrainConfig {
            seed,
            lr: env("LR", 1e-2),
            batch_positives: env("BATCH", 64.0) as usize,
            max_epochs: env("EPOCHS", 10.0) as usize,
            patience: env("EPOCHS", 10.0) as usize,
            ..TrainConfig::default()
        };
        let mut params = ModelParams::init(mcfg, tr.kinds.len(), &mut substream(seed, "oracle.init"))?;
        params.set_attention(AttentionWeights::from_assignment(&tr.kinds, 2, env("SCALE", 10.0)))?;
        let (params, hist) = train_from(params, Trainable::Body, &tr.split, None, &tcfg, &mut |_| {})?;
        let probe = |kinds: &[usize]| -> mtdea_core::Result<f64> {
            use mtdea_core::data::{sample_negatives, self_supervised_split};
            use mtdea_core::model::{BoundParams, GraphView};
            use mtdea_core::numeric::Tape;
            let mut p = params.clone();
            p.set_attention(AttentionWeights::from_assignment(kinds, 2, env("SCALE", 10.0)))?;
            let mut rng = substream(seed, "probe");
            let mut total = 0.0;
            for _ in 0..5 {
                let (ctx, tgt) = self_supervised_split(te.split.observable(), 0.1, &mut rng)?;
                let view = GraphView::for_model(&ctx, false, mcfg.aggregation);
                let negs = sample_negatives(&ctx, tgt.triplets(), 2, 2, &mut rng)?;
                let mut tape = Tape::new();
                let b = BoundParams::bind(&mut tape, &p, Trainable::Nothing);
                let l = mtdea_core::train::batch_loss(&mut tape, &b, &view, &negs, (0.0, 0.0))?;
                total += tape.value(l).item() / tgt.len() as f64;
            }
            Ok(total / 5.0)
        };
        let swapped: Vec<usize> = te.kinds.iter().map(|k| 1 - k).collect();
        let uniform_one: Vec<usize> = vec![0; te.kinds.len()];
        let uniform_two: Vec<usize> = vec![1; te.kinds.len()];
        println!(
            "  probe correct {:.4} swapped {:.4} all0 {:.4} all1 {:.4}",
            probe(&te.kinds)?, probe(&swapped)?, probe(&uniform_one)?, probe(&uniform_two)?
        );
        let acfg = TrainConfig { lr: env("ALR", 1e-3), ..tcfg };
        let adapted = adapt(&params, te.split.observable(), &acfg)?;
        let got = adapted.attention.top_tasks();
        let hits = te.kinds.iter().zip(&got).filter(|(a, b)| a == b).count();
        total += hits;
        println!(
            "seed {seed}: loss {:.3} | test kinds {:?} got {:?} -> {hits}/{} adapt losses {:.3}..{:.3}",
            hist.epochs.last().unwrap().loss, te.kinds, got, got.len(), adapted.losses[0], adapted.losses.last().unwrap()
        );
    }
    println!("total {total}");
    Ok(())
}
