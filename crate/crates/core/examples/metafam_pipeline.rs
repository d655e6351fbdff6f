//! Generates MetaFam, trains, adapts on the test graph and prints the
//! dual-scheme metrics. Usage: `metafam_pipeline [seed] [max_tasks] [homogeneous]`.

use std::time::Instant;

use mtdea_core::data::{metafam_generate, MetaFamConfig};
use mtdea_core::eval::{evaluate, RankingScheme};
use mtdea_core::model::{ModelConfig, ModelScorer};
use mtdea_core::train::{adapt, train_with_progress, TrainConfig};

fn main() -> mtdea_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).map_or(0, |s| s.parse().unwrap());
    let max_tasks = args.get(2).map_or(2, |s| s.parse().unwrap());
    let homogeneous = args.get(3).is_some_and(|s| s == "1");
    let num_gnn_layers = args.get(4).map_or(1, |s| s.parse().unwrap());
    let aggregation = args.get(5).map_or(Ok(mtdea_core::model::Aggregation::Mean), |s| s.parse())?;
    let data = metafam_generate(&MetaFamConfig { seed, ..MetaFamConfig::default() })?;
    println!(
        "train {} obs / {} miss, test {} obs / {} miss, N={}",
        data.train.observable().len(),
        data.train.missing().len(),
        data.test.observable().len(),
        data.test.missing().len(),
        data.train.num_nodes()
    );
    let mcfg = ModelConfig { max_tasks, homogeneous, num_gnn_layers, aggregation, ..ModelConfig::default() };
    let env = |k: &str, d: f64| std::env::var(k).ok().map_or(d, |v| v.parse().unwrap());
    let tcfg = TrainConfig {
        seed,
        max_epochs: env("EPOCHS", 10.0) as usize,
        patience: env("PATIENCE", 5.0) as usize,
        lr: env("LR", 1e-3),
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let (params, hist) = train_with_progress(&data.train, Some(&data.valid), &tcfg, &mcfg, &mut |e| {
        println!("epoch {} loss {:.4} val_mrr {:.4} ({:.1}s)", e.epoch, e.loss, e.val_mrr, e.seconds)
    })?;
    println!("trained in {:.1}s, best epoch {:?}", t0.elapsed().as_secs_f64(), hist.best_epoch);
    let adapted = adapt(&params, data.test.observable(), &tcfg)?;
    println!("adapt losses {:?}", adapted.losses);
    let p = adapted.apply_to(&params)?;
    let scorer = ModelScorer::new(&p, data.test.observable())?;
    for s in [RankingScheme::DUAL, RankingScheme::ENTITY, RankingScheme::RELATION] {
        let m = evaluate(&scorer, data.test.observable(), data.test.missing(), s, seed)?;
        print!("{}", m.table(s.name()));
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
