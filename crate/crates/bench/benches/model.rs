use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use mtdea_core::config::RunConfig;
use mtdea_core::data::{metafam_generate, sample_negatives, MetaFam, MetaFamConfig};
use mtdea_core::eval::{rank_all, RankingScheme};
use mtdea_core::graph::Multigraph;
use mtdea_core::model::{forward, BoundParams, GraphView, ModelParams, ModelScorer, Trainable};
use mtdea_core::numeric::Tape;
use mtdea_core::rng::substream;
use mtdea_core::train::batch_loss;

fn setup() -> (MetaFam, ModelParams) {
    let data = metafam_generate(&MetaFamConfig::default()).unwrap();
    let cfg = RunConfig::metafam();
    let params = ModelParams::init(cfg.model, data.train.num_relations(), &mut substream(0, "bench")).unwrap();
    (data, params)
}

fn bench_forward(c: &mut Criterion) {
    let (data, params) = setup();
    let view = GraphView::for_model(data.train.observable(), false, params.config().aggregation);
    c.bench_function("forward/metafam_train", |b| b.iter(|| forward(black_box(&params), &view).unwrap()));
}

fn bench_step(c: &mut Criterion) {
    let (data, params) = setup();
    let graph = data.train.observable();
    let view = GraphView::for_model(graph, false, params.config().aggregation);
    let batch: Vec<_> = data.train.missing().triplets().iter().copied().take(256).collect();
    let negs = sample_negatives(graph, &batch, 2, 2, &mut substream(0, "bench.negs")).unwrap();
    c.bench_function("loss_and_backward/256_positives", |b| {
        b.iter_batched(
            Tape::new,
            |mut tape| {
                let bound = BoundParams::bind(&mut tape, &params, Trainable::All);
                let loss = batch_loss(&mut tape, &bound, &view, &negs, (0.1, 0.1)).unwrap();
                tape.backward(loss)
            },
            BatchSize::LargeInput,
        )
    });
}

fn bench_ranking(c: &mut Criterion) {
    let (data, params) = setup();
    let test = &data.test;
    let scorer = ModelScorer::new(&params, test.observable()).unwrap();
    let few: Vec<_> = test.missing().triplets().iter().copied().take(128).collect();
    let missing = Multigraph::new(test.num_nodes(), test.num_relations(), few).unwrap();
    c.bench_function("rank_all/dual_128_positives", |b| {
        b.iter(|| rank_all(&scorer, test.observable(), &missing, RankingScheme::DUAL, 0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_forward, bench_step, bench_ranking
}
criterion_main!(benches);
