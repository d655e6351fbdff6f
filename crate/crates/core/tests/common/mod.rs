//! Helpers shared by the layer tests and the acceptance run.
#![allow(dead_code)]

use mtdea_core::graph::{Multigraph, TaskPartition};
use mtdea_core::model::{
    mtde_layer_hard, mtde_layer_soft, Aggregation, AttentionWeights, GraphView, LayerKind, Mlp, MtdeParams,
};
use mtdea_core::numeric::Tensor;
use mtdea_core::rng::substream;
use mtdea_core::verify::random_multigraph;
use rand::Rng;

/// Large enough that softmax underflows to an exact one-hot row.
pub const HARD_SCALE: f64 = 1000.0;

pub fn random_layer(kind: LayerKind, d: usize, k: usize, rng: &mut impl Rng) -> MtdeParams {
    MtdeParams {
        kind,
        l1: Mlp::init(&[d, d, d], rng),
        l2: Mlp::init(&[d, d, d], rng),
        l3: Mlp::init(&[d, d, d], rng),
        pos: Tensor::matrix(k, d, (0..k * d).map(|_| rng.gen_range(-1.0..1.0)).collect()),
    }
}

pub fn random_states(r: usize, n: usize, d: usize, rng: &mut impl Rng) -> Vec<Tensor> {
    (0..r)
        .map(|_| Tensor::matrix(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect()))
        .collect()
}

pub fn max_diff(a: &[Tensor], b: &[Tensor]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

/// `x + mean_{u in N(v)} x_u` per node of relation `rel`, written out by hand.
fn gin_input(x: &Tensor, view: &GraphView, rel: usize) -> Tensor {
    let (n, d) = x.dims2();
    let mut out = x.clone();
    for v in 0..n {
        let nb = view.neighbors(rel, v);
        for j in 0..d {
            let s: f64 = nb.iter().map(|&u| x.get2(u, j)).sum();
            if !nb.is_empty() {
                out.data_mut()[v * d + j] += s / nb.len() as f64;
            }
        }
    }
    out
}

/// Single-task layer: `L1(H_r) + L2(p + mean_{r' != r} H_r')`.
pub fn single_task_layer(states: &[Tensor], layer: &MtdeParams, view: &GraphView) -> Vec<Tensor> {
    let r = states.len();
    let (n, d) = states[0].dims2();
    (0..r)
        .map(|rel| {
            let mut others = Tensor::zeros(vec![n, d]);
            for (i, s) in states.iter().enumerate() {
                if i != rel {
                    others.add_assign(s);
                }
            }
            let mut x = others.scale(1.0 / (r - 1) as f64);
            x.add_row_assign(&Tensor::matrix(1, d, layer.pos.row(0).to_vec()));
            let mut out = layer.l1.apply(&gin_input(&states[rel], view, rel));
            out.add_assign(&layer.l2.apply(&gin_input(&x, view, rel)));
            out
        })
        .collect()
}

pub fn case_graph(seed: u64, n: usize, r: usize) -> Multigraph {
    random_multigraph(n, r, 0.4, &mut substream(seed, "layers.graph")).unwrap()
}

/// Largest gap between the soft layer at a one-hot attention and the hard
/// layer with the same partition, for `k <= r` tasks.
pub fn hard_soft_gap(seed: u64, n: usize, r: usize, k: usize, gin: bool) -> f64 {
    let mut rng = substream(seed, "layers.hard");
    let k = k.min(r);
    // Every task keeps at least one relation.
    let mut assignment: Vec<usize> = (0..r).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    assignment.rotate_left(rng.gen_range(0..r));
    let tasks = TaskPartition::new(assignment.clone(), k).unwrap();
    let kind = if gin { LayerKind::Gin } else { LayerKind::Mlp };
    let layer = random_layer(kind, 4, k, &mut rng);
    let states = random_states(r, n, 4, &mut rng);
    let view = GraphView::new(&case_graph(seed, n, r), Aggregation::Mean);
    let attention = AttentionWeights::from_assignment(&assignment, k, HARD_SCALE);
    let soft = mtde_layer_soft(&states, &attention, &layer, &view).unwrap();
    let hard = mtde_layer_hard(&states, &tasks, &layer, &view).unwrap();
    max_diff(&soft, &hard)
}

/// Largest gap between the one-task soft layer and its direct form.
pub fn single_task_gap(seed: u64, n: usize, r: usize) -> f64 {
    let mut rng = substream(seed, "layers.single");
    let layer = random_layer(LayerKind::Gin, 5, 1, &mut rng);
    let states = random_states(r, n, 5, &mut rng);
    let view = GraphView::new(&case_graph(seed, n, r), Aggregation::Mean);
    let attention = AttentionWeights::random(r, 1, &mut rng);
    let soft = mtde_layer_soft(&states, &attention, &layer, &view).unwrap();
    max_diff(&soft, &single_task_layer(&states, &layer, &view))
}
