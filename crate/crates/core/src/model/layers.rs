//! Soft MTDE layers on the tape, and an independent plain-tensor hard layer.
//!
//! Stacked layout: relation states live in one `[R*N, d]` matrix, block `r`
//! holding rows `r*N .. (r+1)*N`.

use std::sync::Arc;

use super::config::{Aggregation, LayerKind};
use super::params::{top_tasks, Mlp, MtdeParams};
use super::view::GraphView;
use crate::error::{Error, Result};
use crate::graph::TaskPartition;
use crate::numeric::{Tape, Tensor, Var};

/// Floor of the soft mean normalizer.
pub const NORMALIZER_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct BoundMlp {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl BoundMlp {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Var {
        let mut h = x;
        for (i, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if i > 0 {
                h = tape.relu(h);
            }
            h = tape.linear(h, w, b);
        }
        h
    }
}

#[derive(Clone, Debug)]
pub struct BoundLayer {
    pub kind: LayerKind,
    pub l1: BoundMlp,
    pub l2: BoundMlp,
    pub l3: BoundMlp,
    pub pos: Var,
}

/// `MLP(x + aggregate(x))` over each relation's neighborhoods (GIN with
/// `eps = 0`), or just `MLP(x)` for row-wise layers.
fn block(tape: &mut Tape, kind: LayerKind, mlp: &BoundMlp, x: Var, view: &GraphView) -> Var {
    match kind {
        LayerKind::Gin => {
            let agg = tape.sparse_apply(view.operator(), x);
            let z = tape.add(x, agg);
            mlp.apply(tape, z)
        }
        LayerKind::Mlp => mlp.apply(tape, x),
    }
}

/// Per-forward constants shared by all layers.
pub(crate) struct LayerContext {
    pub top: Vec<usize>,
    top_rows: Arc<[usize]>,
    off_diagonal: Var,
    /// Column `[R*N, 1]` per task: 1 where the row's relation is not
    /// assigned to that task.
    foreign_masks: Vec<Option<Var>>,
}

impl LayerContext {
    pub fn new(tape: &mut Tape, alpha: &Tensor, view: &GraphView) -> Self {
        let (r, k) = alpha.dims2();
        let n = view.num_nodes();
        let top = top_tasks(alpha);
        let top_rows: Arc<[usize]> = (0..r * n).map(|i| top[i / n]).collect();
        let mut off = vec![1.0; r * r];
        for i in 0..r {
            off[i * r + i] = 0.0;
        }
        let off_diagonal = tape.constant(Tensor::matrix(r, r, off));
        let foreign_masks = (0..k)
            .map(|task| {
                if top.iter().all(|&t| t == task) {
                    return None;
                }
                let m = top_rows.iter().map(|&t| if t == task { 0.0 } else { 1.0 }).collect();
                Some(tape.constant(Tensor::matrix(r * n, 1, m)))
            })
            .collect();
        LayerContext {
            top,
            top_rows,
            off_diagonal,
            foreign_masks,
        }
    }
}

/// Row-normalized `[R, R]` mixing matrix whose row `r` weights relation
/// `r' != r` by `alpha[r', tasks[r]]`.
fn mixing(tape: &mut Tape, alpha_t: Var, tasks: &[usize], ctx: &LayerContext) -> Var {
    let g = tape.gather_rows(alpha_t, tasks.to_vec());
    let m = tape.mul(g, ctx.off_diagonal);
    let s = tape.sum_rows(m);
    let s = tape.clamp_min(s, NORMALIZER_FLOOR);
    tape.div_col(m, s)
}

fn mix(tape: &mut Tape, w: Var, h: Var, view: &GraphView, d: usize) -> Var {
    let (r, n) = (view.num_relations(), view.num_nodes());
    let flat = tape.reshape(h, vec![r, n * d]);
    let y = tape.matmul(w, flat);
    tape.reshape(y, vec![r * n, d])
}

/// One soft MTDE layer over stacked states `h` (`[R*N, d]`).
pub(crate) fn soft_layer(
    tape: &mut Tape,
    layer: &BoundLayer,
    h: Var,
    alpha_t: Var,
    ctx: &LayerContext,
    view: &GraphView,
) -> Var {
    let d = tape.shape(h)[1];
    let r = view.num_relations();
    let own = block(tape, layer.kind, &layer.l1, h, view);

    let w2 = mixing(tape, alpha_t, &ctx.top, ctx);
    let same = mix(tape, w2, h, view, d);
    let p = tape.gather_rows(layer.pos, Arc::clone(&ctx.top_rows));
    let x2 = tape.add(same, p);
    let o2 = block(tape, layer.kind, &layer.l2, x2, view);
    let mut out = tape.add(own, o2);

    for (task, mask) in ctx.foreign_masks.iter().enumerate() {
        let Some(mask) = *mask else { continue };
        let wk = mixing(tape, alpha_t, &vec![task; r], ctx);
        let xk = mix(tape, wk, h, view, d);
        let pk = tape.gather_rows(layer.pos, vec![task]);
        let xk = tape.add_row(xk, pk);
        let yk = block(tape, layer.kind, &layer.l3, xk, view);
        let yk = tape.mul_col(yk, mask);
        out = tape.add(out, yk);
    }
    out
}

/// Hard MTDE layer with a fixed task partition, on per-relation `[N, d]`
/// states. Written directly from the per-relation definition (explicit
/// loops, no stacking) so it can serve as a reference for the soft layer.
pub fn mtde_layer_hard(
    states: &[Tensor],
    tasks: &TaskPartition,
    layer: &MtdeParams,
    view: &GraphView,
) -> Result<Vec<Tensor>> {
    let r_count = states.len();
    if r_count != view.num_relations() || tasks.num_relations() != r_count {
        return Err(Error::contract("states, tasks and view disagree on relation count"));
    }
    if layer.pos.rows() < tasks.num_tasks() {
        return Err(Error::contract("fewer task embeddings than tasks"));
    }
    let n = view.num_nodes();
    let d = layer.pos.cols();
    if states.iter().any(|s| s.shape() != [n, d]) {
        return Err(Error::contract("relation state shape mismatch"));
    }

    let mean_of = |members: &[usize]| -> Tensor {
        let mut acc = Tensor::zeros(vec![n, d]);
        if members.is_empty() {
            return acc;
        }
        for &m in members {
            acc.add_assign(&states[m]);
        }
        acc.scale(1.0 / members.len() as f64)
    };
    let plus_pos = |x: &Tensor, k: usize| -> Tensor {
        let mut x = x.clone();
        x.add_row_assign(&Tensor::matrix(1, d, layer.pos.row(k).to_vec()));
        x
    };

    let mut out = Vec::with_capacity(r_count);
    for r in 0..r_count {
        let task = tasks.task_of(r);
        let mut o = apply_block(layer.kind, &layer.l1, &states[r], view, r);
        let peers: Vec<usize> = tasks.members(task).filter(|&m| m != r).collect();
        o.add_assign(&apply_block(layer.kind, &layer.l2, &plus_pos(&mean_of(&peers), task), view, r));
        for k in 0..tasks.num_tasks() {
            if k == task {
                continue;
            }
            let members: Vec<usize> = tasks.members(k).collect();
            let x = plus_pos(&mean_of(&members), k);
            o.add_assign(&apply_block(layer.kind, &layer.l3, &x, view, r));
        }
        out.push(o);
    }
    Ok(out)
}

fn apply_block(kind: LayerKind, mlp: &Mlp, x: &Tensor, view: &GraphView, rel: usize) -> Tensor {
    match kind {
        LayerKind::Mlp => mlp.apply(x),
        LayerKind::Gin => {
            let (n, d) = x.dims2();
            let mut z = x.clone();
            for v in 0..n {
                let nb = view.neighbors(rel, v);
                if nb.is_empty() {
                    continue;
                }
                let w = match view.aggregation() {
                    Aggregation::Mean => 1.0 / nb.len() as f64,
                    Aggregation::Sum => 1.0,
                };
                for j in 0..d {
                    let s: f64 = nb.iter().map(|&u| x.get2(u, j)).sum();
                    z.data_mut()[v * d + j] += w * s;
                }
            }
            mlp.apply(&z)
        }
    }
}
