use super::layers::{soft_layer, BoundLayer, BoundMlp, LayerContext};
use super::params::{AttentionWeights, Mlp, ModelParams, MtdeParams};
use super::view::GraphView;
use crate::error::{Error, Result};
use crate::graph::{Multigraph, Triplet};
use crate::numeric::{Tape, Tensor, Var};

/// Which parameters become differentiable leaves when bound to a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainable {
    All,
    /// Everything except the attention logits.
    Body,
    AttentionOnly,
    Nothing,
}

/// Model parameters bound to a tape, plus the leaves in canonical order
/// (empty for `Trainable::Nothing`).
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub layers: Vec<BoundLayer>,
    pub scorer: BoundMlp,
    pub logits: Var,
    pub leaves: Vec<Var>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ModelParams, trainable: Trainable) -> Self {
        let tensors = params.tensors();
        let last = tensors.len() - 1;
        let mut leaves = Vec::new();
        let vars: Vec<Var> = tensors
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let grad = match trainable {
                    Trainable::All => true,
                    Trainable::Body => i != last,
                    Trainable::AttentionOnly => i == last,
                    Trainable::Nothing => false,
                };
                if grad {
                    let v = tape.leaf(t.clone());
                    leaves.push(v);
                    v
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        Self::from_vars(params, &vars, leaves).expect("one var per tensor")
    }

    /// Assembles bound parameters from tape variables given in the canonical
    /// order of `ModelParams::tensors`; `params` supplies only the structure.
    pub fn from_vars(params: &ModelParams, vars: &[Var], leaves: Vec<Var>) -> Result<Self> {
        if vars.len() != params.tensors().len() {
            return Err(Error::contract(format!(
                "expected {} variables, got {}",
                params.tensors().len(),
                vars.len()
            )));
        }
        let mut cursor = vars.iter().copied();
        let take_mlp = |cursor: &mut dyn Iterator<Item = Var>, m: &Mlp| {
            let mut b = BoundMlp {
                weights: Vec::new(),
                biases: Vec::new(),
            };
            for _ in 0..m.weights.len() {
                b.weights.push(cursor.next().expect("length checked"));
                b.biases.push(cursor.next().expect("length checked"));
            }
            b
        };
        let mut layers = Vec::with_capacity(params.layers.len());
        for l in &params.layers {
            layers.push(BoundLayer {
                kind: l.kind,
                l1: take_mlp(&mut cursor, &l.l1),
                l2: take_mlp(&mut cursor, &l.l2),
                l3: take_mlp(&mut cursor, &l.l3),
                pos: cursor.next().expect("length checked"),
            });
        }
        let scorer = take_mlp(&mut cursor, &params.scorer);
        let logits = cursor.next().expect("length checked");
        Ok(BoundParams {
            layers,
            scorer,
            logits,
            leaves,
        })
    }
}

/// Final stacked relation states `[R*N, d]` of the network on `view`.
pub fn forward_tape(tape: &mut Tape, bound: &BoundParams, view: &GraphView) -> Result<Var> {
    let rows = tape.shape(bound.logits)[0];
    if rows != view.num_relations() {
        return Err(Error::contract(format!(
            "attention has {rows} rows but the graph view has {} relations",
            view.num_relations()
        )));
    }
    let d = tape.shape(bound.layers[0].pos)[1];
    let alpha = tape.softmax_rows(bound.logits);
    let alpha_t = tape.transpose(alpha);
    let alpha_value = tape.value(alpha).clone();
    let ctx = LayerContext::new(tape, &alpha_value, view);
    let mut h = tape.constant(Tensor::ones(vec![view.num_relations() * view.num_nodes(), d]));
    for (i, layer) in bound.layers.iter().enumerate() {
        if i > 0 {
            h = tape.relu(h);
        }
        h = soft_layer(tape, layer, h, alpha_t, &ctx, view);
    }
    Ok(h)
}

/// Scores `sigmoid(MLP(h[u] ++ h[v]))` as a `[B, 1]` column, using the
/// states of each triplet's relation (block 0 in a merged view).
pub fn score_tape(
    tape: &mut Tape,
    bound: &BoundParams,
    view: &GraphView,
    states: Var,
    triplets: &[Triplet],
) -> Result<Var> {
    if triplets.is_empty() {
        return Err(Error::contract("no triplets to score"));
    }
    for t in triplets {
        view.check_triplet(t, None)?;
    }
    let heads: Vec<usize> = triplets.iter().map(|t| view.state_row(t.rel, t.head)).collect();
    let tails: Vec<usize> = triplets.iter().map(|t| view.state_row(t.rel, t.tail)).collect();
    let hu = tape.gather_rows(states, heads);
    let hv = tape.gather_rows(states, tails);
    let x = tape.concat(&[hu, hv], 1);
    let logit = bound.scorer.apply(tape, x);
    Ok(tape.sigmoid(logit))
}

/// Stacked per-relation node states produced by `forward`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationStates {
    num_nodes: usize,
    num_relations: usize,
    data: Tensor,
}

impl RelationStates {
    pub fn from_stacked(num_nodes: usize, num_relations: usize, data: Tensor) -> Result<Self> {
        if data.rows() != num_nodes * num_relations {
            return Err(Error::contract("stacked state row count mismatch"));
        }
        Ok(RelationStates {
            num_nodes,
            num_relations,
            data,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn stacked(&self) -> &Tensor {
        &self.data
    }

    /// `H_r` as an `[N, d]` matrix.
    pub fn relation(&self, r: usize) -> Tensor {
        let d = self.data.cols();
        let n = self.num_nodes;
        Tensor::matrix(n, d, self.data.data()[r * n * d..(r + 1) * n * d].to_vec())
    }

    pub fn row(&self, r: usize, node: usize) -> &[f64] {
        self.data.row(r * self.num_nodes + node)
    }
}

/// Evaluation-mode forward pass (no gradients).
pub fn forward(params: &ModelParams, view: &GraphView) -> Result<RelationStates> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params, Trainable::Nothing);
    let h = forward_tape(&mut tape, &bound, view)?;
    RelationStates::from_stacked(view.num_nodes(), view.num_relations(), tape.value(h).clone())
}

/// Scores triplets against precomputed states with the same kernels as the
/// training path, so values match it bit for bit.
pub fn score_triplets(
    params: &ModelParams,
    view: &GraphView,
    states: &RelationStates,
    triplets: &[Triplet],
) -> Result<Vec<f64>> {
    if triplets.is_empty() {
        return Ok(Vec::new());
    }
    for t in triplets {
        view.check_triplet(t, None)?;
    }
    let heads: Vec<usize> = triplets.iter().map(|t| view.state_row(t.rel, t.head)).collect();
    let tails: Vec<usize> = triplets.iter().map(|t| view.state_row(t.rel, t.tail)).collect();
    let x = Tensor::concat(
        &[&states.stacked().gather_rows(&heads), &states.stacked().gather_rows(&tails)],
        1,
    );
    Ok(params.scorer.apply(&x).sigmoid().into_data())
}

/// Evaluation-mode soft layer on per-relation states, mainly for checking
/// it against `mtde_layer_hard`.
pub fn mtde_layer_soft(
    states: &[Tensor],
    attention: &AttentionWeights,
    layer: &MtdeParams,
    view: &GraphView,
) -> Result<Vec<Tensor>> {
    let r = states.len();
    if r != view.num_relations() || attention.num_relations() != r {
        return Err(Error::contract("states, attention and view disagree on relation count"));
    }
    let n = view.num_nodes();
    let refs: Vec<&Tensor> = states.iter().collect();
    let stacked = Tensor::concat(&refs, 0);
    let mut tape = Tape::new();
    let h = tape.constant(stacked);
    let mut bind_mlp = |m: &Mlp| BoundMlp {
        weights: m.weights.iter().map(|w| tape.constant(w.clone())).collect(),
        biases: m.biases.iter().map(|b| tape.constant(b.clone())).collect(),
    };
    let (l1, l2, l3) = (bind_mlp(&layer.l1), bind_mlp(&layer.l2), bind_mlp(&layer.l3));
    let bound = BoundLayer {
        kind: layer.kind,
        l1,
        l2,
        l3,
        pos: tape.constant(layer.pos.clone()),
    };
    let alpha = attention.alpha();
    let alpha_t = tape.constant(alpha.transpose());
    let ctx = LayerContext::new(&mut tape, &alpha, view);
    let out = soft_layer(&mut tape, &bound, h, alpha_t, &ctx, view);
    let states = RelationStates::from_stacked(n, r, tape.value(out).clone())?;
    Ok((0..r).map(|i| states.relation(i)).collect())
}

/// A trained model paired with the graph it reasons over: computes states
/// once, then scores any batch of triplets.
#[derive(Clone, Debug)]
pub struct ModelScorer<'a> {
    params: &'a ModelParams,
    view: GraphView,
    states: RelationStates,
    num_relations: usize,
}

impl<'a> ModelScorer<'a> {
    pub fn new(params: &'a ModelParams, graph: &Multigraph) -> Result<Self> {
        let cfg = params.config();
        let view = GraphView::for_model(graph, cfg.homogeneous, cfg.aggregation);
        let states = forward(params, &view)?;
        Ok(ModelScorer {
            params,
            view,
            states,
            num_relations: graph.num_relations(),
        })
    }

    pub fn states(&self) -> &RelationStates {
        &self.states
    }

    pub fn score(&self, triplets: &[Triplet]) -> Result<Vec<f64>> {
        for t in triplets {
            self.view.check_triplet(t, Some(self.num_relations))?;
        }
        score_triplets(self.params, &self.view, &self.states, triplets)
    }
}
