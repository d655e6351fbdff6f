use rand::Rng;

use super::config::{LayerKind, ModelConfig};
use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Scale of the uniform initialization of fresh attention logits. Small, so
/// the first gradient steps rather than the draw decide task membership.
pub const LOGIT_INIT_SCALE: f64 = 1e-2;

/// Fully connected stack: `linear (relu linear)*`. Weights are `[in, out]`,
/// biases `[1, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` for weights and biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            let bound = 1.0 / (i as f64).sqrt();
            let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(Tensor::matrix(i, o, draw(i * o)));
            biases.push(Tensor::matrix(1, o, draw(o)));
        }
        Mlp { weights, biases }
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass on plain tensors.
    pub fn apply(&self, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if i > 0 {
                h = h.relu();
            }
            h = h.linear(w, b);
        }
        h
    }
}

/// One soft MTDE layer: the three blocks plus the task embeddings `p_k`
/// (one row per task).
#[derive(Clone, Debug, PartialEq)]
pub struct MtdeParams {
    pub kind: LayerKind,
    pub l1: Mlp,
    pub l2: Mlp,
    pub l3: Mlp,
    pub pos: Tensor,
}

/// Relation-to-task logits `w` (`R x K̂`); membership is `softmax` per row.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    logits: Tensor,
}

impl AttentionWeights {
    pub fn new(logits: Tensor) -> Result<Self> {
        if logits.shape().len() != 2 || !logits.all_finite() {
            return Err(Error::contract("attention logits must be a finite matrix"));
        }
        Ok(AttentionWeights { logits })
    }

    pub fn random<R: Rng + ?Sized>(relations: usize, tasks: usize, rng: &mut R) -> Self {
        let data = (0..relations * tasks)
            .map(|_| rng.gen_range(-LOGIT_INIT_SCALE..LOGIT_INIT_SCALE))
            .collect();
        AttentionWeights {
            logits: Tensor::matrix(relations, tasks, data),
        }
    }

    /// A one-hot-like matrix: row `r` puts `scale` on `tasks[r]`, 0 elsewhere.
    pub fn from_assignment(assignment: &[usize], tasks: usize, scale: f64) -> Self {
        let mut data = vec![0.0; assignment.len() * tasks];
        for (r, &k) in assignment.iter().enumerate() {
            data[r * tasks + k] = scale;
        }
        AttentionWeights {
            logits: Tensor::matrix(assignment.len(), tasks, data),
        }
    }

    pub fn num_relations(&self) -> usize {
        self.logits.rows()
    }

    pub fn num_tasks(&self) -> usize {
        self.logits.cols()
    }

    pub fn logits(&self) -> &Tensor {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut Tensor {
        &mut self.logits
    }

    pub fn alpha(&self) -> Tensor {
        self.logits.softmax_rows()
    }

    /// `argmax_k alpha[r, k]` per row, ties to the smallest `k`.
    pub fn top_tasks(&self) -> Vec<usize> {
        top_tasks(&self.alpha())
    }
}

pub(crate) fn top_tasks(alpha: &Tensor) -> Vec<usize> {
    (0..alpha.rows())
        .map(|r| {
            let row = alpha.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// All learnable state. Parameters are visited in one canonical order
/// (layers, then scorer, then attention logits) by `tensors`, `tensors_mut`
/// and `names`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    pub layers: Vec<MtdeParams>,
    pub scorer: Mlp,
    pub attention: AttentionWeights,
}

impl ModelParams {
    /// Fresh parameters for a graph with `num_relations` relations. A
    /// homogeneous model keeps a single attention row.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, num_relations: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let d = config.hidden_dim;
        let k = config.max_tasks;
        let block = [d, d, d];
        let layers = config
            .layer_kinds()
            .map(|kind| MtdeParams {
                kind,
                l1: Mlp::init(&block, rng),
                l2: Mlp::init(&block, rng),
                l3: Mlp::init(&block, rng),
                pos: Tensor::matrix(k, d, (0..k * d).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            })
            .collect();
        let scorer = Mlp::init(&[2 * d, d, 1], rng);
        let rows = if config.homogeneous { 1 } else { num_relations };
        let attention = AttentionWeights::random(rows, k, rng);
        Ok(ModelParams {
            config,
            layers,
            scorer,
            attention,
        })
    }

    /// Reassembles parameters from tensors in canonical order; shapes are
    /// checked against `config`.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let mut it = tensors.into_iter();
        let mut next = |what: &str| it.next().ok_or_else(|| Error::Checkpoint(format!("missing {what}")));
        let mlp = |depth: usize, next: &mut dyn FnMut(&str) -> Result<Tensor>| -> Result<Mlp> {
            let mut m = Mlp {
                weights: Vec::new(),
                biases: Vec::new(),
            };
            for _ in 0..depth {
                m.weights.push(next("weight")?);
                m.biases.push(next("bias")?);
            }
            Ok(m)
        };
        let mut layers = Vec::new();
        for kind in config.layer_kinds() {
            let l1 = mlp(2, &mut next)?;
            let l2 = mlp(2, &mut next)?;
            let l3 = mlp(2, &mut next)?;
            let pos = next("pos")?;
            layers.push(MtdeParams {
                kind,
                l1,
                l2,
                l3,
                pos,
            });
        }
        let scorer = mlp(2, &mut next)?;
        let attention = AttentionWeights::new(next("attention")?)?;
        if next("end").is_ok() {
            return Err(Error::Checkpoint("trailing tensors".into()));
        }
        let params = ModelParams {
            config,
            layers,
            scorer,
            attention,
        };
        params.check_shapes()?;
        Ok(params)
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.config.hidden_dim;
        let k = self.config.max_tasks;
        let mlp_ok = |m: &Mlp, dims: &[usize]| {
            m.depth() == dims.len() - 1
                && m.weights.iter().zip(&m.biases).zip(dims.windows(2)).all(|((w, b), io)| {
                    w.shape() == [io[0], io[1]] && b.shape() == [1, io[1]]
                })
        };
        for l in &self.layers {
            if ![&l.l1, &l.l2, &l.l3].iter().all(|m| mlp_ok(m, &[d, d, d])) || l.pos.shape() != [k, d] {
                return Err(Error::Checkpoint("layer shapes disagree with config".into()));
            }
        }
        if !mlp_ok(&self.scorer, &[2 * d, d, 1]) || self.attention.num_tasks() != k {
            return Err(Error::Checkpoint("scorer or attention shapes disagree with config".into()));
        }
        if self.config.homogeneous && self.attention.num_relations() != 1 {
            return Err(Error::Checkpoint("homogeneous model needs one attention row".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            for m in [&l.l1, &l.l2, &l.l3] {
                for (w, b) in m.weights.iter().zip(&m.biases) {
                    out.push(w);
                    out.push(b);
                }
            }
            out.push(&l.pos);
        }
        for (w, b) in self.scorer.weights.iter().zip(&self.scorer.biases) {
            out.push(w);
            out.push(b);
        }
        out.push(self.attention.logits());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            for m in [&mut l.l1, &mut l.l2, &mut l.l3] {
                for (w, b) in m.weights.iter_mut().zip(m.biases.iter_mut()) {
                    out.push(w);
                    out.push(b);
                }
            }
            out.push(&mut l.pos);
        }
        for (w, b) in self.scorer.weights.iter_mut().zip(self.scorer.biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(self.attention.logits_mut());
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (bn, m) in [("l1", &l.l1), ("l2", &l.l2), ("l3", &l.l3)] {
                for j in 0..m.depth() {
                    out.push(format!("layer{i}.{bn}.w{j}"));
                    out.push(format!("layer{i}.{bn}.b{j}"));
                }
            }
            out.push(format!("layer{i}.pos"));
        }
        for j in 0..self.scorer.depth() {
            out.push(format!("scorer.w{j}"));
            out.push(format!("scorer.b{j}"));
        }
        out.push("attention.logits".to_string());
        out
    }

    /// Replaces the attention logits; the task count must match.
    pub fn set_attention(&mut self, attention: AttentionWeights) -> Result<()> {
        if attention.num_tasks() != self.config.max_tasks {
            return Err(Error::contract("attention task count differs from max_tasks"));
        }
        if self.config.homogeneous && attention.num_relations() != 1 {
            return Err(Error::contract("homogeneous model needs one attention row"));
        }
        self.attention = attention;
        Ok(())
    }

    /// The same weights read through the relation-blind merged view, with a
    /// single uniform attention row.
    pub fn into_homogeneous(mut self) -> Self {
        self.config.homogeneous = true;
        self.attention = AttentionWeights::new(Tensor::zeros(vec![1, self.config.max_tasks]))
            .expect("zero logits are finite");
        self
    }

    /// FNV-1a over the bit patterns of every parameter except the attention
    /// logits; equal hashes mean bit-identical frozen state.
    pub fn frozen_hash(&self) -> u64 {
        let tensors = self.tensors();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &tensors[..tensors.len() - 1] {
            let dims = t.shape().iter().map(|&s| s as u64);
            for x in dims.chain(t.data().iter().map(|x| x.to_bits())) {
                h = (h ^ x).wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}
