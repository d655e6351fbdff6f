//! Mini-batch training with early stopping, and test-time adaptation of the
//! attention logits.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::data::{sample_negatives, self_supervised_split, DatasetSplit, NegativeBatch};
use crate::error::{Error, Result};
use crate::eval::{evaluate, RankingScheme};
use crate::graph::{Multigraph, Triplet};
use crate::loss::{dual_loss, total_loss, LossConfig};
use crate::model::{
    forward_tape, score_tape, AttentionWeights, BoundParams, GraphView, ModelConfig, ModelParams,
    ModelScorer, Trainable,
};
use crate::numeric::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::rng::{substream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_positives: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub adapt_epochs: usize,
    pub adapt_holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_positives: 256,
            lr: 1e-3,
            weight_decay: 5e-4,
            clip_norm: 1.0,
            max_epochs: 10,
            patience: 5,
            seed: 0,
            loss: LossConfig::default(),
            adapt_epochs: 10,
            adapt_holdout_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let positive = self.batch_positives > 0
            && self.lr > 0.0
            && self.weight_decay >= 0.0
            && self.clip_norm > 0.0
            && self.max_epochs > 0
            && self.patience > 0;
        if !positive {
            return Err(Error::Config("training sizes and rates must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config("patience exceeds max_epochs".into()));
        }
        if !(self.adapt_holdout_fraction > 0.0 && self.adapt_holdout_fraction < 1.0) {
            return Err(Error::Config("adapt holdout fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            clip_norm: Some(self.clip_norm),
            ..AdamConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean loss per positive over the epoch.
    pub loss: f64,
    /// Validation dual-scheme MRR; NaN without a validation split.
    pub val_mrr: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    /// CSV with header `epoch,loss,val_mrr,lambda1,lambda2,seconds`. Wall
    /// times vary between runs; `include_timing = false` writes them as 0 so
    /// the output is reproducible.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut s = String::from("epoch,loss,val_mrr,lambda1,lambda2,seconds\n");
        for e in &self.epochs {
            let secs = if include_timing { e.seconds } else { 0.0 };
            s.push_str(&format!(
                "{},{:.10},{:.10},{:.10},{:.10},{:.3}\n",
                e.epoch, e.loss, e.val_mrr, e.lambda1, e.lambda2, secs
            ));
        }
        s
    }
}

/// Patience-based stopping on a metric where larger is better.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records `metric` for `epoch`; returns true if it is a new best.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        let improved = match self.best {
            None => true,
            Some((_, b)) => metric > b,
        };
        if improved {
            self.best = Some((epoch, metric));
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Full regularized loss of one negative batch on `view`.
pub fn batch_loss(
    tape: &mut Tape,
    bound: &BoundParams,
    view: &GraphView,
    negs: &NegativeBatch,
    lambdas: (f64, f64),
) -> Result<Var> {
    let h = forward_tape(tape, bound, view)?;
    let sp = score_tape(tape, bound, view, h, &negs.positives)?;
    let st = (!negs.tail.is_empty())
        .then(|| score_tape(tape, bound, view, h, &negs.tail))
        .transpose()?;
    let sr = (!negs.rel.is_empty())
        .then(|| score_tape(tape, bound, view, h, &negs.rel))
        .transpose()?;
    let dual = dual_loss(tape, sp, st, sr, negs.n, negs.m)?;
    let alpha = tape.softmax_rows(bound.logits);
    total_loss(tape, dual, alpha, lambdas.0, lambdas.1)
}

/// One optimizer step over a batch of positives. Returns the summed loss.
#[allow(clippy::too_many_arguments)]
fn train_step(
    params: &mut ModelParams,
    trainable: Trainable,
    view: &GraphView,
    graph: &Multigraph,
    batch: &[Triplet],
    loss_cfg: &LossConfig,
    lambdas: (f64, f64),
    adam: &mut AdamState,
    adam_cfg: &AdamConfig,
    neg_rng: &mut StreamRng,
    at: (usize, usize),
) -> Result<f64> {
    let non_finite = || Error::NonFiniteLoss {
        epoch: at.0,
        batch: at.1,
    };
    let negs = sample_negatives(graph, batch, loss_cfg.n_tail, loss_cfg.n_rel, neg_rng)?;
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params, trainable);
    let loss = batch_loss(&mut tape, &bound, view, &negs, lambdas)?;
    let value = tape.value(loss).item();
    if !value.is_finite() {
        return Err(non_finite());
    }
    let mut grads = tape.backward(loss);
    let g: Vec<Tensor> = bound.leaves.iter().map(|&v| grads.take(v)).collect();
    let mut targets: Vec<&mut Tensor> = match trainable {
        Trainable::All => params.tensors_mut(),
        Trainable::Body => {
            let mut t = params.tensors_mut();
            t.pop();
            t
        }
        Trainable::AttentionOnly => vec![params.attention.logits_mut()],
        Trainable::Nothing => Vec::new(),
    };
    adam_step(&mut targets, g, adam, adam_cfg).map_err(|e| match e {
        Error::Numeric(_) => non_finite(),
        other => other,
    })?;
    Ok(value)
}

fn adam_state_for(params: &ModelParams, trainable: Trainable) -> AdamState {
    match trainable {
        Trainable::All => AdamState::new(params.tensors()),
        Trainable::Body => {
            let t = params.tensors();
            AdamState::new(t[..t.len() - 1].iter().copied())
        }
        _ => AdamState::new([params.attention.logits()]),
    }
}

/// Trains on `train.missing()` as positives with `train.observable()` as
/// message-passing context. With a validation split, returns the parameters
/// of the best validation epoch (dual-scheme MRR); otherwise the last.
pub fn train(
    train: &DatasetSplit,
    valid: Option<&DatasetSplit>,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with_progress(train, valid, cfg, model_cfg, &mut |_| {})
}

pub fn train_with_progress(
    train: &DatasetSplit,
    valid: Option<&DatasetSplit>,
    cfg: &TrainConfig,
    model_cfg: &ModelConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainHistory)> {
    let params = ModelParams::init(
        *model_cfg,
        train.num_relations(),
        &mut substream(cfg.seed, "train.init"),
    )?;
    train_from(params, Trainable::All, train, valid, cfg, on_epoch)
}

/// Continues training from `params`, updating only the `trainable` part.
pub fn train_from(
    mut params: ModelParams,
    trainable: Trainable,
    train: &DatasetSplit,
    valid: Option<&DatasetSplit>,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if train.missing().is_empty() {
        return Err(Error::Degenerate("training split has no missing triplets".into()));
    }
    let graph = train.observable();
    let model_cfg = *params.config();
    let view = GraphView::for_model(graph, model_cfg.homogeneous, model_cfg.aggregation);
    let mut batch_rng = substream(cfg.seed, "train.batches");
    let mut neg_rng = substream(cfg.seed, "train.negatives");
    let val_seed = substream(cfg.seed, "train.valid").next_u64();
    let adam_cfg = cfg.adam();
    let mut adam = adam_state_for(&params, trainable);

    let mut history = TrainHistory::default();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut positives = train.missing().triplets().to_vec();

    for epoch in 0..cfg.max_epochs {
        let start = Instant::now();
        let lambdas = cfg.loss.lambdas(epoch);
        positives.shuffle(&mut batch_rng);
        let mut total = 0.0;
        for (b, batch) in positives.chunks(cfg.batch_positives).enumerate() {
            total += train_step(
                &mut params,
                trainable,
                &view,
                graph,
                batch,
                &cfg.loss,
                lambdas,
                &mut adam,
                &adam_cfg,
                &mut neg_rng,
                (epoch, b),
            )?;
        }
        let val_mrr = match valid {
            Some(v) => {
                let scorer = ModelScorer::new(&params, v.observable())?;
                evaluate(&scorer, v.observable(), v.missing(), RankingScheme::DUAL, val_seed)?.mrr
            }
            None => f64::NAN,
        };
        let record = EpochRecord {
            epoch,
            loss: total / positives.len() as f64,
            val_mrr,
            lambda1: lambdas.0,
            lambda2: lambdas.1,
            seconds: start.elapsed().as_secs_f64(),
        };
        history.epochs.push(record);
        on_epoch(&record);
        if valid.is_none() {
            best = params.clone();
            history.best_epoch = Some(epoch);
            continue;
        }
        if stopper.observe(epoch, val_mrr) {
            best = params.clone();
            history.best_epoch = Some(epoch);
        }
        if stopper.should_stop() {
            break;
        }
    }
    Ok((best, history))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adapted {
    pub attention: AttentionWeights,
    /// Mean loss per held-out positive, per adaptation epoch.
    pub losses: Vec<f64>,
}

impl Adapted {
    /// `params` with the adapted attention swapped in.
    pub fn apply_to(&self, params: &ModelParams) -> Result<ModelParams> {
        let mut p = params.clone();
        p.set_attention(self.attention.clone())?;
        Ok(p)
    }
}

/// Learns fresh attention logits for the relations of `observable` with
/// every other parameter frozen. Each epoch holds out a new random fraction
/// of the observable triplets as positives and uses the rest as context.
pub fn adapt(params: &ModelParams, observable: &Multigraph, cfg: &TrainConfig) -> Result<Adapted> {
    cfg.validate()?;
    let mcfg = *params.config();
    let rows = if mcfg.homogeneous { 1 } else { observable.num_relations() };
    // The frozen weights already tell tasks apart, so uniform rows need no
    // random symmetry breaking.
    let mut working = params.clone();
    working.set_attention(AttentionWeights::new(Tensor::zeros(vec![rows, mcfg.max_tasks]))?)?;
    let mut mask_rng = substream(cfg.seed, "adapt.masks");
    let mut batch_rng = substream(cfg.seed, "adapt.batches");
    let mut neg_rng = substream(cfg.seed, "adapt.negatives");
    let adam_cfg = cfg.adam();
    let mut adam = adam_state_for(&working, Trainable::AttentionOnly);
    let mut losses = Vec::with_capacity(cfg.adapt_epochs);

    for epoch in 0..cfg.adapt_epochs {
        let lambdas = cfg.loss.lambdas(epoch);
        let (context, targets) = self_supervised_split(observable, cfg.adapt_holdout_fraction, &mut mask_rng)?;
        let view = GraphView::for_model(&context, mcfg.homogeneous, mcfg.aggregation);
        let mut positives = targets.triplets().to_vec();
        positives.shuffle(&mut batch_rng);
        let mut total = 0.0;
        for (b, batch) in positives.chunks(cfg.batch_positives).enumerate() {
            total += train_step(
                &mut working,
                Trainable::AttentionOnly,
                &view,
                &context,
                batch,
                &cfg.loss,
                lambdas,
                &mut adam,
                &adam_cfg,
                &mut neg_rng,
                (epoch, b),
            )?;
        }
        losses.push(total / positives.len() as f64);
    }
    Ok(Adapted {
        attention: working.attention,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_five_on_degrading_metric_stops_after_sixth_epoch() {
        let mut s = EarlyStopping::new(5);
        let mut epochs = 0;
        for e in 0..10 {
            epochs += 1;
            s.observe(e, 1.0 - e as f64 * 0.1);
            if s.should_stop() {
                break;
            }
        }
        assert_eq!(epochs, 6);
        assert_eq!(s.best_epoch(), Some(0));
    }

    #[test]
    fn improvement_resets_patience() {
        let mut s = EarlyStopping::new(2);
        assert!(s.observe(0, 0.1));
        assert!(!s.observe(1, 0.1));
        assert!(s.observe(2, 0.2));
        assert!(!s.observe(3, 0.0));
        assert!(!s.should_stop());
        s.observe(4, 0.0);
        assert!(s.should_stop());
        assert_eq!(s.best_epoch(), Some(2));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 11,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
