//! Self-contained property suites: gradient correctness, double
//! equivariance, exchangeability as an equivalence relation, and ranking
//! protocol identities. Each runs at a fixed seed and reports every
//! property with its measured value.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::RunConfig;
use crate::data::{metafam_generate, sample_negatives, two_task_graph, MetaFamConfig, SplitRole, TwoTaskConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, metrics_from_ranks, rank_all, rank_pessimistic, FnScorer, MetricsReport, RankingScheme};
use crate::graph::{
    apply_perms, exchangeable_bruteforce, relational_tasks, EmpiricalDistribution, Multigraph, Perm,
    TaskPartition, Triplet,
};
use crate::loss::LossConfig;
use crate::model::{
    forward, AttentionWeights, BoundParams, GraphView, ModelConfig, ModelParams, ModelScorer, Trainable,
};
use crate::numeric::finite_diff_check;
use crate::rng::{indexed_stream, substream};
use crate::train::{adapt, batch_loss, train, train_from, TrainConfig};

pub const GRADCHECK_TOL: f64 = 1e-5;
pub const EQUIVARIANCE_TOL: f64 = 1e-9;
pub const EQUIVARIANCE_CASES: usize = 200;
pub const EXCHANGEABILITY_CASES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradcheck,
    Equivariance,
    Exchangeability,
    Ranking,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Gradcheck,
        Suite::Equivariance,
        Suite::Exchangeability,
        Suite::Ranking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gradcheck => "gradcheck",
            Suite::Equivariance => "equivariance",
            Suite::Exchangeability => "exchangeability",
            Suite::Ranking => "ranking",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub property: String,
    pub passed: bool,
    pub detail: String,
    /// Seed of the first failing case, when the property is checked over
    /// generated cases.
    pub counterexample: Option<u64>,
}

impl PropertyCheck {
    fn new(property: &str, passed: bool, detail: String) -> Self {
        PropertyCheck {
            property: property.into(),
            passed,
            detail,
            counterexample: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<PropertyCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = if c.passed { "ok  " } else { "FAIL" };
            s.push_str(&format!("{status} {}::{}  {}", self.suite, c.property, c.detail));
            if let Some(seed) = c.counterexample {
                s.push_str(&format!("  (counterexample seed {seed})"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Gradcheck => vec![gradcheck(seed)?],
        Suite::Equivariance => vec![equivariance(seed, EQUIVARIANCE_CASES)?],
        Suite::Exchangeability => exchangeability(seed, EXCHANGEABILITY_CASES)?,
        Suite::Ranking => ranking(seed)?,
    };
    Ok(SuiteReport { suite, checks })
}

/// Each ordered pair `(u, v)`, `u != v`, and relation is present
/// independently with probability `p`.
pub fn random_multigraph<R: Rng + ?Sized>(n: usize, r: usize, p: f64, rng: &mut R) -> Result<Multigraph> {
    let mut ts = Vec::new();
    for rel in 0..r {
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.gen_bool(p) {
                    ts.push(Triplet::new(u, rel, v));
                }
            }
        }
    }
    Multigraph::new(n, r, ts)
}

/// Max relative error of tape gradients against central differences for
/// the full regularized loss on a random 5-node, 3-relation graph.
pub fn gradcheck_error(seed: u64) -> Result<f64> {
    let mut rng = substream(seed, "verify.gradcheck");
    let graph = random_multigraph(5, 3, 0.35, &mut rng)?;
    let cfg = ModelConfig {
        hidden_dim: 8,
        max_tasks: 2,
        ..ModelConfig::default()
    };
    let mut params = ModelParams::init(cfg, 3, &mut rng)?;
    // Spread logits so the regularizers have non-trivial gradients.
    params.set_attention(AttentionWeights::random(3, 2, &mut rng))?;
    for x in params.attention.logits_mut().data_mut() {
        *x *= 100.0;
    }
    let view = GraphView::for_model(&graph, false, cfg.aggregation);
    let mut positives = graph.triplets().to_vec();
    positives.shuffle(&mut rng);
    positives.truncate(4);
    let loss_cfg = LossConfig::default();
    let negs = sample_negatives(&graph, &positives, loss_cfg.n_tail, loss_cfg.n_rel, &mut rng)?;
    let lambdas = loss_cfg.lambdas(3);
    let tensors: Vec<_> = params.tensors().into_iter().cloned().collect();
    let check = finite_diff_check(&tensors, 1e-6, |tape, vars| {
        let bound = BoundParams::from_vars(&params, vars, Vec::new())?;
        batch_loss(tape, &bound, &view, &negs, lambdas)
    })?;
    Ok(check.max_rel_error)
}

fn gradcheck(seed: u64) -> Result<PropertyCheck> {
    let err = gradcheck_error(seed)?;
    Ok(PropertyCheck::new(
        "full-loss gradient",
        err <= GRADCHECK_TOL,
        format!("max relative error {err:.3e} (tol {GRADCHECK_TOL:.0e})"),
    ))
}

/// Relabels nodes by `pi` and relations by `sigma` in both the graph and
/// the attention rows, and returns the largest deviation between the
/// relabeled states and the original ones mapped through `(pi, sigma)`.
pub fn equivariance_deviation(params: &ModelParams, graph: &Multigraph, pi: &Perm, sigma: &Perm) -> Result<f64> {
    let cfg = params.config();
    let base = forward(params, &GraphView::for_model(graph, false, cfg.aggregation))?;
    let moved_graph = apply_perms(graph, pi, sigma)?;
    let inv = sigma.inverse();
    let mut moved = params.clone();
    moved.set_attention(AttentionWeights::new(params.attention.logits().gather_rows(inv.as_slice()))?)?;
    let out = forward(&moved, &GraphView::for_model(&moved_graph, false, cfg.aggregation))?;
    let mut worst = 0.0f64;
    for r in 0..graph.num_relations() {
        for v in 0..graph.num_nodes() {
            let a = base.row(r, v);
            let b = out.row(sigma.apply(r), pi.apply(v));
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    Ok(worst)
}

/// Max deviation over `cases` random graphs (N <= 6, R <= 4), models and
/// relabelings, with the index of the worst case.
pub fn equivariance_sweep(seed: u64, cases: usize) -> Result<(f64, u64)> {
    let mut worst = (0.0f64, 0u64);
    for case in 0..cases as u64 {
        let mut rng = indexed_stream(seed, "verify.equivariance", case);
        let n = rng.gen_range(2..=6);
        let r = rng.gen_range(2..=4);
        let graph = random_multigraph(n, r, 0.3, &mut rng)?;
        let cfg = ModelConfig {
            hidden_dim: 4,
            num_gnn_layers: rng.gen_range(1..=2),
            num_mlp_layers: 1,
            max_tasks: rng.gen_range(1..=3),
            ..ModelConfig::default()
        };
        let mut params = ModelParams::init(cfg, r, &mut rng)?;
        params.set_attention(AttentionWeights::random(r, cfg.max_tasks, &mut rng))?;
        for x in params.attention.logits_mut().data_mut() {
            *x *= 100.0;
        }
        let dev = equivariance_deviation(&params, &graph, &Perm::random(n, &mut rng), &Perm::random(r, &mut rng))?;
        if dev > worst.0 || !dev.is_finite() {
            worst = (dev, case);
        }
    }
    Ok(worst)
}

fn equivariance(seed: u64, cases: usize) -> Result<PropertyCheck> {
    let (dev, case) = equivariance_sweep(seed, cases)?;
    let passed = dev <= EQUIVARIANCE_TOL;
    let mut c = PropertyCheck::new(
        "node and relation relabeling",
        passed,
        format!("{cases} cases, max deviation {dev:.3e} (tol {EQUIVARIANCE_TOL:.0e})"),
    );
    if !passed {
        c.counterexample = Some(case);
    }
    Ok(c)
}

/// A distribution with known relation classes: each relation gets a random
/// edge set whose size identifies its class, and the support is closed
/// under every relation permutation that preserves the classes. Relations
/// of one class are therefore exchangeable and different edge counts keep
/// classes apart. Returns the distribution and the expected partition.
pub fn planted_distribution(case_seed: u64) -> Result<(EmpiricalDistribution, TaskPartition)> {
    let mut rng = substream(case_seed, "verify.planted");
    let n = rng.gen_range(3..=5);
    let r = rng.gen_range(2..=4);
    let classes = rng.gen_range(1..=r);
    let mut labels: Vec<usize> = (0..r).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut sizes: Vec<usize> = (1..=classes).collect();
    sizes.shuffle(&mut rng);

    let pairs: Vec<(usize, usize)> = (0..n).cartesian_product(0..n).filter(|(u, v)| u != v).collect();
    let mut base = Vec::new();
    for (rel, &label) in labels.iter().enumerate() {
        for &(u, v) in pairs.choose_multiple(&mut rng, sizes[label]) {
            base.push(Triplet::new(u, rel, v));
        }
    }
    let base = Multigraph::new(n, r, base)?;

    let mut support = Vec::new();
    for sigma in (0..r).permutations(r) {
        if (0..r).all(|i| labels[sigma[i]] == labels[i]) {
            let g = apply_perms(&base, &Perm::identity(n), &Perm::new(sigma)?)?;
            if !support.contains(&g) {
                support.push(g);
            }
        }
    }
    // Canonical task ids in order of each class's smallest member.
    let mut order: Vec<usize> = Vec::new();
    for &l in &labels {
        if !order.contains(&l) {
            order.push(l);
        }
    }
    let assignment = labels
        .iter()
        .map(|l| order.iter().position(|o| o == l).expect("seen"))
        .collect();
    Ok((
        EmpiricalDistribution::uniform(support)?,
        TaskPartition::new(assignment, order.len())?,
    ))
}

fn exchangeability(seed: u64, cases: usize) -> Result<Vec<PropertyCheck>> {
    let mut first_fail: [Option<u64>; 4] = [None; 4];
    for case in 0..cases as u64 {
        let case_seed = seed.wrapping_mul(1_000_003).wrapping_add(case);
        let (dist, expected) = planted_distribution(case_seed)?;
        let r = dist.num_relations();
        let mut ex = vec![vec![false; r]; r];
        for a in 0..r {
            for b in 0..r {
                ex[a][b] = exchangeable_bruteforce(&dist, a, b)?;
            }
        }
        let reflexive = (0..r).all(|a| ex[a][a]);
        let symmetric = (0..r).all(|a| (0..r).all(|b| ex[a][b] == ex[b][a]));
        let transitive = (0..r).all(|a| (0..r).all(|b| (0..r).all(|c| !(ex[a][b] && ex[b][c]) || ex[a][c])));
        let matches = relational_tasks(&dist)? == expected;
        for (slot, ok) in first_fail.iter_mut().zip([reflexive, symmetric, transitive, matches]) {
            if !ok && slot.is_none() {
                *slot = Some(case_seed);
            }
        }
    }
    let names = ["reflexive", "symmetric", "transitive", "classes match planted partition"];
    Ok(names
        .iter()
        .zip(first_fail)
        .map(|(name, fail)| PropertyCheck {
            property: (*name).into(),
            passed: fail.is_none(),
            detail: format!("{cases} distributions"),
            counterexample: fail,
        })
        .collect())
}

fn ranking(seed: u64) -> Result<Vec<PropertyCheck>> {
    let mut checks = Vec::new();
    let examples = rank_pessimistic(&[0.9, 0.1, 0.2], 0) == 1
        && rank_pessimistic(&[0.5; 51], 0) == 51
        && rank_pessimistic(&[0.9, 0.7, 0.7, 0.5], 1) == 3;
    checks.push(PropertyCheck::new("pessimistic tie rank", examples, "worked examples".into()));

    let m = metrics_from_ranks(&[1, 2, 4])?;
    let arith = (m.mrr - 1.75 / 3.0).abs() < 1e-15 && (m.mr - 7.0 / 3.0).abs() < 1e-15;
    checks.push(PropertyCheck::new(
        "metric arithmetic",
        arith,
        format!("ranks [1,2,4] -> MRR {:.4}, MR {:.4}", m.mrr, m.mr),
    ));

    let mut rng = substream(seed, "verify.ranking");
    let mut mono = true;
    let mut below = true;
    for _ in 0..500 {
        let len = rng.gen_range(1..60);
        let mut s: Vec<f64> = (0..len).map(|_| (rng.gen_range(0..8) as f64) / 8.0).collect();
        let pos = rng.gen_range(0..len);
        let before = rank_pessimistic(&s, pos);
        s[pos] += 0.0625;
        mono &= rank_pessimistic(&s, pos) <= before;
        let after = rank_pessimistic(&s, pos);
        s.push(s[pos] - 1.0);
        below &= rank_pessimistic(&s, pos) == after;
    }
    checks.push(PropertyCheck::new("monotone in positive score", mono, "500 random pools".into()));
    checks.push(PropertyCheck::new("lower candidates leave rank unchanged", below, "500 random pools".into()));

    // Homogeneous baseline: relation variants of a pair tie exactly.
    let graph = random_multigraph(30, 5, 0.02, &mut rng)?;
    // One relation per pair, so the oracle never scores a negative as true.
    let sampled = random_multigraph(30, 5, 0.01, &mut rng)?;
    let missing = Multigraph::new(
        30,
        5,
        sampled
            .triplets()
            .iter()
            .copied()
            .unique_by(|t| (t.head, t.tail)),
    )?;
    let cfg = ModelConfig {
        hidden_dim: 8,
        homogeneous: true,
        ..ModelConfig::default()
    };
    let homo = ModelParams::init(cfg, 5, &mut rng)?;
    let scorer = ModelScorer::new(&homo, &graph)?;
    let rel_ranks = rank_all(&scorer, &graph, &missing, RankingScheme::RELATION, seed)?;
    let rel = metrics_from_ranks(&rel_ranks)?;
    checks.push(PropertyCheck::new(
        "homogeneous relation-scheme ties",
        rel_ranks.iter().all(|&r| r == 51),
        format!("MR {:.3}, MRR {:.4} over {} positives", rel.mr, rel.mrr, rel.count),
    ));
    let dual_ranks = rank_all(&scorer, &graph, &missing, RankingScheme::DUAL, seed)?;
    let dual = metrics_from_ranks(&dual_ranks)?;
    checks.push(PropertyCheck::new(
        "homogeneous dual-scheme floor",
        dual_ranks.iter().all(|&r| r >= 27) && dual.hits10 == 0.0,
        format!("min rank {}, Hits@10 {:.3}", dual_ranks.iter().min().expect("non-empty"), dual.hits10),
    ));

    let truth = missing.clone();
    let oracle = FnScorer(move |t: &Triplet| if truth.contains(t) { 1.0 } else { 0.0 });
    let o = metrics_from_ranks(&rank_all(&oracle, &graph, &missing, RankingScheme::RELATION, seed)?)?;
    checks.push(PropertyCheck::new(
        "oracle scorer ranks first",
        o.mrr == 1.0 && o.mr == 1.0 && o.hits1 == 1.0,
        format!("relation-scheme MRR {:.4}", o.mrr),
    ));
    Ok(checks)
}

/// Attention logit scale used to pin the planted kinds while the body trains.
pub const RECOVERY_PLANT_SCALE: f64 = 0.5;

/// Result of one adaptation run on the two-task construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryOutcome {
    pub kinds: Vec<usize>,
    pub recovered: Vec<usize>,
    pub frozen_unchanged: bool,
    /// Largest `|sum(row) - 1|` over the adapted attention.
    pub row_sum_error: f64,
}

impl RecoveryOutcome {
    pub fn hits(&self) -> usize {
        self.kinds.iter().zip(&self.recovered).filter(|(a, b)| a == b).count()
    }
}

/// Trains a body with attention pinned to the planted kinds of a two-task
/// graph, then adapts only the attention on an unseen graph of the same
/// family and reads off each test relation's argmax task.
pub fn adaptation_recovery(seed: u64) -> Result<RecoveryOutcome> {
    let train_graph = two_task_graph(&TwoTaskConfig { seed, ..TwoTaskConfig::default() }, SplitRole::Train)?;
    let test_graph =
        two_task_graph(&TwoTaskConfig { seed: seed + 200, ..TwoTaskConfig::default() }, SplitRole::Test)?;
    let mcfg = ModelConfig { num_gnn_layers: 1, ..ModelConfig::default() };
    let tcfg = TrainConfig {
        seed,
        lr: 1e-2,
        batch_positives: 64,
        max_epochs: 30,
        patience: 30,
        ..TrainConfig::default()
    };
    let mut params = ModelParams::init(mcfg, train_graph.kinds.len(), &mut substream(seed, "recovery.init"))?;
    params.set_attention(AttentionWeights::from_assignment(&train_graph.kinds, 2, RECOVERY_PLANT_SCALE))?;
    let (params, _) = train_from(params, Trainable::Body, &train_graph.split, None, &tcfg, &mut |_| {})?;

    let adapt_cfg = TrainConfig { lr: 1e-3, ..tcfg };
    let adapted = adapt(&params, test_graph.split.observable(), &adapt_cfg)?;
    let tuned = adapted.apply_to(&params)?;
    let alpha = adapted.attention.alpha();
    let row_sum_error = (0..alpha.rows())
        .map(|r| (alpha.row(r).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(RecoveryOutcome {
        kinds: test_graph.kinds,
        recovered: adapted.attention.top_tasks(),
        frozen_unchanged: tuned.frozen_hash() == params.frozen_hash(),
        row_sum_error,
    })
}

/// Test-split metrics of one MetaFam run: train with validation-based early
/// stopping, adapt the attention on the test graph, then rank.
#[derive(Clone, Debug, PartialEq)]
pub struct EndToEnd {
    pub dual: MetricsReport,
    pub relation: MetricsReport,
    pub best_epoch: Option<usize>,
}

pub fn metafam_end_to_end(seed: u64, run: &RunConfig) -> Result<EndToEnd> {
    let data = metafam_generate(&MetaFamConfig { seed, ..MetaFamConfig::default() })?;
    let tcfg = TrainConfig { seed, ..run.train };
    let (params, history) = train(&data.train, Some(&data.valid), &tcfg, &run.model)?;
    let params = adapt(&params, data.test.observable(), &tcfg)?.apply_to(&params)?;
    let test = &data.test;
    let scorer = ModelScorer::new(&params, test.observable())?;
    let rank = |scheme| evaluate(&scorer, test.observable(), test.missing(), scheme, seed);
    Ok(EndToEnd {
        dual: rank(RankingScheme::DUAL)?,
        relation: rank(RankingScheme::RELATION)?,
        best_epoch: history.best_epoch,
    })
}
