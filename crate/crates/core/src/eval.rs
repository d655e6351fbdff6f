//! Ranking evaluation with dual, entity-centric and relation-centric
//! candidate pools, pessimistic tie handling, and MR / MRR / Hits@k.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{corrupt_relation, corrupt_tail};
use crate::error::{Error, Result};
use crate::graph::{Multigraph, Triplet};
use crate::model::ModelScorer;
use crate::rng::indexed_stream;

/// Positives evaluated per scoring call.
const EVAL_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RankingScheme {
    /// Tail- and relation-corrupted negatives in one pool.
    Dual { n_tail: usize, n_rel: usize },
    Entity { n_tail: usize },
    Relation { n_rel: usize },
}

impl RankingScheme {
    pub const DUAL: RankingScheme = RankingScheme::Dual { n_tail: 24, n_rel: 26 };
    pub const ENTITY: RankingScheme = RankingScheme::Entity { n_tail: 50 };
    pub const RELATION: RankingScheme = RankingScheme::Relation { n_rel: 50 };

    pub fn name(&self) -> &'static str {
        match self {
            RankingScheme::Dual { .. } => "dual",
            RankingScheme::Entity { .. } => "entity",
            RankingScheme::Relation { .. } => "relation",
        }
    }

    /// `(tail negatives, relation negatives)` per positive.
    pub fn negatives(&self) -> (usize, usize) {
        match *self {
            RankingScheme::Dual { n_tail, n_rel } => (n_tail, n_rel),
            RankingScheme::Entity { n_tail } => (n_tail, 0),
            RankingScheme::Relation { n_rel } => (0, n_rel),
        }
    }

    pub fn pool_size(&self) -> usize {
        let (a, b) = self.negatives();
        1 + a + b
    }
}

impl fmt::Display for RankingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankingScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(RankingScheme::DUAL),
            "entity" => Ok(RankingScheme::ENTITY),
            "relation" => Ok(RankingScheme::RELATION),
            _ => Err(Error::Config(format!("unknown ranking scheme `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits5: f64,
    pub hits10: f64,
    pub count: usize,
}

impl MetricsReport {
    pub fn metrics(&self) -> [(&'static str, f64); 6] {
        [
            ("MR", self.mr),
            ("MRR", self.mrr),
            ("Hits@1", self.hits1),
            ("Hits@3", self.hits3),
            ("Hits@5", self.hits5),
            ("Hits@10", self.hits10),
        ]
    }

    /// CSV body lines (no header) as `scheme,metric,value,count`.
    pub fn csv_rows(&self, scheme: &str) -> String {
        self.metrics()
            .iter()
            .map(|(m, v)| format!("{scheme},{m},{v:.6},{}\n", self.count))
            .collect()
    }

    pub fn to_csv(&self, scheme: &str) -> String {
        format!("scheme,metric,value,count\n{}", self.csv_rows(scheme))
    }

    pub fn table(&self, scheme: &str) -> String {
        let mut s = format!("{scheme} ranking over {} positives\n", self.count);
        for (m, v) in self.metrics() {
            s.push_str(&format!("  {m:<8} {v:>10.4}\n"));
        }
        s
    }
}

/// `1 + #{c != pos : s_c > s_pos} + #{c != pos : s_c == s_pos}`: the worst
/// position among ties.
pub fn rank_pessimistic(scores: &[f64], positive: usize) -> usize {
    let sp = scores[positive];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(i, &s)| i != positive && s >= sp)
        .count()
}

pub fn metrics_from_ranks(ranks: &[usize]) -> Result<MetricsReport> {
    if ranks.is_empty() {
        return Err(Error::contract("no ranks to aggregate"));
    }
    if ranks.contains(&0) {
        return Err(Error::contract("ranks start at 1"));
    }
    let n = ranks.len() as f64;
    let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(MetricsReport {
        mr: ranks.iter().map(|&r| r as f64).sum::<f64>() / n,
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        hits1: hits(1),
        hits3: hits(3),
        hits5: hits(5),
        hits10: hits(10),
        count: ranks.len(),
    })
}

/// Anything that assigns a score to each triplet of a batch.
pub trait TripletScorer: Sync {
    fn score_batch(&self, triplets: &[Triplet]) -> Result<Vec<f64>>;
}

impl TripletScorer for ModelScorer<'_> {
    fn score_batch(&self, triplets: &[Triplet]) -> Result<Vec<f64>> {
        self.score(triplets)
    }
}

/// Adapts a plain function into a [`TripletScorer`].
pub struct FnScorer<F>(pub F);

impl<F: Fn(&Triplet) -> f64 + Sync> TripletScorer for FnScorer<F> {
    fn score_batch(&self, triplets: &[Triplet]) -> Result<Vec<f64>> {
        Ok(triplets.iter().map(&self.0).collect())
    }
}

/// Candidate pool of the `index`-th positive: the positive first, then tail
/// and relation corruptions drawn from that positive's own stream.
pub fn candidate_pool(
    positive: Triplet,
    index: usize,
    num_nodes: usize,
    num_relations: usize,
    scheme: RankingScheme,
    seed: u64,
) -> Vec<Triplet> {
    let (n_tail, n_rel) = scheme.negatives();
    let mut rng = indexed_stream(seed, "eval.pool", index as u64);
    let mut pool = Vec::with_capacity(scheme.pool_size());
    pool.push(positive);
    pool.extend((0..n_tail).map(|_| corrupt_tail(positive, num_nodes, &mut rng)));
    pool.extend((0..n_rel).map(|_| corrupt_relation(positive, num_relations, &mut rng)));
    pool
}

/// Ranks of every missing triplet against its candidate pool.
pub fn rank_all<S: TripletScorer + ?Sized>(
    scorer: &S,
    observable: &Multigraph,
    missing: &Multigraph,
    scheme: RankingScheme,
    seed: u64,
) -> Result<Vec<usize>> {
    if missing.is_empty() {
        return Err(Error::contract("nothing to evaluate: missing set is empty"));
    }
    let (n, r) = (observable.num_nodes(), observable.num_relations());
    if missing.num_nodes() != n || missing.num_relations() != r {
        return Err(Error::contract("observable and missing graphs differ in N or R"));
    }
    let positives = missing.triplets();
    let chunks: Vec<Result<Vec<usize>>> = positives
        .par_chunks(EVAL_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let pools: Vec<Vec<Triplet>> = chunk
                .iter()
                .enumerate()
                .map(|(j, &p)| candidate_pool(p, c * EVAL_CHUNK + j, n, r, scheme, seed))
                .collect();
            let flat: Vec<Triplet> = pools.concat();
            let scores = scorer.score_batch(&flat)?;
            if scores.len() != flat.len() {
                return Err(Error::contract("scorer returned the wrong number of scores"));
            }
            Ok(scores
                .chunks(scheme.pool_size())
                .map(|pool| rank_pessimistic(pool, 0))
                .collect())
        })
        .collect();
    let mut ranks = Vec::with_capacity(positives.len());
    for c in chunks {
        ranks.extend(c?);
    }
    Ok(ranks)
}

pub fn evaluate<S: TripletScorer + ?Sized>(
    scorer: &S,
    observable: &Multigraph,
    missing: &Multigraph,
    scheme: RankingScheme,
    seed: u64,
) -> Result<MetricsReport> {
    metrics_from_ranks(&rank_all(scorer, observable, missing, scheme, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pessimistic_rank_examples() {
        assert_eq!(rank_pessimistic(&[0.9, 0.1, 0.2], 0), 1);
        assert_eq!(rank_pessimistic(&[0.5; 51], 0), 51);
        assert_eq!(rank_pessimistic(&[0.9, 0.7, 0.7, 0.5], 1), 3);
        assert_eq!(rank_pessimistic(&[0.9, 0.7, 0.7, 0.5], 2), 3);
    }

    #[test]
    fn metrics_arithmetic() {
        let m = metrics_from_ranks(&[1, 2, 4]).unwrap();
        assert!((m.mrr - 1.75 / 3.0).abs() < 1e-15);
        assert!((m.mr - 7.0 / 3.0).abs() < 1e-15);
        assert!((m.hits1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.hits5, 1.0);
        let single = metrics_from_ranks(&[51]).unwrap();
        assert_eq!(single.mr, 51.0);
        assert_eq!(single.mrr, 1.0 / 51.0);
        assert!(metrics_from_ranks(&[]).is_err());
    }

    #[test]
    fn default_pools_have_51_candidates() {
        for s in [RankingScheme::DUAL, RankingScheme::ENTITY, RankingScheme::RELATION] {
            assert_eq!(s.pool_size(), 51);
            assert_eq!(s.name().parse::<RankingScheme>().unwrap(), s);
        }
    }

    fn toy() -> (Multigraph, Multigraph) {
        let obs = Multigraph::new(6, 3, [(0, 0, 1), (2, 1, 3)].map(Triplet::from)).unwrap();
        let miss = Multigraph::new(6, 3, [(1, 2, 4), (3, 0, 5), (4, 1, 0)].map(Triplet::from)).unwrap();
        (obs, miss)
    }

    #[test]
    fn oracle_scorer_is_perfect() {
        let (obs, miss) = toy();
        let truth = miss.clone();
        let oracle = FnScorer(move |t: &Triplet| if truth.contains(t) { 1.0 } else { 0.0 });
        for s in [RankingScheme::DUAL, RankingScheme::ENTITY, RankingScheme::RELATION] {
            let m = evaluate(&oracle, &obs, &miss, s, 1).unwrap();
            // Unfiltered tail sampling may redraw the true tail, which ties.
            if s == RankingScheme::RELATION {
                assert_eq!((m.mrr, m.mr, m.hits1), (1.0, 1.0, 1.0));
            }
            assert!(m.hits10 > 0.0);
        }
    }

    #[test]
    fn relation_blind_scorer_ties_all_relation_negatives() {
        let (obs, miss) = toy();
        let blind = FnScorer(|t: &Triplet| (t.head * 7 + t.tail) as f64);
        let m = evaluate(&blind, &obs, &miss, RankingScheme::RELATION, 3).unwrap();
        assert_eq!(m.mr, 51.0);
        let d = evaluate(&blind, &obs, &miss, RankingScheme::DUAL, 3).unwrap();
        assert_eq!(d.hits10, 0.0);
    }
}
