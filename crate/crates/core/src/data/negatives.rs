use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Multigraph, Triplet};

/// Per positive: `n` tail-corrupted and `m` relation-corrupted triplets,
/// stored positive-major (`tail[i*n..(i+1)*n]` belongs to `positives[i]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeBatch {
    pub positives: Vec<Triplet>,
    pub tail: Vec<Triplet>,
    pub rel: Vec<Triplet>,
    pub n: usize,
    pub m: usize,
}

impl NegativeBatch {
    pub fn total_triplets(&self) -> usize {
        self.positives.len() + self.tail.len() + self.rel.len()
    }
}

/// A tail drawn uniformly from all nodes.
pub fn corrupt_tail<R: Rng + ?Sized>(t: Triplet, num_nodes: usize, rng: &mut R) -> Triplet {
    Triplet::new(t.head, t.rel, rng.gen_range(0..num_nodes))
}

/// A relation drawn uniformly from the `R - 1` relations other than `t.rel`.
pub fn corrupt_relation<R: Rng + ?Sized>(t: Triplet, num_relations: usize, rng: &mut R) -> Triplet {
    let mut r = rng.gen_range(0..num_relations - 1);
    if r >= t.rel {
        r += 1;
    }
    Triplet::new(t.head, r, t.tail)
}

/// Unfiltered sampling with replacement: a negative may coincide with a
/// true triplet.
pub fn sample_negatives<R: Rng + ?Sized>(
    graph: &Multigraph,
    positives: &[Triplet],
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<NegativeBatch> {
    let (nn, nr) = (graph.num_nodes(), graph.num_relations());
    if m > 0 && nr < 2 {
        return Err(Error::contract("relation corruption needs R >= 2"));
    }
    let mut tail = Vec::with_capacity(positives.len() * n);
    let mut rel = Vec::with_capacity(positives.len() * m);
    for &p in positives {
        if p.head >= nn || p.tail >= nn || p.rel >= nr {
            return Err(Error::contract(format!("positive {p:?} out of range")));
        }
        for _ in 0..n {
            tail.push(corrupt_tail(p, nn, rng));
        }
        for _ in 0..m {
            rel.push(corrupt_relation(p, nr, rng));
        }
    }
    Ok(NegativeBatch {
        positives: positives.to_vec(),
        tail,
        rel,
        n,
        m,
    })
}

/// Holds out `round(fraction * |triplets|)` uniformly chosen triplets as
/// targets; the rest is the context. Both parts must be non-empty.
pub fn self_supervised_split<R: Rng + ?Sized>(
    graph: &Multigraph,
    holdout_fraction: f64,
    rng: &mut R,
) -> Result<(Multigraph, Multigraph)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::contract("holdout fraction must lie in (0, 1)"));
    }
    let total = graph.len();
    let k = (holdout_fraction * total as f64).round() as usize;
    if k == 0 || k >= total {
        return Err(Error::Degenerate(format!(
            "holding out {k} of {total} triplets leaves an empty part"
        )));
    }
    let mut held = vec![false; total];
    for i in index::sample(rng, total, k) {
        held[i] = true;
    }
    let (mut ctx, mut tgt) = (Vec::with_capacity(total - k), Vec::with_capacity(k));
    for (t, h) in graph.triplets().iter().zip(held) {
        if h {
            tgt.push(*t)
        } else {
            ctx.push(*t)
        }
    }
    Ok((
        Multigraph::new(graph.num_nodes(), graph.num_relations(), ctx)?,
        Multigraph::new(graph.num_nodes(), graph.num_relations(), tgt)?,
    ))
}
