use rand::seq::SliceRandom;
use rand::Rng;

use super::multigraph::{Multigraph, Triplet};
use crate::error::{Error, Result};

/// A bijection on `{0, .., n-1}`, stored as its image table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Perm(Vec<usize>);

impl Perm {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::contract(format!("{mapping:?} is not a permutation")));
            }
        }
        Ok(Perm(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Perm((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(rng);
        Perm(v)
    }

    /// Swaps `a` and `b`, fixing everything else.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut v: Vec<usize> = (0..n).collect();
        v.swap(a, b);
        Perm(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.len(), other.len(), "composing permutations of different sizes");
        Perm(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.len()];
        for (i, &m) in self.0.iter().enumerate() {
            inv[m] = i;
        }
        Perm(inv)
    }
}

/// Relabels nodes: `(u, r, v) -> (π(u), r, π(v))`.
pub fn apply_node_perm(a: &Multigraph, pi: &Perm) -> Result<Multigraph> {
    if pi.len() != a.num_nodes() {
        return Err(Error::contract("node permutation size differs from N"));
    }
    Multigraph::new(
        a.num_nodes(),
        a.num_relations(),
        a.triplets()
            .iter()
            .map(|t| Triplet::new(pi.apply(t.head), t.rel, pi.apply(t.tail))),
    )
}

/// Relabels relation types: `(u, r, v) -> (u, σ(r), v)`.
pub fn apply_relation_perm(a: &Multigraph, sigma: &Perm) -> Result<Multigraph> {
    if sigma.len() != a.num_relations() {
        return Err(Error::contract("relation permutation size differs from R"));
    }
    a.relabel_relations(sigma.as_slice())
}

/// The joint action `σ ∘ π ∘ A`.
pub fn apply_perms(a: &Multigraph, pi: &Perm, sigma: &Perm) -> Result<Multigraph> {
    apply_relation_perm(&apply_node_perm(a, pi)?, sigma)
}

/// True iff applying the node and relation actions in either order agrees.
pub fn perms_commute_check(a: &Multigraph, pi: &Perm, sigma: &Perm) -> Result<bool> {
    let node_first = apply_relation_perm(&apply_node_perm(a, pi)?, sigma)?;
    let rel_first = apply_node_perm(&apply_relation_perm(a, sigma)?, pi)?;
    Ok(node_first == rel_first)
}
