use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type RelId = usize;

/// A directed typed edge `(head, rel, tail)`. Ordering is lexicographic in
/// that field order, which is also the canonical serialization order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triplet {
    pub head: NodeId,
    pub rel: RelId,
    pub tail: NodeId,
}

impl Triplet {
    pub const fn new(head: NodeId, rel: RelId, tail: NodeId) -> Self {
        Triplet { head, rel, tail }
    }
}

impl From<(NodeId, RelId, NodeId)> for Triplet {
    fn from((h, r, t): (NodeId, RelId, NodeId)) -> Self {
        Triplet::new(h, r, t)
    }
}

/// Attributed multigraph over `num_nodes` nodes and `num_relations` relation
/// types. Triplets are kept sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Multigraph {
    num_nodes: usize,
    num_relations: usize,
    triplets: Vec<Triplet>,
}

impl Multigraph {
    /// Validates ids and rejects duplicates. Requires `N >= 2` and `R >= 2`.
    pub fn new(
        num_nodes: usize,
        num_relations: usize,
        triplets: impl IntoIterator<Item = Triplet>,
    ) -> Result<Self> {
        if num_nodes < 2 || num_relations < 2 {
            return Err(Error::contract(format!(
                "multigraph needs N >= 2 and R >= 2, got N={num_nodes}, R={num_relations}"
            )));
        }
        let mut v: Vec<Triplet> = triplets.into_iter().collect();
        for t in &v {
            check_ids(t, num_nodes, num_relations)?;
        }
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::contract(format!("duplicate triplet {:?}", w[0])));
        }
        Ok(Multigraph {
            num_nodes,
            num_relations,
            triplets: v,
        })
    }

    /// Builds from an already duplicate-free set.
    pub fn from_set(num_nodes: usize, num_relations: usize, set: BTreeSet<Triplet>) -> Result<Self> {
        Multigraph::new(num_nodes, num_relations, set)
    }

    pub fn empty(num_nodes: usize, num_relations: usize) -> Result<Self> {
        Multigraph::new(num_nodes, num_relations, [])
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn contains(&self, t: &Triplet) -> bool {
        self.triplets.binary_search(t).is_ok()
    }

    pub fn triplet_set(&self) -> BTreeSet<Triplet> {
        self.triplets.iter().copied().collect()
    }

    /// Edges of one relation as `(head, tail)` pairs.
    pub fn edges_of(&self, rel: RelId) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.triplets
            .iter()
            .filter(move |t| t.rel == rel)
            .map(|t| (t.head, t.tail))
    }

    /// Same graph with relation ids rewritten through `map` (`map[old] = new`).
    pub fn relabel_relations(&self, map: &[RelId]) -> Result<Multigraph> {
        if map.len() != self.num_relations {
            return Err(Error::contract("relation relabeling has the wrong size"));
        }
        Multigraph::new(
            self.num_nodes,
            self.num_relations,
            self.triplets
                .iter()
                .map(|t| Triplet::new(t.head, map[t.rel], t.tail)),
        )
    }
}

pub(crate) fn check_ids(t: &Triplet, n: usize, r: usize) -> Result<()> {
    if t.head >= n || t.tail >= n || t.rel >= r {
        return Err(Error::contract(format!(
            "triplet {t:?} out of range for N={n}, R={r}"
        )));
    }
    Ok(())
}

/// Triplets hidden from the observable graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletMask {
    pub hidden: BTreeSet<Triplet>,
}

impl TripletMask {
    pub fn new(hidden: impl IntoIterator<Item = Triplet>) -> Self {
        TripletMask {
            hidden: hidden.into_iter().collect(),
        }
    }
}

/// Splits `graph` into `(observable, hidden)`; every masked triplet must be
/// present in the graph.
pub fn mask_split(graph: &Multigraph, mask: &TripletMask) -> Result<(Multigraph, Multigraph)> {
    if let Some(missing) = mask.hidden.iter().find(|t| !graph.contains(t)) {
        return Err(Error::contract(format!(
            "mask hides {missing:?}, which is not in the graph"
        )));
    }
    let (hidden, observable): (Vec<Triplet>, Vec<Triplet>) = graph
        .triplets
        .iter()
        .partition(|t| mask.hidden.contains(t));
    let with = |triplets| Multigraph {
        num_nodes: graph.num_nodes,
        num_relations: graph.num_relations,
        triplets,
    };
    Ok((with(observable), with(hidden)))
}
