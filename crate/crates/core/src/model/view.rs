use std::sync::Arc;

use super::config::Aggregation;
use crate::error::{Error, Result};
use crate::graph::{Multigraph, NodeId, Triplet};
use crate::numeric::SparseRows;

/// The message-passing structure the model runs on: per relation, each
/// node's neighbors with edge direction ignored. A merged view collapses all
/// relations into one.
#[derive(Clone, Debug)]
pub struct GraphView {
    num_nodes: usize,
    num_relations: usize,
    merged: bool,
    aggregation: Aggregation,
    /// `neighbors[r][v]`, sorted and unique.
    neighbors: Vec<Vec<Vec<NodeId>>>,
    /// Block-diagonal aggregation operator over the stacked `[R*N, d]`
    /// relation states.
    operator: Arc<SparseRows>,
}

impl GraphView {
    pub fn new(graph: &Multigraph, aggregation: Aggregation) -> Self {
        Self::build(graph.num_nodes(), graph.num_relations(), graph.triplets(), false, aggregation)
    }

    /// Single-relation view of `graph` with all relation types merged.
    pub fn merged(graph: &Multigraph, aggregation: Aggregation) -> Self {
        Self::build(graph.num_nodes(), 1, graph.triplets(), true, aggregation)
    }

    pub fn for_model(graph: &Multigraph, homogeneous: bool, aggregation: Aggregation) -> Self {
        if homogeneous {
            Self::merged(graph, aggregation)
        } else {
            Self::new(graph, aggregation)
        }
    }

    fn build(n: usize, r: usize, triplets: &[Triplet], merged: bool, aggregation: Aggregation) -> Self {
        let mut neighbors = vec![vec![Vec::new(); n]; r];
        for t in triplets {
            let rel = if merged { 0 } else { t.rel };
            neighbors[rel][t.head].push(t.tail);
            neighbors[rel][t.tail].push(t.head);
        }
        for per_rel in &mut neighbors {
            for list in per_rel.iter_mut() {
                list.sort_unstable();
                list.dedup();
            }
        }
        let mut rows = Vec::with_capacity(n * r);
        for (rel, per_rel) in neighbors.iter().enumerate() {
            for list in per_rel {
                let w = match aggregation {
                    Aggregation::Mean => 1.0 / list.len() as f64,
                    Aggregation::Sum => 1.0,
                };
                rows.push(list.iter().map(|&u| (rel * n + u, w)).collect());
            }
        }
        GraphView {
            num_nodes: n,
            num_relations: r,
            merged,
            aggregation,
            neighbors,
            operator: Arc::new(SparseRows::from_rows(n * r, rows)),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Relations in the view (1 when merged).
    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn is_merged(&self) -> bool {
        self.merged
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn neighbors(&self, rel: usize, v: NodeId) -> &[NodeId] {
        &self.neighbors[rel][v]
    }

    pub(crate) fn operator(&self) -> &Arc<SparseRows> {
        &self.operator
    }

    /// Row of the stacked state holding `node` for relation `rel`.
    pub fn state_row(&self, rel: usize, node: NodeId) -> usize {
        let r = if self.merged { 0 } else { rel };
        r * self.num_nodes + node
    }

    pub(crate) fn check_triplet(&self, t: &Triplet, graph_relations: Option<usize>) -> Result<()> {
        let rel_ok = self.merged || t.rel < self.num_relations;
        let bound_ok = graph_relations.map_or(true, |r| t.rel < r);
        if t.head >= self.num_nodes || t.tail >= self.num_nodes || !rel_ok || !bound_ok {
            return Err(Error::contract(format!("triplet {t:?} out of range")));
        }
        Ok(())
    }
}
