//! A small two-task graph family with conflicting link patterns.
//!
//! Nodes split into a core half `S` and a fringe half `T`. Relations of
//! kind 0 link core to core; relations of kind 1 link core to fringe. A
//! tail that is right for one kind is wrong for the other, so a scorer has
//! to know which kind a relation belongs to.

use rand::seq::SliceRandom;
use rand::Rng;

use super::split::{DatasetSplit, SplitRole};
use crate::error::{Error, Result};
use crate::graph::{Multigraph, Perm, Triplet};
use crate::rng::substream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoTaskConfig {
    pub seed: u64,
    /// Nodes per half.
    pub half: usize,
    pub relations_per_kind: usize,
    pub edges_per_relation: usize,
    /// Fraction of each relation's edges that become missing targets.
    pub missing_fraction: f64,
}

impl Default for TwoTaskConfig {
    fn default() -> Self {
        TwoTaskConfig {
            seed: 0,
            half: 60,
            relations_per_kind: 3,
            edges_per_relation: 240,
            missing_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoTaskGraph {
    pub split: DatasetSplit,
    /// Kind (0 or 1) of every relation id.
    pub kinds: Vec<usize>,
}

/// Samples one graph. Relation ids are shuffled so kinds are not aligned
/// with id order.
pub fn two_task_graph(cfg: &TwoTaskConfig, role: SplitRole) -> Result<TwoTaskGraph> {
    let h = cfg.half;
    let per = cfg.relations_per_kind;
    if h < 2 || per == 0 || !(cfg.missing_fraction > 0.0 && cfg.missing_fraction < 1.0) {
        return Err(Error::Config("two-task graph needs half >= 2, relations and a fraction in (0, 1)".into()));
    }
    if cfg.edges_per_relation > h * (h - 1) {
        return Err(Error::Config("more edges requested than core pairs".into()));
    }
    let mut rng = substream(cfg.seed, "synthetic.two_task");
    let r = 2 * per;
    let perm = Perm::random(r, &mut rng);
    let mut kinds = vec![0; r];
    let (mut observable, mut missing) = (Vec::new(), Vec::new());
    for j in 0..r {
        let kind = usize::from(j >= per);
        let rel = perm.apply(j);
        kinds[rel] = kind;
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(cfg.edges_per_relation);
        while pairs.len() < cfg.edges_per_relation {
            let u = rng.gen_range(0..h);
            let v = if kind == 0 { rng.gen_range(0..h) } else { h + rng.gen_range(0..h) };
            if u != v && !pairs.contains(&(u, v)) {
                pairs.push((u, v));
            }
        }
        pairs.shuffle(&mut rng);
        let cut = ((cfg.missing_fraction * pairs.len() as f64).round() as usize).max(1);
        for (i, &(u, v)) in pairs.iter().enumerate() {
            let t = Triplet::new(u, rel, v);
            if i < cut {
                missing.push(t);
            } else {
                observable.push(t);
            }
        }
    }
    let split = DatasetSplit::new(role, Multigraph::new(2 * h, r, observable)?, Multigraph::new(2 * h, r, missing)?)?;
    Ok(TwoTaskGraph { split, kinds })
}
