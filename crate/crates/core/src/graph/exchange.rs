//! Brute-force relation exchangeability on explicit finite distributions.
//!
//! Two relation types `r`, `r'` are exchangeable under a distribution `P`
//! when some node permutation `π` and relation permutation `σ` with
//! `σ(r) = r'` leave `P` invariant. On a finite support this is decided by
//! enumerating `S_N × S_R` and comparing pushforwards exactly.

use std::collections::BTreeMap;

use itertools::Itertools;

use super::multigraph::{Multigraph, RelId, Triplet};
use crate::error::{Error, Result};

pub const MAX_ORACLE_NODES: usize = 6;
pub const MAX_ORACLE_RELATIONS: usize = 4;
const PROB_TOL: f64 = 1e-12;

/// A finite distribution over graphs sharing `N` and `R`.
#[derive(Clone, Debug)]
pub struct EmpiricalDistribution {
    num_nodes: usize,
    num_relations: usize,
    support: Vec<(Multigraph, f64)>,
}

impl EmpiricalDistribution {
    pub fn new(support: Vec<(Multigraph, f64)>) -> Result<Self> {
        let Some((first, _)) = support.first() else {
            return Err(Error::contract("empty distribution support"));
        };
        let (n, r) = (first.num_nodes(), first.num_relations());
        if support
            .iter()
            .any(|(g, _)| g.num_nodes() != n || g.num_relations() != r)
        {
            return Err(Error::contract("support graphs differ in N or R"));
        }
        if support.iter().any(|(_, p)| !(*p > 0.0)) {
            return Err(Error::contract("probabilities must be positive"));
        }
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::contract(format!("probabilities sum to {total}")));
        }
        Ok(EmpiricalDistribution {
            num_nodes: n,
            num_relations: r,
            support,
        })
    }

    /// Uniform over the given graphs (repeats count with multiplicity).
    pub fn uniform(graphs: Vec<Multigraph>) -> Result<Self> {
        let p = 1.0 / graphs.len().max(1) as f64;
        let k = graphs.len();
        let mut support: Vec<(Multigraph, f64)> = graphs.into_iter().map(|g| (g, p)).collect();
        // Absorb rounding so the total is exactly representable as 1.
        if k > 0 {
            let rest: f64 = support[1..].iter().map(|(_, p)| p).sum();
            support[0].1 = 1.0 - rest;
        }
        EmpiricalDistribution::new(support)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn support(&self) -> &[(Multigraph, f64)] {
        &self.support
    }

    fn canonical(&self) -> BTreeMap<Vec<Triplet>, f64> {
        let mut m = BTreeMap::new();
        for (g, p) in &self.support {
            *m.entry(g.triplets().to_vec()).or_insert(0.0) += p;
        }
        m
    }

    fn check_capacity(&self) -> Result<()> {
        if self.num_nodes > MAX_ORACLE_NODES || self.num_relations > MAX_ORACLE_RELATIONS {
            return Err(Error::Capacity(format!(
                "exchangeability oracle limited to N <= {MAX_ORACLE_NODES}, R <= {MAX_ORACLE_RELATIONS} (got N={}, R={})",
                self.num_nodes, self.num_relations
            )));
        }
        Ok(())
    }
}

/// Assignment of relation types to task indices `0..K`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaskPartition {
    assignment: Vec<usize>,
    num_tasks: usize,
}

impl TaskPartition {
    /// Every relation gets exactly one task and every task index in
    /// `0..num_tasks` must be used.
    pub fn new(assignment: Vec<usize>, num_tasks: usize) -> Result<Self> {
        let mut used = vec![false; num_tasks];
        for &k in &assignment {
            if k >= num_tasks {
                return Err(Error::contract(format!("task {k} >= K={num_tasks}")));
            }
            used[k] = true;
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(Error::contract(format!("task {k} has no relation")));
        }
        Ok(TaskPartition {
            assignment,
            num_tasks,
        })
    }

    pub fn single(num_relations: usize) -> Self {
        TaskPartition {
            assignment: vec![0; num_relations],
            num_tasks: 1,
        }
    }

    pub fn task_of(&self, r: RelId) -> usize {
        self.assignment[r]
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn num_relations(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, k: usize) -> impl Iterator<Item = RelId> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t == k)
            .map(|(r, _)| r)
    }

    /// Relation classes as sorted member lists, ordered by smallest member.
    pub fn classes(&self) -> Vec<Vec<RelId>> {
        let mut classes: Vec<Vec<RelId>> = (0..self.num_tasks).map(|k| self.members(k).collect()).collect();
        classes.sort();
        classes
    }
}

/// Decides whether `r` and `r2` are exchangeable under `dist`.
pub fn exchangeable_bruteforce(dist: &EmpiricalDistribution, r: RelId, r2: RelId) -> Result<bool> {
    dist.check_capacity()?;
    let rn = dist.num_relations;
    if r >= rn || r2 >= rn {
        return Err(Error::contract("relation id out of range"));
    }
    let target = dist.canonical();
    let n = dist.num_nodes;

    for sigma in (0..rn).permutations(rn).filter(|s| s[r] == r2) {
        for pi in (0..n).permutations(n) {
            if pushforward_matches(&target, &pi, &sigma) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn pushforward_matches(target: &BTreeMap<Vec<Triplet>, f64>, pi: &[usize], sigma: &[usize]) -> bool {
    let mut pushed: BTreeMap<Vec<Triplet>, f64> = BTreeMap::new();
    for (ts, p) in target {
        let mut mapped: Vec<Triplet> = ts
            .iter()
            .map(|t| Triplet::new(pi[t.head], sigma[t.rel], pi[t.tail]))
            .collect();
        mapped.sort_unstable();
        match target.get(&mapped) {
            // Early exit: the image must land inside the support.
            None => return false,
            Some(_) => *pushed.entry(mapped).or_insert(0.0) += p,
        }
    }
    pushed.len() == target.len()
        && pushed
            .iter()
            .zip(target)
            .all(|((ka, pa), (kb, pb))| ka == kb && (pa - pb).abs() <= PROB_TOL)
}

/// Partitions relations into exchangeability classes, indexed in order of
/// their smallest member.
pub fn relational_tasks(dist: &EmpiricalDistribution) -> Result<TaskPartition> {
    dist.check_capacity()?;
    let rn = dist.num_relations;
    let mut assignment: Vec<Option<usize>> = vec![None; rn];
    let mut k = 0;
    for r in 0..rn {
        if assignment[r].is_some() {
            continue;
        }
        assignment[r] = Some(k);
        for r2 in r + 1..rn {
            if assignment[r2].is_none() && exchangeable_bruteforce(dist, r, r2)? {
                assignment[r2] = Some(k);
            }
        }
        k += 1;
    }
    TaskPartition::new(assignment.into_iter().map(Option::unwrap).collect(), k)
}
