//! Synthetic multi-task family-tree dataset.
//!
//! Training trees hide half of either their `{mother_of, father_of}` or their
//! `{son_of, daughter_of}` triplets (one coin flip per tree), so the targets
//! follow two conflicting predictive patterns. Test trees use a random
//! relabeling of the relation ids and hide only (relabeled) parent
//! triplets. Validation holds out 20% of the training trees whole.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::family::FamilyTree;
use super::ontology::{
    kinship_closure, DAUGHTER_OF, FATHER_OF, MOTHER_OF, NUM_RELATIONS, RELATION_NAMES, SON_OF,
};
use super::split::{save_split, stats_table, write_ontology, DatasetSplit, SplitRole};
use crate::error::{Error, Result};
use crate::graph::{Multigraph, Perm, RelId, Triplet};
use crate::rng::substream;

pub const VALID_FRACTION: f64 = 0.2;
pub const MASK_RATE: f64 = 0.5;
const MAX_ATTEMPTS_PER_TREE: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskMode {
    /// Hide `mother_of` / `father_of` triplets.
    Parents,
    /// Hide `son_of` / `daughter_of` triplets.
    Children,
}

impl MaskMode {
    pub fn relations(self) -> [RelId; 2] {
        match self {
            MaskMode::Parents => [MOTHER_OF, FATHER_OF],
            MaskMode::Children => [SON_OF, DAUGHTER_OF],
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetaFam {
    pub train: DatasetSplit,
    pub valid: DatasetSplit,
    pub test: DatasetSplit,
    /// `test_relations.apply(train_id)` is the id the same relation carries
    /// in the test split.
    pub test_relations: Perm,
    /// Masking mode of each training-split tree, in node-block order.
    pub train_modes: Vec<MaskMode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetaFamConfig {
    pub seed: u64,
    /// Trees generated for training; `VALID_FRACTION` of them become validation.
    pub n_train_trees: usize,
    pub n_test_trees: usize,
}

impl Default for MetaFamConfig {
    fn default() -> Self {
        MetaFamConfig {
            seed: 0,
            n_train_trees: 50,
            n_test_trees: 25,
        }
    }
}

/// Draws `count` pairwise non-isomorphic trees.
pub fn distinct_trees<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<Vec<FamilyTree>> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let budget = count.saturating_mul(MAX_ATTEMPTS_PER_TREE);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == budget {
            return Err(Error::Generation(format!(
                "only {} of {count} non-isomorphic trees after {budget} attempts",
                out.len()
            )));
        }
        attempts += 1;
        let t = FamilyTree::grow(rng);
        if seen.insert(t.canonical_form()) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Hides `ceil(MASK_RATE * k)` of the `k` triplets carrying the mode's
/// relations.
fn mask_tree<R: Rng + ?Sized>(
    graph: &Multigraph,
    mode: MaskMode,
    rng: &mut R,
) -> (Vec<Triplet>, Vec<Triplet>) {
    let rels = mode.relations();
    let mut eligible: Vec<Triplet> = graph
        .triplets()
        .iter()
        .filter(|t| rels.contains(&t.rel))
        .copied()
        .collect();
    eligible.shuffle(rng);
    let k = (MASK_RATE * eligible.len() as f64).ceil() as usize;
    let hidden: BTreeSet<Triplet> = eligible.into_iter().take(k).collect();
    graph.triplets().iter().partition(|t| !hidden.contains(t))
}

struct Assembled {
    observable: Vec<Triplet>,
    missing: Vec<Triplet>,
    nodes: usize,
}

fn assemble<R: Rng + ?Sized>(trees: &[FamilyTree], modes: &[MaskMode], rng: &mut R) -> Assembled {
    let mut a = Assembled {
        observable: Vec::new(),
        missing: Vec::new(),
        nodes: 0,
    };
    for (tree, &mode) in trees.iter().zip(modes) {
        let g = kinship_closure(tree);
        let (obs, hid) = mask_tree(&g, mode, rng);
        let shift = |t: &Triplet| Triplet::new(t.head + a.nodes, t.rel, t.tail + a.nodes);
        a.observable.extend(obs.iter().map(shift));
        a.missing.extend(hid.iter().map(shift));
        a.nodes += tree.len();
    }
    a
}

fn to_split(role: SplitRole, a: Assembled, relabel: &[RelId]) -> Result<DatasetSplit> {
    let map = |v: Vec<Triplet>| v.into_iter().map(|t| Triplet::new(t.head, relabel[t.rel], t.tail));
    DatasetSplit::new(
        role,
        Multigraph::new(a.nodes, NUM_RELATIONS, map(a.observable))?,
        Multigraph::new(a.nodes, NUM_RELATIONS, map(a.missing))?,
    )
}

pub fn metafam_generate(cfg: &MetaFamConfig) -> Result<MetaFam> {
    if cfg.n_train_trees < 2 || cfg.n_test_trees < 1 {
        return Err(Error::contract("need at least 2 training trees and 1 test tree"));
    }
    let mut tree_rng = substream(cfg.seed, "metafam.trees");
    let trees = distinct_trees(cfg.n_train_trees + cfg.n_test_trees, &mut tree_rng)?;
    let (train_pool, test_trees) = trees.split_at(cfg.n_train_trees);

    let n_valid = ((VALID_FRACTION * cfg.n_train_trees as f64).round() as usize)
        .clamp(1, cfg.n_train_trees - 1);
    let (train_trees, valid_trees) = train_pool.split_at(cfg.n_train_trees - n_valid);

    let mut mode_rng = substream(cfg.seed, "metafam.modes");
    let mut modes: Vec<MaskMode> = (0..cfg.n_train_trees)
        .map(|_| {
            if mode_rng.gen_bool(0.5) {
                MaskMode::Parents
            } else {
                MaskMode::Children
            }
        })
        .collect();
    // Both patterns must be present among the trees actually trained on.
    let n_train = train_trees.len();
    if n_train >= 2 {
        for want in [MaskMode::Parents, MaskMode::Children] {
            if !modes[..n_train].contains(&want) {
                let other = if modes[0] == want { 1 } else { 0 };
                modes[other] = want;
            }
        }
    }

    let mut mask_rng = substream(cfg.seed, "metafam.masks");
    let identity: Vec<RelId> = (0..NUM_RELATIONS).collect();
    let train = to_split(
        SplitRole::Train,
        assemble(train_trees, &modes[..n_train], &mut mask_rng),
        &identity,
    )?;
    let valid = to_split(
        SplitRole::Valid,
        assemble(valid_trees, &modes[n_train..], &mut mask_rng),
        &identity,
    )?;

    let test_relations = Perm::random(NUM_RELATIONS, &mut substream(cfg.seed, "metafam.relabel"));
    let test_modes = vec![MaskMode::Parents; test_trees.len()];
    let test = to_split(
        SplitRole::Test,
        assemble(test_trees, &test_modes, &mut mask_rng),
        test_relations.as_slice(),
    )?;

    Ok(MetaFam {
        train,
        valid,
        test,
        test_relations,
        train_modes: modes[..n_train].to_vec(),
    })
}

/// Writes all splits, `ontology.txt` (training relation names in id order)
/// and `stats.tsv` into `dir`, which must exist.
pub fn write_metafam(data: &MetaFam, dir: &Path) -> Result<()> {
    for split in [&data.train, &data.valid, &data.test] {
        save_split(split, dir)?;
    }
    write_ontology(&RELATION_NAMES, dir)?;
    fs::write(
        dir.join("stats.tsv"),
        stats_table(&[&data.train, &data.valid, &data.test]),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> MetaFam {
        metafam_generate(&MetaFamConfig {
            seed,
            n_train_trees: 10,
            n_test_trees: 4,
        })
        .unwrap()
    }

    #[test]
    fn all_splits_have_29_relations() {
        let d = small(1);
        for s in [&d.train, &d.valid, &d.test] {
            assert_eq!(s.num_relations(), 29);
            assert!(!s.missing().is_empty());
        }
        assert_eq!(d.train.num_nodes(), 8 * 26);
        assert_eq!(d.valid.num_nodes(), 2 * 26);
        assert_eq!(d.test.num_nodes(), 4 * 26);
    }

    #[test]
    fn test_targets_are_permuted_parent_relations() {
        let d = small(2);
        let allowed = [
            d.test_relations.apply(MOTHER_OF),
            d.test_relations.apply(FATHER_OF),
        ];
        assert!(d.test.missing().triplets().iter().all(|t| allowed.contains(&t.rel)));
    }

    #[test]
    fn training_targets_follow_tree_modes() {
        let d = small(3);
        for t in d.train.missing().triplets() {
            let mode = d.train_modes[t.head / 26];
            assert!(mode.relations().contains(&t.rel));
        }
        assert!(d.train_modes.contains(&MaskMode::Parents));
        assert!(d.train_modes.contains(&MaskMode::Children));
    }

    #[test]
    fn same_seed_is_identical() {
        let (a, b) = (small(4), small(4));
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.test_relations, b.test_relations);
    }

    #[test]
    fn half_of_mode_triplets_are_hidden_per_tree() {
        let d = small(5);
        let mode_rels = |m: MaskMode| m.relations();
        for (i, &m) in d.train_modes.iter().enumerate() {
            let in_tree = |t: &&Triplet| t.head / 26 == i && mode_rels(m).contains(&t.rel);
            let hidden = d.train.missing().triplets().iter().filter(in_tree).count();
            let kept = d.train.observable().triplets().iter().filter(in_tree).count();
            // 25 non-root persons each have exactly one parent link.
            assert_eq!(hidden + kept, 25);
            assert_eq!(hidden, 13);
        }
    }
}
