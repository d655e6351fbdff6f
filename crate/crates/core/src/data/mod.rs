//! Family-tree generation, a synthetic two-task family, split files and
//! negative sampling.

mod family;
mod metafam;
mod negatives;
pub mod ontology;
mod split;
mod synthetic;

pub use family::{FamilyTree, Gender, MAX_CHILDREN, MAX_TREE_DEPTH, MAX_TREE_SIZE};
pub use metafam::{
    distinct_trees, metafam_generate, write_metafam, MaskMode, MetaFam, MetaFamConfig,
    MASK_RATE, VALID_FRACTION,
};
pub use negatives::{
    corrupt_relation, corrupt_tail, sample_negatives, self_supervised_split, NegativeBatch,
};
pub use ontology::{kinship_closure, KinshipOntology, NUM_RELATIONS, RELATION_NAMES};
pub use synthetic::{two_task_graph, TwoTaskConfig, TwoTaskGraph};
pub use split::{
    load_split, missing_file, observable_file, save_split, stats_table, write_ontology,
    DatasetSplit, SplitRole,
};
