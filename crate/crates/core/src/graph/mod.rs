//! Attributed multigraphs, permutation actions, masking and the brute-force
//! exchangeability oracle.

mod exchange;
pub mod io;
mod multigraph;
mod perm;

pub use exchange::{
    exchangeable_bruteforce, relational_tasks, EmpiricalDistribution, TaskPartition,
    MAX_ORACLE_NODES, MAX_ORACLE_RELATIONS,
};
pub use multigraph::{mask_split, Multigraph, NodeId, RelId, Triplet, TripletMask};
pub use perm::{apply_node_perm, apply_perms, apply_relation_perm, perms_commute_check, Perm};
