//! The fixed 29-relation kinship ontology and its derivation rules.
//!
//! Family trees here have a single parent per child and no spouses, so every
//! relation below is derivable from parent links plus the gender of the
//! *head* person. Direction convention: `(x, mother_of, y)` reads "x is the
//! mother of y"; `(x, son_of, y)` reads "x is the son of y".
//!
//! | id | name | holds when (x, y) |
//! |----|------|--------------------|
//! | 0–2 | mother_of / father_of / parent_of | x = parent(y) |
//! | 3–5 | son_of / daughter_of / child_of | y = parent(x) |
//! | 6–8 | sister_of / brother_of / sibling_of | same parent |
//! | 9–11 | grandmother_of / grandfather_of / grandparent_of | x = parent²(y) |
//! | 12–14 | granddaughter_of / grandson_of / grandchild_of | y = parent²(x) |
//! | 15–16 | greatgrandmother_of / greatgrandfather_of | x = parent³(y) |
//! | 17–18 | greatgranddaughter_of / greatgrandson_of | y = parent³(x) |
//! | 19–20 | aunt_of / uncle_of | x sibling of parent(y) |
//! | 21–22 | niece_of / nephew_of | y sibling of parent(x) |
//! | 23–25 | girl_cousin_of / boy_cousin_of / cousin_of | parents are siblings |
//! | 26–27 | greataunt_of / greatuncle_of | x sibling of parent²(y) |
//! | 28 | second_cousin_of | grandparents are siblings |

use std::collections::BTreeSet;

use super::family::{FamilyTree, Gender};
use crate::graph::{Multigraph, RelId, Triplet};

pub const NUM_RELATIONS: usize = 29;

pub const RELATION_NAMES: [&str; NUM_RELATIONS] = [
    "mother_of",
    "father_of",
    "parent_of",
    "son_of",
    "daughter_of",
    "child_of",
    "sister_of",
    "brother_of",
    "sibling_of",
    "grandmother_of",
    "grandfather_of",
    "grandparent_of",
    "granddaughter_of",
    "grandson_of",
    "grandchild_of",
    "greatgrandmother_of",
    "greatgrandfather_of",
    "greatgranddaughter_of",
    "greatgrandson_of",
    "aunt_of",
    "uncle_of",
    "niece_of",
    "nephew_of",
    "girl_cousin_of",
    "boy_cousin_of",
    "cousin_of",
    "greataunt_of",
    "greatuncle_of",
    "second_cousin_of",
];

pub const MOTHER_OF: RelId = 0;
pub const FATHER_OF: RelId = 1;
pub const PARENT_OF: RelId = 2;
pub const SON_OF: RelId = 3;
pub const DAUGHTER_OF: RelId = 4;
pub const CHILD_OF: RelId = 5;
pub const SISTER_OF: RelId = 6;
pub const BROTHER_OF: RelId = 7;
pub const SIBLING_OF: RelId = 8;
pub const GRANDMOTHER_OF: RelId = 9;
pub const GRANDFATHER_OF: RelId = 10;
pub const GRANDPARENT_OF: RelId = 11;
pub const GRANDDAUGHTER_OF: RelId = 12;
pub const GRANDSON_OF: RelId = 13;
pub const GRANDCHILD_OF: RelId = 14;
pub const GREATGRANDMOTHER_OF: RelId = 15;
pub const GREATGRANDFATHER_OF: RelId = 16;
pub const GREATGRANDDAUGHTER_OF: RelId = 17;
pub const GREATGRANDSON_OF: RelId = 18;
pub const AUNT_OF: RelId = 19;
pub const UNCLE_OF: RelId = 20;
pub const NIECE_OF: RelId = 21;
pub const NEPHEW_OF: RelId = 22;
pub const GIRL_COUSIN_OF: RelId = 23;
pub const BOY_COUSIN_OF: RelId = 24;
pub const COUSIN_OF: RelId = 25;
pub const GREATAUNT_OF: RelId = 26;
pub const GREATUNCLE_OF: RelId = 27;
pub const SECOND_COUSIN_OF: RelId = 28;

/// The ontology as a value, for callers that want names by id.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KinshipOntology;

impl KinshipOntology {
    pub fn num_relations(&self) -> usize {
        NUM_RELATIONS
    }

    pub fn name(&self, r: RelId) -> &'static str {
        RELATION_NAMES[r]
    }

    pub fn id(&self, name: &str) -> Option<RelId> {
        RELATION_NAMES.iter().position(|n| *n == name)
    }
}

fn by_gender(g: Gender, female: RelId, male: RelId) -> RelId {
    match g {
        Gender::Female => female,
        Gender::Male => male,
    }
}

/// Every ontology fact derivable from the tree, as a graph over the tree's
/// persons (node id = person index).
pub fn kinship_closure(tree: &FamilyTree) -> Multigraph {
    let n = tree.len();
    let up = |x: usize, k: usize| -> Option<usize> {
        let mut cur = Some(x);
        for _ in 0..k {
            cur = cur.and_then(|c| tree.parent(c));
        }
        cur
    };
    let mut out = BTreeSet::new();
    let mut emit = |x: usize, r: RelId, y: usize| {
        out.insert(Triplet::new(x, r, y));
    };

    for x in 0..n {
        let gx = tree.gender(x);
        let (p1x, p2x, p3x) = (up(x, 1), up(x, 2), up(x, 3));
        for y in 0..n {
            if x == y {
                continue;
            }
            let (p1y, p2y, p3y) = (up(y, 1), up(y, 2), up(y, 3));
            if p1y == Some(x) {
                emit(x, by_gender(gx, MOTHER_OF, FATHER_OF), y);
                emit(x, PARENT_OF, y);
            }
            if p1x == Some(y) {
                emit(x, by_gender(gx, DAUGHTER_OF, SON_OF), y);
                emit(x, CHILD_OF, y);
            }
            if p1x.is_some() && p1x == p1y {
                emit(x, by_gender(gx, SISTER_OF, BROTHER_OF), y);
                emit(x, SIBLING_OF, y);
            }
            if p2y == Some(x) {
                emit(x, by_gender(gx, GRANDMOTHER_OF, GRANDFATHER_OF), y);
                emit(x, GRANDPARENT_OF, y);
            }
            if p2x == Some(y) {
                emit(x, by_gender(gx, GRANDDAUGHTER_OF, GRANDSON_OF), y);
                emit(x, GRANDCHILD_OF, y);
            }
            if p3y == Some(x) {
                emit(x, by_gender(gx, GREATGRANDMOTHER_OF, GREATGRANDFATHER_OF), y);
            }
            if p3x == Some(y) {
                emit(x, by_gender(gx, GREATGRANDDAUGHTER_OF, GREATGRANDSON_OF), y);
            }
            if p1x.is_some() && p1x == p2y && Some(x) != p1y {
                emit(x, by_gender(gx, AUNT_OF, UNCLE_OF), y);
            }
            if p1y.is_some() && p1y == p2x && Some(y) != p1x {
                emit(x, by_gender(gx, NIECE_OF, NEPHEW_OF), y);
            }
            if p2x.is_some() && p2x == p2y && p1x != p1y {
                emit(x, by_gender(gx, GIRL_COUSIN_OF, BOY_COUSIN_OF), y);
                emit(x, COUSIN_OF, y);
            }
            if p1x.is_some() && p1x == p3y && Some(x) != p2y {
                emit(x, by_gender(gx, GREATAUNT_OF, GREATUNCLE_OF), y);
            }
            if p3x.is_some() && p3x == p3y && p2x != p2y {
                emit(x, SECOND_COUSIN_OF, y);
            }
        }
    }
    Multigraph::from_set(n, NUM_RELATIONS, out).expect("closure ids are in range by construction")
}
