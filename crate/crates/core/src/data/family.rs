use rand::Rng;

use crate::error::{Error, Result};

pub const MAX_TREE_SIZE: usize = 26;
pub const MAX_TREE_DEPTH: usize = 5;
pub const MAX_CHILDREN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.gen_bool(0.5) {
            Gender::Female
        } else {
            Gender::Male
        }
    }
}

/// A single-rooted family tree: person 0 is the root and every other person
/// has exactly one parent with a smaller index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyTree {
    genders: Vec<Gender>,
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl FamilyTree {
    /// Checks the shape limits (size, depth counted in generations, branching)
    /// and that the tree is connected under root 0.
    pub fn from_parents(genders: Vec<Gender>, parents: Vec<Option<usize>>) -> Result<Self> {
        let n = genders.len();
        if n < 2 || n > MAX_TREE_SIZE || parents.len() != n {
            return Err(Error::contract(format!(
                "family tree must have 2..={MAX_TREE_SIZE} persons with one parent slot each"
            )));
        }
        if parents[0].is_some() {
            return Err(Error::contract("person 0 must be the root"));
        }
        let mut children = vec![Vec::new(); n];
        for (c, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < c => children[*p].push(c),
                _ => return Err(Error::contract(format!("person {c} needs an earlier parent"))),
            }
        }
        let tree = FamilyTree {
            genders,
            parents,
            children,
        };
        if tree.children.iter().any(|c| c.len() > MAX_CHILDREN) {
            return Err(Error::contract("branching factor above limit"));
        }
        if tree.depth() > MAX_TREE_DEPTH {
            return Err(Error::contract("tree deeper than limit"));
        }
        Ok(tree)
    }

    /// Grows a tree from a single person by attaching children to uniformly
    /// chosen eligible persons (fewer than `MAX_CHILDREN` children, not in
    /// the last allowed generation) until it has `MAX_TREE_SIZE` persons.
    pub fn grow<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut genders = vec![Gender::random(rng)];
        let mut parents = vec![None];
        let mut level = vec![1usize];
        let mut n_children = vec![0usize];
        while genders.len() < MAX_TREE_SIZE {
            let eligible: Vec<usize> = (0..genders.len())
                .filter(|&i| n_children[i] < MAX_CHILDREN && level[i] < MAX_TREE_DEPTH)
                .collect();
            let p = eligible[rng.gen_range(0..eligible.len())];
            genders.push(Gender::random(rng));
            parents.push(Some(p));
            level.push(level[p] + 1);
            n_children[p] += 1;
            n_children.push(0);
        }
        FamilyTree::from_parents(genders, parents).expect("growth respects limits")
    }

    pub fn len(&self) -> usize {
        self.genders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genders.is_empty()
    }

    pub fn gender(&self, i: usize) -> Gender {
        self.genders[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Number of generations (a lone root has depth 1).
    pub fn depth(&self) -> usize {
        let mut level = vec![1usize; self.len()];
        for i in 1..self.len() {
            level[i] = level[self.parents[i].unwrap()] + 1;
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn max_branching(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Canonical string of the gender-labelled rooted tree: equal strings iff
    /// the trees are isomorphic.
    pub fn canonical_form(&self) -> String {
        self.canon(0)
    }

    fn canon(&self, v: usize) -> String {
        let mut kids: Vec<String> = self.children[v].iter().map(|&c| self.canon(c)).collect();
        kids.sort();
        let tag = match self.genders[v] {
            Gender::Female => 'F',
            Gender::Male => 'M',
        };
        format!("({tag}{})", kids.concat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn grown_trees_respect_limits() {
        let mut rng = substream(3, "trees");
        for _ in 0..200 {
            let t = FamilyTree::grow(&mut rng);
            assert_eq!(t.len(), MAX_TREE_SIZE);
            assert!(t.depth() <= MAX_TREE_DEPTH);
            assert!(t.max_branching() <= MAX_CHILDREN);
        }
    }

    #[test]
    fn canonical_form_ignores_child_order() {
        use Gender::*;
        let a = FamilyTree::from_parents(vec![Female, Male, Female], vec![None, Some(0), Some(0)]).unwrap();
        let b = FamilyTree::from_parents(vec![Female, Female, Male], vec![None, Some(0), Some(0)]).unwrap();
        let c = FamilyTree::from_parents(vec![Female, Male, Female], vec![None, Some(0), Some(1)]).unwrap();
        assert_eq!(a.canonical_form(), b.canonical_form());
        assert_ne!(a.canonical_form(), c.canonical_form());
    }

    #[test]
    fn rejects_invalid_shapes() {
        use Gender::*;
        assert!(FamilyTree::from_parents(vec![Female], vec![None]).is_err());
        assert!(FamilyTree::from_parents(vec![Female, Male], vec![None, Some(1)]).is_err());
        let deep: Vec<Option<usize>> = (0..7).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
        assert!(FamilyTree::from_parents(vec![Male; 7], deep).is_err());
        let wide: Vec<Option<usize>> = (0..7).map(|i| if i == 0 { None } else { Some(0) }).collect();
        assert!(FamilyTree::from_parents(vec![Male; 7], wide).is_err());
    }
}
