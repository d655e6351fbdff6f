use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{io, Multigraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitRole {
    Train,
    Valid,
    Test,
}

impl SplitRole {
    pub const ALL: [SplitRole; 3] = [SplitRole::Train, SplitRole::Valid, SplitRole::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Valid => "valid",
            SplitRole::Test => "test",
        }
    }
}

impl fmt::Display for SplitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitRole {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SplitRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown split `{s}`")))
    }
}

/// Observable context graph plus the missing triplets to predict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    role: SplitRole,
    observable: Multigraph,
    missing: Multigraph,
}

impl DatasetSplit {
    pub fn new(role: SplitRole, observable: Multigraph, missing: Multigraph) -> Result<Self> {
        if observable.num_nodes() != missing.num_nodes()
            || observable.num_relations() != missing.num_relations()
        {
            return Err(Error::contract("observable and missing graphs differ in N or R"));
        }
        if let Some(t) = missing.triplets().iter().find(|t| observable.contains(t)) {
            return Err(Error::contract(format!("{t:?} is both observable and missing")));
        }
        Ok(DatasetSplit {
            role,
            observable,
            missing,
        })
    }

    pub fn role(&self) -> SplitRole {
        self.role
    }

    pub fn observable(&self) -> &Multigraph {
        &self.observable
    }

    pub fn missing(&self) -> &Multigraph {
        &self.missing
    }

    pub fn num_nodes(&self) -> usize {
        self.observable.num_nodes()
    }

    pub fn num_relations(&self) -> usize {
        self.observable.num_relations()
    }
}

pub fn observable_file(role: SplitRole) -> String {
    format!("{role}_observable.tsv")
}

pub fn missing_file(role: SplitRole) -> String {
    format!("{role}_missing.tsv")
}

/// Writes `<role>_observable.tsv` and `<role>_missing.tsv` into `dir`.
pub fn save_split(split: &DatasetSplit, dir: &Path) -> Result<()> {
    io::write_tsv(&split.observable, &dir.join(observable_file(split.role)))?;
    io::write_tsv(&split.missing, &dir.join(missing_file(split.role)))
}

pub fn load_split(dir: &Path, role: SplitRole) -> Result<DatasetSplit> {
    let observable = io::read_tsv(&dir.join(observable_file(role)))?;
    let missing = io::read_tsv(&dir.join(missing_file(role)))?;
    DatasetSplit::new(role, observable, missing)
}

pub fn write_ontology(names: &[&str], dir: &Path) -> Result<()> {
    let mut s = String::new();
    for n in names {
        s.push_str(n);
        s.push('\n');
    }
    fs::write(dir.join("ontology.txt"), s)?;
    Ok(())
}

/// `split  entities  relations  observable  missing`, one row per split.
pub fn stats_table(splits: &[&DatasetSplit]) -> String {
    let mut s = String::from("split\tentities\trelations\tobservable\tmissing\n");
    for sp in splits {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            sp.role,
            sp.num_nodes(),
            sp.num_relations(),
            sp.observable.len(),
            sp.missing.len()
        ));
    }
    s
}
