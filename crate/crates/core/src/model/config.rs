use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How GIN layers pool a node's neighborhood within one relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Mean,
    Sum,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            _ => Err(Error::Config(format!("unknown aggregation `{s}`"))),
        }
    }
}

/// Whether the L1/L2/L3 blocks of a layer pass messages or act row-wise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Gin,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_gnn_layers: usize,
    pub num_mlp_layers: usize,
    /// Upper bound K̂ on the number of relational tasks.
    pub max_tasks: usize,
    pub aggregation: Aggregation,
    /// Collapse all relations into one before message passing, so scores
    /// ignore the relation type.
    pub homogeneous: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_dim: 32,
            num_gnn_layers: 2,
            num_mlp_layers: 2,
            max_tasks: 2,
            aggregation: Aggregation::Mean,
            homogeneous: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.max_tasks == 0 {
            return Err(Error::Config("hidden_dim and max_tasks must be at least 1".into()));
        }
        if self.num_gnn_layers == 0 || self.num_mlp_layers == 0 {
            return Err(Error::Config("layer counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn layer_kinds(&self) -> impl Iterator<Item = LayerKind> {
        std::iter::repeat(LayerKind::Gin)
            .take(self.num_gnn_layers)
            .chain(std::iter::repeat(LayerKind::Mlp).take(self.num_mlp_layers))
    }

    /// `key=value` lines, in a fixed order, as stored in checkpoints.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model.hidden_dim", self.hidden_dim.to_string()),
            ("model.num_gnn_layers", self.num_gnn_layers.to_string()),
            ("model.num_mlp_layers", self.num_mlp_layers.to_string()),
            ("model.max_tasks", self.max_tasks.to_string()),
            ("model.aggregation", self.aggregation.to_string()),
            ("model.homogeneous", self.homogeneous.to_string()),
        ]
    }

    /// Sets one `model.*` key. Returns `Ok(false)` if the key is not a model key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let bad = |e: &dyn fmt::Display| Error::Config(format!("{key}: {e}"));
        match key {
            "model.hidden_dim" => self.hidden_dim = value.parse().map_err(|e| bad(&e))?,
            "model.num_gnn_layers" => self.num_gnn_layers = value.parse().map_err(|e| bad(&e))?,
            "model.num_mlp_layers" => self.num_mlp_layers = value.parse().map_err(|e| bad(&e))?,
            "model.max_tasks" => self.max_tasks = value.parse().map_err(|e| bad(&e))?,
            "model.aggregation" => self.aggregation = value.parse()?,
            "model.homogeneous" => self.homogeneous = value.parse().map_err(|e| bad(&e))?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
