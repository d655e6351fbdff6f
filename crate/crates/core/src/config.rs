//! Flat `key = value` run configuration covering the model, training and
//! loss settings. Lines starting with `#` are comments.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

impl RunConfig {
    /// Settings for the MetaFam experiment: a single GIN layer.
    pub fn metafam() -> Self {
        let mut cfg = RunConfig::default();
        cfg.model.num_gnn_layers = 1;
        cfg
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let l = &t.loss;
        let mut v = self.model.to_pairs();
        v.extend([
            ("train.batch_positives", t.batch_positives.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.weight_decay", t.weight_decay.to_string()),
            ("train.clip_norm", t.clip_norm.to_string()),
            ("train.max_epochs", t.max_epochs.to_string()),
            ("train.patience", t.patience.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.adapt_epochs", t.adapt_epochs.to_string()),
            ("train.adapt_holdout_fraction", t.adapt_holdout_fraction.to_string()),
            ("loss.n_tail", l.n_tail.to_string()),
            ("loss.n_rel", l.n_rel.to_string()),
            ("loss.lambda1", l.lambda1.to_string()),
            ("loss.lambda2", l.lambda2.to_string()),
            ("loss.anneal", l.anneal.to_string()),
        ]);
        v
    }

    pub fn loss(&self) -> &LossConfig {
        &self.train.loss
    }

    pub fn keys() -> Vec<&'static str> {
        RunConfig::default().pairs().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one dotted key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? {
            return Ok(());
        }
        let t = &mut self.train;
        match key {
            "train.batch_positives" => t.batch_positives = parse(key, value)?,
            "train.lr" => t.lr = parse(key, value)?,
            "train.weight_decay" => t.weight_decay = parse(key, value)?,
            "train.clip_norm" => t.clip_norm = parse(key, value)?,
            "train.max_epochs" => t.max_epochs = parse(key, value)?,
            "train.patience" => t.patience = parse(key, value)?,
            "train.seed" => t.seed = parse(key, value)?,
            "train.adapt_epochs" => t.adapt_epochs = parse(key, value)?,
            "train.adapt_holdout_fraction" => t.adapt_holdout_fraction = parse(key, value)?,
            "loss.n_tail" => t.loss.n_tail = parse(key, value)?,
            "loss.n_rel" => t.loss.n_rel = parse(key, value)?,
            "loss.lambda1" => t.loss.lambda1 = parse(key, value)?,
            "loss.lambda2" => t.loss.lambda2 = parse(key, value)?,
            "loss.anneal" => t.loss.anneal = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            self.set(k.trim(), v.trim()).map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_text(&fs::read_to_string(path)?, path)
    }

    pub fn to_text(&self) -> String {
        self.pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

impl From<(ModelConfig, TrainConfig)> for RunConfig {
    fn from((model, train): (ModelConfig, TrainConfig)) -> Self {
        RunConfig { model, train }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::metafam();
        cfg.set("train.lr", "0.005").unwrap();
        cfg.set("model.max_tasks", "6").unwrap();
        let back = RunConfig::from_text(&cfg.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let e = RunConfig::from_text("# c\ntrain.lr = 0.1\nmodel.depth = 3\n", Path::new("run.conf")).unwrap_err();
        assert!(e.to_string().starts_with("run.conf:3:"), "{e}");
        assert!(RunConfig::default().set("nope", "1").is_err());
    }

    #[test]
    fn every_listed_key_is_settable() {
        let mut cfg = RunConfig::default();
        for (k, v) in RunConfig::default().pairs() {
            cfg.set(k, &v).unwrap();
        }
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.model.hidden_dim, 32);
        assert_eq!(c.train.batch_positives, 256);
        assert_eq!(c.train.lr, 1e-3);
        assert_eq!(c.train.weight_decay, 5e-4);
        assert_eq!(c.train.clip_norm, 1.0);
        assert_eq!((c.train.max_epochs, c.train.patience), (10, 5));
        assert_eq!((c.loss().n_tail, c.loss().n_rel), (2, 2));
        assert_eq!(c.loss().anneal, 1.1);
    }
}
