//! Flat `key = value` run configuration covering model and training keys.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::error::{at_path, Error, Result};
use crate::models::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn keys_of<T: Serialize + Default>() -> BTreeSet<String> {
    Table::try_from(T::default()).map(|t| t.keys().cloned().collect()).unwrap_or_default()
}

fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| l.trim_start().strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('=')))
        .map_or(0, |i| i + 1)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Deserializes a group of keys; on failure, locates the offending key.
fn typed<T: DeserializeOwned>(table: Table, text: &str, path: &Path) -> Result<T> {
    match table.clone().try_into::<T>() {
        Ok(v) => Ok(v),
        Err(e) => {
            for (k, v) in table {
                let mut one = Table::new();
                one.insert(k.clone(), v);
                if let Err(e) = one.try_into::<T>() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_of_key(text, &k),
                        msg: format!("`{k}`: {}", e.to_string().trim()),
                    });
                }
            }
            Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: e.to_string(),
            })
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| line_of_offset(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let model_keys = keys_of::<ModelConfig>();
        let train_keys = keys_of::<TrainConfig>();
        let (mut model, mut train) = (Table::new(), Table::new());
        for (k, v) in table {
            if model_keys.contains(&k) {
                model.insert(k, v);
            } else if train_keys.contains(&k) {
                train.insert(k, v);
            } else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_of_key(text, &k),
                    msg: format!("unknown key `{k}`"),
                });
            }
        }
        let cfg = Self {
            model: typed(model, text, path)?,
            train: typed(train, text, path)?,
        };
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&at_path(path, std::fs::read_to_string(path))?, path)
    }

    /// Every key with its value, model keys first.
    pub fn to_toml(&self) -> String {
        let mut s = String::from("# model\n");
        s += &toml::to_string(&self.model).unwrap_or_default();
        s += "\n# training\n";
        s += &toml::to_string(&self.train).unwrap_or_default();
        s
    }
}

/// Keys whose values differ between two model configs, ignoring `except`.
pub fn config_diff(a: &ModelConfig, b: &ModelConfig, except: &[&str]) -> Vec<String> {
    let ta = Table::try_from(a).unwrap_or_default();
    let tb = Table::try_from(b).unwrap_or_default();
    ta.iter()
        .filter(|(k, v)| !except.contains(&k.as_str()) && tb.get(*k) != Some(*v))
        .map(|(k, v)| format!("{k}: {} vs {}", v, tb.get(k).map_or("missing".to_string(), Value::to_string)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AttnKind, NormName};
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("run.toml")
    }

    #[test]
    fn parses_flat_keys() {
        let text = "d_model = 16\nn_heads = 4\nattn_activation = \"sq-zrelu\"\nnorm_kind = \"mixed-ln\"\npretrain_lr = 0.003\noptimizer = \"radamw\"\n";
        let c = RunConfig::parse(text, &p()).unwrap();
        assert_eq!(c.model.d_model, 16);
        assert_eq!(c.model.attn_activation, AttnKind::SqZrelu);
        assert_eq!(c.model.norm_kind, NormName::MixedLn);
        assert_eq!(c.train.pretrain_lr, 0.003);
        assert_eq!(c.train.optimizer, crate::optim::OptimizerKind::RAdamW);
        assert_eq!(c.train.epochs, TrainConfig::default().epochs);
    }

    #[test]
    fn unknown_and_mistyped_keys_report_lines() {
        match RunConfig::parse("d_model = 16\n\nlearning_rate = 1\n", &p()) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("learning_rate"));
            }
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("n_heads = 2\nd_model = \"big\"\n", &p()) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("d_model"));
            }
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("d_model = 16\nnorm_kind = = 3\n", &p()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("d_model = 30\nn_heads = 4\n", &p()), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip_and_diff() {
        let mut c = RunConfig::default();
        c.model.d_model = 64;
        c.train.epochs = 3;
        let back = RunConfig::parse(&c.to_toml(), &p()).unwrap();
        assert_eq!(back, c);
        let mut other = c.model.clone();
        other.n_layers = 5;
        other.seed = 3;
        let d = config_diff(&c.model, &other, &["seed"]);
        assert_eq!(d.len(), 1);
        assert!(d[0].starts_with("n_layers"));
    }
}
