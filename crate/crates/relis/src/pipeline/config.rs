//! Plain-text key=value configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment; later
//! assignments override earlier ones. Experiment splits use the key form
//! `split.<name> = <path>`. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{RelisError, Result};
use crate::l2r::{LossKind, TrainConfig};
use crate::pipeline::ExperimentConfig;
use crate::rlmdp::RlConfig;

/// Parsed key=value pairs with typed accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<KeyValues> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                RelisError::Format(format!("line {}: expected key = value, got {raw:?}", i + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(RelisError::Format(format!("line {}: empty key", i + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(KeyValues { entries })
    }

    pub fn load(path: &Path) -> Result<KeyValues> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            RelisError::Input(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, str::parse::<usize>)
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, str::parse::<u64>)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, str::parse::<f64>)
    }

    pub fn get_loss(&self, key: &str) -> Result<Option<LossKind>> {
        self.parse_with(key, str::parse::<LossKind>)
    }

    fn parse_with<T, E: std::fmt::Display>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, E>,
    ) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(text) => parse(text)
                .map(Some)
                .map_err(|e| RelisError::Config(format!("key {key}: cannot parse {text:?}: {e}"))),
        }
    }

    /// All `split.<name>` entries as (name, path), sorted by name.
    pub fn splits(&self) -> Vec<(String, PathBuf)> {
        self.entries
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix("split.")
                    .map(|name| (name.to_string(), PathBuf::from(v)))
            })
            .collect()
    }
}

/// Assemble a leave-one-out experiment from a config file, with the seed
/// and output directory optionally overridden by command-line flags.
///
/// Recognised keys: `split.<name>`, `budget`, `loss`, `lr`, `epochs`,
/// `batch`, `dev_fraction`, `samples`, `pairs`, `episodes`, `rl_lr`,
/// `penalty`, `seed`, `out`.
pub fn experiment_from_keys(
    kv: &KeyValues,
    seed_override: Option<u64>,
    out_override: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let train_defaults = TrainConfig::default();
    let rl_defaults = RlConfig::default();
    let seed = seed_override.or(kv.get_u64("seed")?).unwrap_or(0);
    let out_dir = out_override
        .or_else(|| kv.get("out").map(PathBuf::from))
        .ok_or_else(|| RelisError::Config("missing output directory (key `out`)".into()))?;

    let config = ExperimentConfig {
        splits: kv.splits(),
        length_budget: kv.get_usize("budget")?.unwrap_or(100),
        train: TrainConfig {
            loss_kind: kv.get_loss("loss")?.unwrap_or(train_defaults.loss_kind),
            learning_rate: kv.get_f64("lr")?.unwrap_or(train_defaults.learning_rate),
            epochs: kv.get_usize("epochs")?.unwrap_or(train_defaults.epochs),
            batch_size: kv.get_usize("batch")?.unwrap_or(train_defaults.batch_size),
            dev_fraction: kv
                .get_f64("dev_fraction")?
                .unwrap_or(train_defaults.dev_fraction),
            seed,
        },
        samples_per_cluster: kv.get_usize("samples")?.unwrap_or(3000),
        pairs_per_cluster: kv.get_usize("pairs")?.unwrap_or(100_000),
        rl: RlConfig {
            episodes: kv.get_usize("episodes")?.unwrap_or(rl_defaults.episodes),
            learning_rate: kv.get_f64("rl_lr")?.unwrap_or(rl_defaults.learning_rate),
            over_length_penalty: kv
                .get_f64("penalty")?
                .unwrap_or(rl_defaults.over_length_penalty),
            seed,
        },
        seed,
        out_dir,
    };
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_overrides() {
        let kv = KeyValues::parse(
            "# a comment\n\
             samples = 40\n\
             loss= ce  # trailing comment\n\
             \n\
             samples = 50\n",
        )
        .unwrap();
        assert_eq!(kv.get_usize("samples").unwrap(), Some(50));
        assert_eq!(kv.get_loss("loss").unwrap(), Some(LossKind::CrossEntropy));
        assert_eq!(kv.get("missing"), None);
    }

    #[test]
    fn missing_equals_is_a_format_error() {
        assert!(matches!(
            KeyValues::parse("just words\n").unwrap_err(),
            RelisError::Format(_)
        ));
    }

    #[test]
    fn unparseable_value_is_a_config_error() {
        let kv = KeyValues::parse("samples = many\n").unwrap();
        assert!(matches!(
            kv.get_usize("samples").unwrap_err(),
            RelisError::Config(_)
        ));
    }

    #[test]
    fn splits_are_collected_sorted() {
        let kv = KeyValues::parse(
            "split.beta = /data/b\n\
             split.alpha = /data/a\n",
        )
        .unwrap();
        let splits = kv.splits();
        assert_eq!(
            splits,
            [
                ("alpha".to_string(), PathBuf::from("/data/a")),
                ("beta".to_string(), PathBuf::from("/data/b")),
            ]
        );
    }

    #[test]
    fn experiment_assembly_applies_defaults_and_overrides() {
        let kv = KeyValues::parse(
            "split.a = /x\n\
             split.b = /y\n\
             out = /tmp/out\n\
             epochs = 4\n\
             seed = 9\n",
        )
        .unwrap();
        let config = experiment_from_keys(&kv, None, None).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.train.epochs, 4);
        assert_eq!(config.train.seed, 9);
        assert_eq!(config.samples_per_cluster, 3000);
        assert_eq!(config.out_dir, PathBuf::from("/tmp/out"));

        let overridden =
            experiment_from_keys(&kv, Some(12), Some(PathBuf::from("/elsewhere"))).unwrap();
        assert_eq!(overridden.seed, 12);
        assert_eq!(overridden.out_dir, PathBuf::from("/elsewhere"));
    }

    #[test]
    fn missing_out_is_a_config_error() {
        let kv = KeyValues::parse("split.a = /x\n").unwrap();
        assert!(matches!(
            experiment_from_keys(&kv, None, None).unwrap_err(),
            RelisError::Config(_)
        ));
    }
}
