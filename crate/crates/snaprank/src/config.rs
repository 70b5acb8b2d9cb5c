//! TOML configuration file covering training, architecture, and corpus
//! forging. Every section and field is optional; omitted values fall back
//! to the built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::InjectionSpec;
use crate::model::ArchitectureConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub train: TrainConfig,
    pub architecture: ArchitectureConfig,
    pub injection: InjectionSpec,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn load_str(text: &str) -> Result<AppConfig, ConfigError> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        AppConfig::load(f.path())
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = load_str("").unwrap();
        let def = AppConfig::default();
        assert_eq!(cfg.train.generator_epochs, def.train.generator_epochs);
        assert_eq!(cfg.architecture.gcn_channels, def.architecture.gcn_channels);
        assert_eq!(cfg.injection.n_normal, def.injection.n_normal);
    }

    #[test]
    fn partial_overrides() {
        let cfg = load_str(
            "[train]\nseed = 7\ngenerator_lr = 0.01\n\n\
             [architecture]\ngcn_channels = [8, 4, 1]\n\n\
             [injection]\nclique_size = 4\ndissimilarity = \"cosine\"\n",
        )
        .unwrap();
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.train.generator_lr, 0.01);
        // untouched fields keep their defaults
        assert_eq!(
            cfg.train.discriminator_lr,
            TrainConfig::default().discriminator_lr
        );
        assert_eq!(cfg.architecture.gcn_channels, vec![8, 4, 1]);
        assert_eq!(cfg.injection.clique_size, 4);
        assert_eq!(cfg.injection.dissimilarity, crate::bench::Dissimilarity::Cosine);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(load_str("[trian]\nseed = 7\n").is_err());
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let mut cfg = AppConfig::default();
        cfg.train.seed = 42;
        cfg.architecture.dense_width = 16;
        let text = toml::to_string(&cfg).unwrap();
        let back: AppConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.train.seed, 42);
        assert_eq!(back.architecture.dense_width, 16);
    }
}
