//! Run configuration: seed-data paths and thresholds, plus the loaded seed data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binary_scan::LMapping;
use crate::error::{read_to_string, Result};
use crate::ontology::Ontology;
use crate::purpose::{DomainDB, RuleTable};
use crate::traffic::{AppleDomains, InferenceConfig, KeywordMap};

pub const DEFAULT_CONFIG_TOML: &str = include_str!("../data/config.toml");

/// Seed-data files. Unset entries use the bundled copies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub ontology: Option<PathBuf>,
    pub lmapping: Option<PathBuf>,
    pub keywords: Option<PathBuf>,
    pub domains: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub apple_domains: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub min_value_len: usize,
    pub max_decode_depth: u8,
    pub top_n: usize,
    /// Concurrent apps; 0 lets the thread pool decide.
    pub workers: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        let inference = InferenceConfig::default();
        Thresholds {
            min_value_len: inference.min_value_len,
            max_decode_depth: inference.max_decode_depth,
            top_n: 15,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub paths: Paths,
    pub thresholds: Thresholds,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml(&read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut config.paths;
        for slot in [
            &mut p.ontology,
            &mut p.lmapping,
            &mut p.keywords,
            &mut p.domains,
            &mut p.rules,
            &mut p.apple_domains,
        ] {
            if let Some(rel) = slot.as_ref().filter(|p| p.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(config)
    }

    pub fn inference(&self) -> InferenceConfig {
        InferenceConfig {
            min_value_len: self.thresholds.min_value_len,
            max_decode_depth: self.thresholds.max_decode_depth,
        }
    }
}

/// Every seed table a run needs, loaded once and shared read-only.
#[derive(Debug, Clone)]
pub struct Resources {
    pub ontology: Ontology,
    pub lmapping: LMapping,
    pub keywords: KeywordMap,
    pub domains: DomainDB,
    pub rules: RuleTable,
    pub apple: AppleDomains,
    pub config: Config,
}

fn load_or<T>(
    path: &Option<PathBuf>,
    load: impl Fn(&Path) -> Result<T>,
    bundled: impl Fn() -> T,
) -> Result<T> {
    match path {
        Some(p) => load(p),
        None => Ok(bundled()),
    }
}

impl Resources {
    pub fn bundled() -> Self {
        Self::load(&Config::default()).expect("bundled seed data is valid")
    }

    pub fn load(config: &Config) -> Result<Self> {
        let p = &config.paths;
        Ok(Resources {
            ontology: load_or(&p.ontology, Ontology::load, Ontology::bundled)?,
            lmapping: load_or(&p.lmapping, LMapping::load, LMapping::bundled)?,
            keywords: load_or(&p.keywords, KeywordMap::load, KeywordMap::bundled)?,
            domains: load_or(&p.domains, DomainDB::load, DomainDB::bundled)?,
            rules: load_or(&p.rules, RuleTable::load, RuleTable::bundled)?,
            apple: load_or(&p.apple_domains, AppleDomains::load, AppleDomains::bundled)?,
            config: config.clone(),
        })
    }
}
