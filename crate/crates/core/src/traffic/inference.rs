use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kv::extract_kv_with;
use super::location::classify_location;
use super::{excerpt, DataObservation, InstrumentationEvent, KvPair, TrafficRecord};
use crate::binary_scan::LMapping;
use crate::error::{read_to_string, Error, Result};
use crate::ontology::normalize_term;
use crate::taxonomy::DataItem;

pub const KEYWORDS_JSON: &str = include_str!("../../data/keywords.json");

const EXCERPT_CHARS: usize = 64;
const LAT_KEYS: &[&str] = &["lat", "latitude"];
const LON_KEYS: &[&str] = &["lon", "lng", "long", "longitude"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceKind {
    ValueMatch,
    KeywordMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Evidence {
    /// A hooked API's return value was seen in the request.
    ValueMatch { api: String, value: String },
    /// A request key matched the keyword map.
    KeywordMatch { key_path: String, keyword: String },
}

impl Evidence {
    pub fn kind(&self) -> EvidenceKind {
        match self {
            Evidence::ValueMatch { .. } => EvidenceKind::ValueMatch,
            Evidence::KeywordMatch { .. } => EvidenceKind::KeywordMatch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub min_value_len: usize,
    pub max_decode_depth: u8,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            min_value_len: 8,
            max_decode_depth: 3,
        }
    }
}

#[derive(Deserialize)]
struct KeywordFile {
    keywords: BTreeMap<String, String>,
}

/// Request-key keywords, stored normalized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordMap {
    map: BTreeMap<String, DataItem>,
}

impl KeywordMap {
    pub fn bundled() -> Self {
        Self::from_json(KEYWORDS_JSON).expect("bundled keyword map is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: KeywordFile = serde_json::from_str(text)?;
        let mut map = BTreeMap::new();
        for (key, item) in file.keywords {
            let item: DataItem = item.parse()?;
            let norm = normalize_term(&key);
            if norm.is_empty() {
                return Err(Error::Validation(format!(
                    "keyword `{key}` is empty after normalization"
                )));
            }
            match map.insert(norm.clone(), item) {
                Some(prev) if prev != item => {
                    return Err(Error::Validation(format!(
                        "keyword `{norm}` maps to both `{prev}` and `{item}`"
                    )))
                }
                _ => {}
            }
        }
        Ok(KeywordMap { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<DataItem> {
        self.map.get(&normalize_term(key)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, DataItem)> {
        self.map.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Matches a key path by its last segment or as a whole.
    fn match_path(&self, key_path: &str) -> Option<(&str, DataItem)> {
        let leaf = key_path.rsplit('.').next().unwrap_or(key_path);
        [normalize_term(leaf), normalize_term(key_path)]
            .into_iter()
            .find_map(|k| self.map.get_key_value(&k))
            .map(|(k, v)| (k.as_str(), *v))
    }
}

fn leaf_of(key_path: &str) -> String {
    normalize_term(key_path.rsplit('.').next().unwrap_or(key_path))
}

/// Precise or Coarse from the first lat/lon pair in a record, if both parse.
fn location_refinement(pairs: &[KvPair]) -> Option<DataItem> {
    let find = |keys: &[&str]| {
        pairs
            .iter()
            .find(|p| keys.contains(&leaf_of(&p.key_path).as_str()))
            .map(|p| p.value.as_str())
    };
    let (lat, lon) = (find(LAT_KEYS)?, find(LON_KEYS)?);
    classify_location(lat, lon).ok().map(|p| p.item())
}

/// Observations of label items leaving the device. Records sent to Apple
/// domains are skipped. One observation per (item, record, evidence kind);
/// the least evidence wins, so the output does not depend on input order.
pub fn infer_data_items(
    records: &[TrafficRecord],
    events: &[InstrumentationEvent],
    keywords: &KeywordMap,
    lmap: &LMapping,
    config: &InferenceConfig,
) -> Vec<DataObservation> {
    let probes: BTreeSet<(&str, &str, DataItem)> = events
        .iter()
        .filter(|e| e.ret.chars().count() >= config.min_value_len)
        .filter_map(|e| {
            lmap.lookup_api(&e.api)
                .map(|entry| (e.api.as_str(), e.ret.as_str(), entry.item))
        })
        .collect();

    let mut found: Vec<DataObservation> = Vec::new();
    for record in records.iter().filter(|r| !r.excluded) {
        let pairs = extract_kv_with(record, config.max_decode_depth);
        let body = String::from_utf8_lossy(&record.body);

        for &(api, value, item) in &probes {
            let seen = record.url.contains(value)
                || body.contains(value)
                || pairs.iter().any(|p| p.value.contains(value));
            if seen {
                found.push(DataObservation {
                    item,
                    evidence: Evidence::ValueMatch {
                        api: api.to_string(),
                        value: value.to_string(),
                    },
                    record_id: record.id.clone(),
                    endpoint: record.host.clone(),
                    value_excerpt: excerpt(value, EXCERPT_CHARS),
                });
            }
        }

        let refined = location_refinement(&pairs);
        for pair in &pairs {
            let Some((keyword, mut item)) = keywords.match_path(&pair.key_path) else {
                continue;
            };
            let leaf = leaf_of(&pair.key_path);
            if LAT_KEYS.contains(&leaf.as_str()) || LON_KEYS.contains(&leaf.as_str()) {
                if let Some(r) = refined {
                    item = r;
                }
            }
            found.push(DataObservation {
                item,
                evidence: Evidence::KeywordMatch {
                    key_path: pair.key_path.clone(),
                    keyword: keyword.to_string(),
                },
                record_id: record.id.clone(),
                endpoint: record.host.clone(),
                value_excerpt: excerpt(&pair.value, EXCERPT_CHARS),
            });
        }
    }

    found.sort_by(|a, b| {
        (&a.record_id, a.item, a.evidence.kind(), a).cmp(&(
            &b.record_id,
            b.item,
            b.evidence.kind(),
            b,
        ))
    });
    found.dedup_by(|later, first| {
        later.record_id == first.record_id
            && later.item == first.item
            && later.evidence.kind() == first.evidence.kind()
    });
    found
}
