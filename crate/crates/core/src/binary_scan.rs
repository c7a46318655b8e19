//! Static screening of app binaries for sensitive-API selector names.
//!
//! An Objective-C or Swift call site passes the selector name as a string to
//! `objc_msgSend`, so the name shows up verbatim in the binary whenever the
//! app calls the API. A plain byte-substring search is enough to screen apps.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::taxonomy::DataItem;

pub const LMAPPING_JSON: &str = include_str!("../data/lmapping.json");

/// Items an l-mapping may point at: the ones returned by system APIs.
pub const COVERED_ITEMS: &[DataItem] = &[
    DataItem::DeviceId,
    DataItem::PreciseLocation,
    DataItem::CoarseLocation,
    DataItem::Contacts,
    DataItem::Health,
    DataItem::PerformanceData,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LMappingEntry {
    pub selector: String,
    pub api: String,
    pub item: DataItem,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LMappingFile {
    entries: Vec<RawEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawEntry {
    selector: String,
    api: String,
    item: String,
}

/// Data item to iOS API mapping.
#[derive(Debug, Clone)]
pub struct LMapping {
    entries: Vec<LMappingEntry>,
    matcher: AhoCorasick,
}

impl LMapping {
    pub fn bundled() -> Self {
        Self::from_json(LMAPPING_JSON).expect("bundled l-mapping is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LMappingFile = serde_json::from_str(text)?;
        let entries = file
            .entries
            .into_iter()
            .enumerate()
            .map(|(index, raw)| {
                let item: DataItem = raw.item.parse()?;
                if !COVERED_ITEMS.contains(&item) {
                    return Err(Error::Entry {
                        index,
                        message: format!("`{item}` is not returned by a system API"),
                    });
                }
                Ok(LMappingEntry {
                    selector: raw.selector,
                    api: raw.api,
                    item,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn new(entries: Vec<LMappingEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (index, entry) in entries.iter().enumerate() {
            if entry.selector.is_empty() {
                return Err(Error::Entry {
                    index,
                    message: "empty selector".into(),
                });
            }
            if !seen.insert(entry.selector.as_str()) {
                return Err(Error::DuplicateSelector(entry.selector.clone()));
            }
        }
        let matcher = AhoCorasickBuilder::new()
            .match_kind(MatchKind::Standard)
            .build(entries.iter().map(|e| e.selector.as_bytes()))
            .map_err(|e| Error::Validation(format!("selector automaton: {e}")))?;
        Ok(LMapping { entries, matcher })
    }

    pub fn entries(&self) -> &[LMappingEntry] {
        &self.entries
    }

    pub fn covered_items(&self) -> BTreeSet<DataItem> {
        self.entries.iter().map(|e| e.item).collect()
    }

    /// Looks an API up by selector or by its full API name.
    pub fn lookup_api(&self, api: &str) -> Option<&LMappingEntry> {
        self.entries
            .iter()
            .find(|e| e.selector == api || e.api == api)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorHit {
    pub selector: String,
    pub api: String,
    pub item: DataItem,
    /// Occurrences, overlapping ones included.
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanResult {
    pub hits: Vec<SelectorHit>,
    pub items: BTreeSet<DataItem>,
}

impl ScanResult {
    /// Whether the app belongs to the static-screening set.
    pub fn is_alpha_member(&self) -> bool {
        !self.items.is_empty()
    }
}

/// Counts every occurrence of every selector in `bytes`. Case-sensitive.
pub fn scan_binary(bytes: &[u8], mapping: &LMapping) -> ScanResult {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for m in mapping.matcher.find_overlapping_iter(bytes) {
        *counts.entry(m.pattern().as_usize()).or_default() += 1;
    }
    let mut hits: Vec<SelectorHit> = counts
        .into_iter()
        .map(|(idx, count)| {
            let e = &mapping.entries[idx];
            SelectorHit {
                selector: e.selector.clone(),
                api: e.api.clone(),
                item: e.item,
                count,
            }
        })
        .collect();
    hits.sort_by(|a, b| a.selector.cmp(&b.selector));
    let items = hits.iter().map(|h| h.item).collect();
    ScanResult { hits, items }
}

pub fn scan_file(path: &Path, mapping: &LMapping) -> Result<ScanResult> {
    Ok(scan_binary(&crate::error::read_file(path)?, mapping))
}
