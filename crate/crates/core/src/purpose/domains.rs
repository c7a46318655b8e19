use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::traffic::registrable_domain;

pub const DOMAINS_CSV: &str = include_str!("../../data/domains.csv");

/// Tokens too generic to tie a domain to a company or bundle id.
const STOP_TOKENS: &[&str] = &[
    "com", "net", "org", "io", "co", "inc", "llc", "ltd", "limited", "corp", "company", "group",
    "app", "apps", "ios", "iphone", "ipad", "mobile", "the", "and", "www", "api", "dev",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppMeta {
    pub bundle_id: String,
    #[serde(default)]
    pub app_name: String,
    #[serde(default)]
    pub company: String,
    #[serde(default)]
    pub first_party_domains: BTreeSet<String>,
}

impl AppMeta {
    pub fn from_json(text: &str) -> Result<Self> {
        let meta: AppMeta = serde_json::from_str(text)?;
        if meta.bundle_id.trim().is_empty() {
            return Err(Error::Validation("app meta: empty bundle_id".into()));
        }
        Ok(meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    fn tokens(&self) -> BTreeSet<String> {
        [self.company.as_str(), self.bundle_id.as_str()]
            .iter()
            .flat_map(|s| s.split(|c: char| !c.is_alphanumeric()))
            .map(str::to_lowercase)
            .filter(|t| t.len() >= 3 && !STOP_TOKENS.contains(&t.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainCategory {
    Advertising,
    Analytics,
    Marketing,
    ServiceProvider,
    DataBroker,
    Social,
    Cdn,
    Unknown,
}

impl DomainCategory {
    pub const ALL: [DomainCategory; 8] = [
        DomainCategory::Advertising,
        DomainCategory::Analytics,
        DomainCategory::Marketing,
        DomainCategory::ServiceProvider,
        DomainCategory::DataBroker,
        DomainCategory::Social,
        DomainCategory::Cdn,
        DomainCategory::Unknown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainCategory::Advertising => "advertising",
            DomainCategory::Analytics => "analytics",
            DomainCategory::Marketing => "marketing",
            DomainCategory::ServiceProvider => "service-provider",
            DomainCategory::DataBroker => "data-broker",
            DomainCategory::Social => "social",
            DomainCategory::Cdn => "cdn",
            DomainCategory::Unknown => "unknown",
        }
    }
}

impl fmt::Display for DomainCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == t)
            .ok_or_else(|| Error::unknown("domain category", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Entity {
    FirstParty,
    ThirdParty(DomainCategory),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::FirstParty => f.write_str("first-party"),
            Entity::ThirdParty(c) => write!(f, "third-party({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub owner: String,
    pub category: DomainCategory,
}

/// Local stand-in for company and WHOIS lookups.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainDB {
    entries: BTreeMap<String, DomainEntry>,
}

#[derive(Deserialize)]
struct Row {
    domain: String,
    owner: String,
    category: String,
}

impl DomainDB {
    pub fn bundled() -> Self {
        Self::from_csv(DOMAINS_CSV).expect("bundled domain db is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&read_to_string(path)?)
    }

    /// CSV with header `domain,owner,category`. Keys are reduced to their
    /// registrable domain; repeating a key with different data is an error.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut entries = BTreeMap::new();
        for (index, row) in reader.deserialize::<Row>().enumerate() {
            let row = row?;
            let entry_err = |message: String| Error::Entry { index, message };
            if row.domain.is_empty() {
                return Err(entry_err("empty domain".into()));
            }
            let key = registrable_domain(&row.domain);
            let entry = DomainEntry {
                owner: row.owner,
                category: row.category.parse()?,
            };
            match entries.get(&key) {
                Some(prev) if *prev != entry => {
                    return Err(entry_err(format!("conflicting entries for `{key}`")))
                }
                _ => {
                    entries.insert(key, entry);
                }
            }
        }
        Ok(DomainDB { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest listed suffix of `host` on a label boundary.
    pub fn lookup(&self, host: &str) -> Option<&DomainEntry> {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let mut rest = host.as_str();
        loop {
            if let Some(e) = self.entries.get(rest) {
                return Some(e);
            }
            rest = rest.split_once('.')?.1;
        }
    }

    pub fn category(&self, host: &str) -> DomainCategory {
        self.lookup(host)
            .map_or(DomainCategory::Unknown, |e| e.category)
    }
}

fn domain_label(registrable: &str) -> &str {
    match psl::suffix_str(registrable) {
        Some(suffix) if suffix.len() < registrable.len() => registrable
            [..registrable.len() - suffix.len()]
            .trim_end_matches('.')
            .rsplit('.')
            .next()
            .unwrap_or(registrable),
        _ => registrable,
    }
}

/// First party when the host belongs to a listed first-party domain or its
/// registrable label equals a company or bundle-id token.
pub fn classify_entity(endpoint: &str, meta: &AppMeta, db: &DomainDB) -> Entity {
    let host = endpoint.trim_end_matches('.').to_ascii_lowercase();
    let registrable = registrable_domain(&host);
    let listed = meta.first_party_domains.iter().any(|d| {
        let d = d.trim().trim_end_matches('.').to_ascii_lowercase();
        registrable == d
            || host == d
            || host
                .strip_suffix(d.as_str())
                .is_some_and(|r| r.ends_with('.'))
    });
    if listed || meta.tokens().contains(domain_label(&registrable)) {
        Entity::FirstParty
    } else {
        Entity::ThirdParty(db.category(&host))
    }
}
