//! Traffic captures and instrumentation logs: parsing, key/value extraction
//! and inference of which label items leave the device.

mod capture;
mod inference;
mod instrumentation;
mod kv;
mod location;
mod redirect;

pub use capture::{parse_capture, parse_capture_with, registrable_domain, AppleDomains};
pub use inference::{infer_data_items, Evidence, EvidenceKind, InferenceConfig, KeywordMap};
pub use instrumentation::{parse_instrumentation, InstrumentationEvent};
pub use kv::{
    decode_layer, extract_kv, extract_kv_with, KvPair, KvSource, DEFAULT_MAX_DECODE_DEPTH,
};
pub use location::{classify_location, decimal_places, LocationPrecision};
pub use redirect::{detect_browser_redirect, user_agent_matches, BROWSER_REDIRECT_PATTERN};

use serde::{Deserialize, Serialize};

use crate::taxonomy::DataItem;

/// One HTTP request from a capture, with its response body if recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub id: String,
    pub method: String,
    pub url: String,
    /// Full host, lowercased.
    pub host: String,
    pub registrable_domain: String,
    pub headers: Vec<(String, String)>,
    #[serde(with = "b64")]
    pub body: Vec<u8>,
    pub content_type: String,
    pub timestamp_ms: i64,
    #[serde(with = "b64", default)]
    pub response_body: Vec<u8>,
    /// Sent to an Apple-owned domain; kept but skipped by inference.
    pub excluded: bool,
}

impl TrafficRecord {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// A label item observed leaving the device in one record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataObservation {
    pub item: DataItem,
    pub evidence: Evidence,
    pub record_id: String,
    /// Host the record was sent to.
    pub endpoint: String,
    pub value_excerpt: String,
}

pub(crate) fn excerpt(value: &str, max_chars: usize) -> String {
    value.chars().take(max_chars).collect()
}

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}
