use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::{STANDARD, STANDARD_NO_PAD, URL_SAFE, URL_SAFE_NO_PAD};
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use url::Url;

use super::TrafficRecord;
use crate::error::Error;

pub const DEFAULT_MAX_DECODE_DEPTH: u8 = 3;

/// Where a pair was found. `Decoded(n)` means n decoding layers were peeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KvSource {
    Query,
    JsonBody,
    FormBody,
    Header,
    Decoded(u8),
}

impl KvSource {
    fn depth(self) -> u8 {
        match self {
            KvSource::Decoded(n) => n,
            _ => 0,
        }
    }
}

impl fmt::Display for KvSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KvSource::Query => f.write_str("query"),
            KvSource::JsonBody => f.write_str("json-body"),
            KvSource::FormBody => f.write_str("form-body"),
            KvSource::Header => f.write_str("header"),
            KvSource::Decoded(n) => write!(f, "decoded({n})"),
        }
    }
}

impl FromStr for KvSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "query" => Ok(KvSource::Query),
            "json-body" => Ok(KvSource::JsonBody),
            "form-body" => Ok(KvSource::FormBody),
            "header" => Ok(KvSource::Header),
            _ => s
                .strip_prefix("decoded(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse().ok())
                .map(KvSource::Decoded)
                .ok_or_else(|| Error::unknown("kv source", s)),
        }
    }
}

impl Serialize for KvSource {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KvSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KvPair {
    /// Dot-joined path, each segment lowercased and trimmed.
    pub key_path: String,
    pub value: String,
    pub source: KvSource,
}

/// Pairs from the query string, headers and body, peeling up to
/// [`DEFAULT_MAX_DECODE_DEPTH`] layers of encoding.
pub fn extract_kv(record: &TrafficRecord) -> Vec<KvPair> {
    extract_kv_with(record, DEFAULT_MAX_DECODE_DEPTH)
}

pub fn extract_kv_with(record: &TrafficRecord, max_depth: u8) -> Vec<KvPair> {
    let mut ex = Extractor {
        max_depth,
        out: Vec::new(),
    };
    if let Ok(url) = Url::parse(&record.url) {
        for (k, v) in url.query_pairs() {
            ex.emit(&join("", &k), &v, KvSource::Query);
        }
    }
    for (name, value) in &record.headers {
        ex.emit(&join("", name), value, KvSource::Header);
    }
    ex.body(&record.body, &record.content_type);
    ex.out
}

/// Peels one layer of URL, hex or base64 encoding. The result must be
/// printable UTF-8 and differ from the input.
pub fn decode_layer(value: &str) -> Option<String> {
    let value = value.trim();
    if value.is_empty() {
        return None;
    }
    if value.contains('%') {
        if let Ok(text) = urlencoding_decode(value) {
            if text != value && printable(&text) {
                return Some(text);
            }
        }
    }
    if value.len() >= 8
        && value.len().is_multiple_of(2)
        && value.bytes().all(|b| b.is_ascii_hexdigit())
    {
        if let Some(text) = hex::decode(value).ok().and_then(utf8_printable) {
            return Some(text);
        }
    }
    if value.len() >= 4 {
        for engine in [&STANDARD, &URL_SAFE, &STANDARD_NO_PAD, &URL_SAFE_NO_PAD] {
            if let Some(text) = engine.decode(value).ok().and_then(utf8_printable) {
                if text != value {
                    return Some(text);
                }
            }
        }
    }
    None
}

fn urlencoding_decode(value: &str) -> Result<String, std::str::Utf8Error> {
    let bytes: Vec<u8> = url::form_urlencoded::parse(format!("k={value}").as_bytes())
        .next()
        .map(|(_, v)| v.into_owned().into_bytes())
        .unwrap_or_default();
    std::str::from_utf8(&bytes).map(str::to_string)
}

fn utf8_printable(bytes: Vec<u8>) -> Option<String> {
    String::from_utf8(bytes).ok().filter(|t| printable(t))
}

fn printable(text: &str) -> bool {
    !text.is_empty()
        && !text.contains('\u{fffd}')
        && text
            .chars()
            .all(|c| !c.is_control() || matches!(c, '\n' | '\r' | '\t'))
}

fn join(prefix: &str, segment: &str) -> String {
    let seg = segment.trim().to_lowercase();
    if prefix.is_empty() {
        seg
    } else if seg.is_empty() {
        prefix.to_string()
    } else {
        format!("{prefix}.{seg}")
    }
}

/// `k=v&k2=v2`. A lone token ending in `=` padding is base64, not a form.
fn looks_like_form(text: &str) -> bool {
    let text = text.trim();
    !text.is_empty()
        && !text.chars().any(char::is_whitespace)
        && text.split('&').any(|seg| {
            seg.split_once('=')
                .is_some_and(|(_, v)| !v.trim_matches('=').is_empty())
        })
        && text.split('&').all(|seg| match seg.split_once('=') {
            Some((k, _)) => {
                !k.is_empty()
                    && k.chars().all(|c| {
                        c.is_ascii_alphanumeric()
                            || matches!(c, '_' | '-' | '.' | '[' | ']' | '%' | '+')
                    })
            }
            None => false,
        })
}

struct Extractor {
    max_depth: u8,
    out: Vec<KvPair>,
}

impl Extractor {
    fn emit(&mut self, key_path: &str, value: &str, source: KvSource) {
        self.out.push(KvPair {
            key_path: key_path.to_string(),
            value: value.to_string(),
            source,
        });
        let depth = source.depth();
        if depth < self.max_depth {
            if let Some(decoded) = decode_layer(value) {
                self.structured(key_path, &decoded, depth + 1);
            }
        }
    }

    /// Decoded text: re-parse as JSON or form data under the parent key,
    /// otherwise keep it as a value and try another layer.
    fn structured(&mut self, prefix: &str, text: &str, depth: u8) {
        let source = KvSource::Decoded(depth);
        match serde_json::from_str::<Value>(text) {
            Ok(v @ (Value::Object(_) | Value::Array(_))) => self.flatten(prefix, &v, source),
            _ if looks_like_form(text) => self.form(prefix, text, source),
            _ => self.emit(prefix, text, source),
        }
    }

    fn body(&mut self, body: &[u8], content_type: &str) {
        let Ok(text) = std::str::from_utf8(body) else {
            return;
        };
        if text.trim().is_empty() {
            return;
        }
        let ct = content_type.to_ascii_lowercase();
        if let Ok(v @ (Value::Object(_) | Value::Array(_))) = serde_json::from_str::<Value>(text) {
            self.flatten("", &v, KvSource::JsonBody);
        } else if ct.contains("x-www-form-urlencoded") || looks_like_form(text) {
            self.form("", text, KvSource::FormBody);
        } else if self.max_depth > 0 {
            if let Some(decoded) = decode_layer(text) {
                self.structured("", &decoded, 1);
            }
        }
    }

    fn form(&mut self, prefix: &str, text: &str, source: KvSource) {
        for (k, v) in url::form_urlencoded::parse(text.trim().as_bytes()) {
            self.emit(&join(prefix, &k), &v, source);
        }
    }

    fn flatten(&mut self, prefix: &str, value: &Value, source: KvSource) {
        match value {
            Value::Null => {}
            Value::Object(map) => {
                for (k, v) in map {
                    self.flatten(&join(prefix, k), v, source);
                }
            }
            Value::Array(items) => {
                for v in items {
                    self.flatten(prefix, v, source);
                }
            }
            Value::String(s) => self.emit(prefix, s, source),
            Value::Number(n) => self.emit(prefix, &n.to_string(), source),
            Value::Bool(b) => self.emit(prefix, if *b { "true" } else { "false" }, source),
        }
    }
}
