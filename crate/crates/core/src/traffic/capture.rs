use std::collections::{BTreeMap, BTreeSet};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;
use url::{Host, Url};

use super::TrafficRecord;
use crate::error::{Error, Result};

pub const APPLE_DOMAINS_TXT: &str = include_str!("../../data/apple_domains.txt");

/// Registrable domains whose traffic is Apple's own, not the app's.
#[derive(Debug, Clone)]
pub struct AppleDomains {
    domains: BTreeSet<String>,
}

impl AppleDomains {
    pub fn bundled() -> Self {
        Self::parse(APPLE_DOMAINS_TXT)
    }

    /// One domain per line; `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let domains = text
            .lines()
            .map(|l| {
                l.split('#')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_ascii_lowercase()
            })
            .filter(|l| !l.is_empty())
            .collect();
        AppleDomains { domains }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(Self::parse(&crate::error::read_to_string(path)?))
    }

    pub fn is_apple(&self, host: &str) -> bool {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        self.domains.iter().any(|d| {
            host == *d
                || host
                    .strip_suffix(d.as_str())
                    .is_some_and(|rest| rest.ends_with('.'))
        })
    }
}

/// Registrable domain (eTLD+1) from the bundled public-suffix snapshot.
/// IP literals and unlisted names fall back to the host itself.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host
        .trim_matches(['[', ']'])
        .parse::<std::net::IpAddr>()
        .is_ok()
    {
        return host;
    }
    psl::domain_str(&host).map(str::to_string).unwrap_or(host)
}

#[derive(Debug, Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Debug, Deserialize)]
struct HarLog {
    #[serde(default)]
    entries: Vec<serde_json::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarEntry {
    #[serde(default)]
    started_date_time: Option<String>,
    request: HarRequest,
    #[serde(default)]
    response: Option<HarResponse>,
    #[serde(default, rename = "_id")]
    id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarRequest {
    #[serde(default = "default_method")]
    method: String,
    url: String,
    #[serde(default)]
    headers: Vec<HarNameValue>,
    #[serde(default)]
    post_data: Option<HarPostData>,
}

#[derive(Debug, Deserialize)]
struct HarNameValue {
    name: String,
    #[serde(default)]
    value: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HarPostData {
    #[serde(default)]
    mime_type: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    params: Vec<HarNameValue>,
    #[serde(default)]
    encoding: Option<String>,
}

#[derive(Debug, Deserialize)]
struct HarResponse {
    #[serde(default)]
    content: Option<HarContent>,
}

#[derive(Debug, Deserialize)]
struct HarContent {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    encoding: Option<String>,
}

#[derive(Debug, Deserialize)]
struct JsonlRecord {
    id: String,
    #[serde(default = "default_method")]
    method: String,
    url: String,
    #[serde(default)]
    headers: BTreeMap<String, String>,
    #[serde(default)]
    body_b64: String,
    #[serde(default)]
    ts: i64,
    #[serde(default)]
    response_b64: String,
}

fn default_method() -> String {
    "GET".to_string()
}

/// Parses a HAR 1.2 document or a JSONL record stream, tagging records sent
/// to Apple's bundled domain list as excluded.
pub fn parse_capture(text: &str) -> Result<Vec<TrafficRecord>> {
    parse_capture_with(text, &AppleDomains::bundled())
}

pub fn parse_capture_with(text: &str, apple: &AppleDomains) -> Result<Vec<TrafficRecord>> {
    let records = match serde_json::from_str::<serde_json::Value>(text) {
        Ok(value) if value.get("log").is_some() => parse_har(value, apple)?,
        _ => parse_jsonl(text, apple)?,
    };
    let mut ids = BTreeSet::new();
    for (index, record) in records.iter().enumerate() {
        if !ids.insert(record.id.as_str()) {
            return Err(Error::Entry {
                index,
                message: format!("duplicate record id `{}`", record.id),
            });
        }
    }
    Ok(records)
}

fn parse_har(value: serde_json::Value, apple: &AppleDomains) -> Result<Vec<TrafficRecord>> {
    let har: Har = serde_json::from_value(value).map_err(|e| Error::Entry {
        index: 0,
        message: format!("not a HAR log: {e}"),
    })?;
    har.log
        .entries
        .into_iter()
        .enumerate()
        .map(|(index, raw)| {
            let entry_err = |message: String| Error::Entry { index, message };
            let entry: HarEntry =
                serde_json::from_value(raw).map_err(|e| entry_err(e.to_string()))?;
            let timestamp_ms = match &entry.started_date_time {
                Some(ts) => chrono::DateTime::parse_from_rfc3339(ts)
                    .map_err(|e| entry_err(format!("startedDateTime `{ts}`: {e}")))?
                    .timestamp_millis(),
                None => 0,
            };
            let headers: Vec<(String, String)> = entry
                .request
                .headers
                .into_iter()
                .map(|h| (h.name, h.value))
                .collect();
            let (body, mut content_type) = match entry.request.post_data {
                Some(post) => {
                    let body = match (post.text, post.encoding.as_deref()) {
                        (Some(text), Some("base64")) => STANDARD
                            .decode(text.trim())
                            .map_err(|e| entry_err(format!("postData base64: {e}")))?,
                        (Some(text), _) => text.into_bytes(),
                        (None, _) => url::form_urlencoded::Serializer::new(String::new())
                            .extend_pairs(post.params.iter().map(|p| (&p.name, &p.value)))
                            .finish()
                            .into_bytes(),
                    };
                    (body, post.mime_type)
                }
                None => (Vec::new(), String::new()),
            };
            if content_type.is_empty() {
                content_type = header_value(&headers, "content-type");
            }
            let response_body = match entry.response.and_then(|r| r.content) {
                Some(HarContent {
                    text: Some(text),
                    encoding,
                }) => {
                    if encoding.as_deref() == Some("base64") {
                        STANDARD.decode(text.trim()).unwrap_or_default()
                    } else {
                        text.into_bytes()
                    }
                }
                _ => Vec::new(),
            };
            build_record(
                entry.id.unwrap_or_else(|| format!("har-{index}")),
                entry.request.method,
                entry.request.url,
                headers,
                body,
                content_type,
                timestamp_ms,
                response_body,
                apple,
            )
            .map_err(entry_err)
        })
        .collect()
}

fn parse_jsonl(text: &str, apple: &AppleDomains) -> Result<Vec<TrafficRecord>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let line_err = |message: String| Error::Line {
            line: line_no,
            message,
        };
        let raw: JsonlRecord = serde_json::from_str(line).map_err(|e| line_err(e.to_string()))?;
        let body = STANDARD
            .decode(raw.body_b64.trim())
            .map_err(|e| line_err(format!("body_b64: {e}")))?;
        let response_body = STANDARD
            .decode(raw.response_b64.trim())
            .map_err(|e| line_err(format!("response_b64: {e}")))?;
        let headers: Vec<(String, String)> = raw.headers.into_iter().collect();
        let content_type = header_value(&headers, "content-type");
        out.push(
            build_record(
                raw.id,
                raw.method,
                raw.url,
                headers,
                body,
                content_type,
                raw.ts,
                response_body,
                apple,
            )
            .map_err(line_err)?,
        );
    }
    Ok(out)
}

fn header_value(headers: &[(String, String)], name: &str) -> String {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.clone())
        .unwrap_or_default()
}

#[allow(clippy::too_many_arguments)]
fn build_record(
    id: String,
    method: String,
    url: String,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
    content_type: String,
    timestamp_ms: i64,
    response_body: Vec<u8>,
    apple: &AppleDomains,
) -> std::result::Result<TrafficRecord, String> {
    let parsed = Url::parse(&url).map_err(|e| format!("url `{url}`: {e}"))?;
    let (host, registrable) = match parsed.host() {
        Some(Host::Domain(d)) => {
            let d = d.to_ascii_lowercase();
            let reg = registrable_domain(&d);
            (d, reg)
        }
        Some(ip) => {
            let ip = ip.to_string();
            (ip.clone(), ip)
        }
        None => return Err(format!("url `{url}` has no host")),
    };
    let excluded = apple.is_apple(&host);
    Ok(TrafficRecord {
        id,
        method: method.to_ascii_uppercase(),
        url,
        host,
        registrable_domain: registrable,
        headers,
        body,
        content_type,
        timestamp_ms,
        response_body,
        excluded,
    })
}
