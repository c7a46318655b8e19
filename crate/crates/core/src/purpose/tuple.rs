use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{
    excerpt, extract_kv_with, DataObservation, Evidence, InferenceConfig, InstrumentationEvent,
    KvSource, TrafficRecord,
};

const RESPONSE_CHARS: usize = 128;

/// Stack-frame modules treated as the system rather than the app.
const SYSTEM_MODULES: &[&str] = &[
    "UIKit",
    "UIKitCore",
    "Foundation",
    "CoreFoundation",
    "AdSupport",
    "CoreLocation",
    "HealthKit",
    "Contacts",
    "CFNetwork",
    "Security",
    "WebKit",
    "GraphicsServices",
    "FrontBoardServices",
    "SwiftUI",
    "dyld",
    "frida-agent",
];

/// Context of one observation: who called which API how often, where the
/// data went and what the request carried.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SixTuple {
    pub caller: String,
    pub system_api: String,
    pub frequency: usize,
    pub endpoint: String,
    /// Sorted bag of non-header key paths.
    pub request_keys: Vec<String>,
    pub response_excerpt: String,
}

/// Module of a backtrace frame such as `0x1a2b AppX!-[Foo bar]`.
fn frame_module(frame: &str) -> &str {
    let mut parts = frame.split_whitespace();
    let first = parts.next().unwrap_or("");
    let token = if first.starts_with("0x") {
        parts.next().unwrap_or("")
    } else {
        first
    };
    token.split('!').next().unwrap_or("")
}

fn is_system(module: &str) -> bool {
    module.is_empty()
        || module.starts_with("lib")
        || module.starts_with("0x")
        || SYSTEM_MODULES.contains(&module)
}

fn caller_of(event: &InstrumentationEvent) -> String {
    event
        .stack
        .iter()
        .map(|f| frame_module(f))
        .find(|m| !is_system(m))
        .map(str::to_string)
        .or_else(|| Some(event.caller.clone()).filter(|c| !c.is_empty()))
        .unwrap_or_else(|| "app".to_string())
}

pub fn build_six_tuple(
    obs: &DataObservation,
    events: &[InstrumentationEvent],
    records: &[TrafficRecord],
    config: &InferenceConfig,
) -> Result<SixTuple> {
    let record = records
        .iter()
        .find(|r| r.id == obs.record_id)
        .ok_or_else(|| Error::DanglingRecord(obs.record_id.clone()))?;

    let (caller, system_api, frequency) = match &obs.evidence {
        Evidence::ValueMatch { api, value } => {
            let same_api: Vec<&InstrumentationEvent> =
                events.iter().filter(|e| e.api == *api).collect();
            if same_api.is_empty() {
                return Err(Error::Validation(format!(
                    "value match names api `{api}` with no recorded event"
                )));
            }
            let event = same_api
                .iter()
                .find(|e| e.ret == *value)
                .unwrap_or(&same_api[0]);
            (caller_of(event), api.clone(), same_api.len())
        }
        Evidence::KeywordMatch { .. } => ("app".to_string(), String::new(), 0),
    };

    let mut request_keys: Vec<String> = extract_kv_with(record, config.max_decode_depth)
        .into_iter()
        .filter(|p| p.source != KvSource::Header)
        .map(|p| p.key_path)
        .collect();
    request_keys.sort();

    Ok(SixTuple {
        caller,
        system_api,
        frequency,
        endpoint: record.host.clone(),
        request_keys,
        response_excerpt: excerpt(
            &String::from_utf8_lossy(&record.response_body),
            RESPONSE_CHARS,
        ),
    })
}
