use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One hooked system-API call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentationEvent {
    pub api: String,
    #[serde(default)]
    pub caller: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub ret: String,
    #[serde(default)]
    pub stack: Vec<String>,
    #[serde(default)]
    pub ts: i64,
}

#[derive(Deserialize)]
struct RawEvent {
    api: Option<String>,
    #[serde(default)]
    caller: String,
    #[serde(default)]
    args: Vec<String>,
    #[serde(default)]
    ret: String,
    #[serde(default)]
    stack: Vec<String>,
    #[serde(default)]
    ts: i64,
}

/// Parses the JSONL hook log and orders events by timestamp (stable).
pub fn parse_instrumentation(text: &str) -> Result<Vec<InstrumentationEvent>> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Line {
            line: idx + 1,
            message,
        };
        let raw: RawEvent = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let api = raw
            .api
            .filter(|a| !a.trim().is_empty())
            .ok_or_else(|| err("missing `api`".into()))?;
        events.push(InstrumentationEvent {
            api,
            caller: raw.caller,
            args: raw.args,
            ret: raw.ret,
            stack: raw.stack,
            ts: raw.ts,
        });
    }
    events.sort_by_key(|e| e.ts);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_event() {
        let ev = parse_instrumentation(
            r#"{"api":"advertisingIdentifier","ret":"9F0B31E6-980B-4468-9797-0B1F1A8FA56E","caller":"AppX"}"#,
        )
        .unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].caller, "AppX");
    }

    #[test]
    fn empty_file() {
        assert!(parse_instrumentation("").unwrap().is_empty());
    }

    #[test]
    fn missing_api_reports_line() {
        let text = "{\"api\":\"a\",\"ts\":1}\n{\"ret\":\"x\"}\n";
        match parse_instrumentation(text).unwrap_err() {
            Error::Line { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("api"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn ordered_by_timestamp() {
        let text = "{\"api\":\"b\",\"ts\":5}\n{\"api\":\"a\",\"ts\":1}\n{\"api\":\"c\",\"ts\":5}\n";
        let apis: Vec<_> = parse_instrumentation(text)
            .unwrap()
            .into_iter()
            .map(|e| e.api)
            .collect();
        assert_eq!(apis, ["a", "b", "c"]);
    }
}
