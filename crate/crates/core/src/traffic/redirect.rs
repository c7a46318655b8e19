use std::sync::OnceLock;

use fancy_regex::Regex;

use super::TrafficRecord;

/// Applied verbatim; needs look-ahead, hence `fancy_regex`.
pub const BROWSER_REDIRECT_PATTERN: &str = r"(iPhone).*AppleWebKit(?!.*Version).*Safari";

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(BROWSER_REDIRECT_PATTERN).expect("pattern compiles"))
}

/// Whether a User-Agent string matches the browser-redirect pattern.
pub fn user_agent_matches(ua: &str) -> bool {
    pattern().is_match(ua).unwrap_or(false)
}

/// Browser-redirect candidate: the record's User-Agent matches the pattern.
/// A missing header is never a candidate.
pub fn detect_browser_redirect(record: &TrafficRecord) -> bool {
    record.header("user-agent").is_some_and(user_agent_matches)
}
