//! Label-vs-policy checks over pre-extracted policy statements.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consistency::{check_flow, Finding, FindingKind, Flow, FlowEvidence, FlowSubject};
use crate::error::{read_to_string, Error, Result};
use crate::ontology::{normalize_term, Ontology};
use crate::taxonomy::{DataItem, PrivacyLabel, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyEntity {
    FirstParty,
    ThirdParty,
}

impl PolicyEntity {
    fn token(self) -> &'static str {
        match self {
            PolicyEntity::FirstParty => "first",
            PolicyEntity::ThirdParty => "third",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyStatement {
    pub data_term: String,
    pub purpose_term: String,
    pub entity: PolicyEntity,
    /// 1-based line in the source file, for evidence.
    pub line: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStatement {
    data: String,
    purpose: String,
    entity: String,
    #[serde(default)]
    sentiment: Option<String>,
}

/// JSONL `{"data","purpose","entity":"first"|"third"}`. Negative statements
/// are rejected: only positive disclosures are modelled.
pub fn parse_policy_statements(text: &str) -> Result<Vec<PolicyStatement>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let err = |message: String| Error::Line {
            line: line_no,
            message,
        };
        let raw: RawStatement = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let entity = match raw.entity.trim().to_ascii_lowercase().as_str() {
            "first" => PolicyEntity::FirstParty,
            "third" => PolicyEntity::ThirdParty,
            other => return Err(err(format!("unknown entity `{other}`"))),
        };
        match raw.sentiment.as_deref().map(str::trim) {
            None | Some("positive") => {}
            Some("negative") => {
                return Err(err("negative-sentiment statements are not supported".into()))
            }
            Some(other) => return Err(err(format!("unknown sentiment `{other}`"))),
        }
        if raw.data.trim().is_empty() {
            return Err(err("empty data term".into()));
        }
        out.push(PolicyStatement {
            data_term: raw.data,
            purpose_term: raw.purpose,
            entity,
            line: line_no,
        });
    }
    Ok(out)
}

pub fn load_policy(path: &Path) -> Result<Vec<PolicyStatement>> {
    parse_policy_statements(&read_to_string(path)?)
}

/// Entity-sensitive purpose alignment; anything unmapped is Other Purposes.
pub fn align_purpose(purpose_term: &str, entity: PolicyEntity) -> Purpose {
    match (normalize_term(purpose_term).as_str(), entity) {
        ("advertising", PolicyEntity::ThirdParty) => Purpose::ThirdPartyAdvertising,
        ("advertising" | "marketing", PolicyEntity::FirstParty) => {
            Purpose::DevelopersAdvertisingOrMarketing
        }
        ("analytics", _) => Purpose::Analytics,
        ("functionality", _) => Purpose::AppFunctionality,
        ("personalization", _) => Purpose::ProductPersonalization,
        _ => Purpose::OtherPurposes,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyCheck {
    pub findings: Vec<Finding>,
    pub beta_member: bool,
    /// Data terms that align to no label item; they never count toward beta.
    pub unaligned: Vec<String>,
}

/// Policy statements become per-item portfolios that are checked against
/// the label exactly like observed flows.
pub fn check_label_vs_policy(
    label: &PrivacyLabel,
    statements: &[PolicyStatement],
    ontology: &Ontology,
) -> PolicyCheck {
    let mut portfolios: BTreeMap<DataItem, (BTreeSet<Purpose>, BTreeSet<FlowEvidence>)> =
        BTreeMap::new();
    let mut unaligned = BTreeSet::new();
    for stmt in statements {
        let items = ontology.align_to_items(&stmt.data_term);
        if items.is_empty() {
            unaligned.insert(stmt.data_term.clone());
            continue;
        }
        let purpose = align_purpose(&stmt.purpose_term, stmt.entity);
        for item in items {
            let (purposes, evidence) = portfolios.entry(item).or_default();
            purposes.insert(purpose);
            evidence.insert(FlowEvidence {
                record_id: format!("policy:{}", stmt.line),
                rule_id: format!(
                    "align:{}/{}",
                    normalize_term(&stmt.purpose_term),
                    stmt.entity.token()
                ),
            });
        }
    }
    let mut findings: Vec<Finding> = portfolios
        .into_iter()
        .map(|(item, (purposes, evidence))| {
            let flow = Flow {
                item: FlowSubject::Item(item),
                purposes,
                evidence: evidence.into_iter().collect(),
            };
            check_flow(label, &flow, ontology)
        })
        .collect();
    findings.sort_by(|a, b| (a.kind, &a.item).cmp(&(b.kind, &b.item)));
    let beta_member = findings.iter().any(|f| f.kind != FindingKind::Consistent);
    PolicyCheck {
        findings,
        beta_member,
        unaligned: unaligned.into_iter().collect(),
    }
}
