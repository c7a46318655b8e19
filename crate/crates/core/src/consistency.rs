//! Flow-to-label consistency: relevant statements, purpose portfolios and
//! the Neglect / Contrary / Inadequate classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::purpose::PurposeVerdict;
use crate::taxonomy::{DataItem, LabelStatement, PrivacyLabel, Purpose};
use crate::traffic::DataObservation;

/// What a flow carries: a canonical item or a raw term awaiting alignment.
/// Serialized as a bare string; canonical names parse back to `Item`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowSubject {
    Item(DataItem),
    Term(String),
}

impl FlowSubject {
    pub fn as_term(&self) -> &str {
        match self {
            FlowSubject::Item(i) => i.name(),
            FlowSubject::Term(t) => t,
        }
    }

    pub fn item(&self) -> Option<DataItem> {
        match self {
            FlowSubject::Item(i) => Some(*i),
            FlowSubject::Term(_) => None,
        }
    }
}

impl fmt::Display for FlowSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_term())
    }
}

impl From<DataItem> for FlowSubject {
    fn from(item: DataItem) -> Self {
        FlowSubject::Item(item)
    }
}

impl Serialize for FlowSubject {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_term())
    }
}

impl<'de> Deserialize<'de> for FlowSubject {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Ok(match DataItem::from_name(&text) {
            Some(item) => FlowSubject::Item(item),
            None => FlowSubject::Term(text),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowEvidence {
    pub record_id: String,
    pub rule_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub item: FlowSubject,
    /// Aggregated portfolio; Unknown verdicts contribute nothing.
    pub purposes: BTreeSet<Purpose>,
    pub evidence: Vec<FlowEvidence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingKind {
    Neglect,
    Contrary,
    Inadequate,
    Consistent,
}

impl FindingKind {
    pub const ALL: [FindingKind; 4] = [
        FindingKind::Neglect,
        FindingKind::Contrary,
        FindingKind::Inadequate,
        FindingKind::Consistent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FindingKind::Neglect => "Neglect",
            FindingKind::Contrary => "Contrary",
            FindingKind::Inadequate => "Inadequate",
            FindingKind::Consistent => "Consistent",
        }
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub app_id: String,
    pub kind: FindingKind,
    pub item: FlowSubject,
    pub label_purposes: BTreeSet<Purpose>,
    pub flow_purposes: BTreeSet<Purpose>,
    #[serde(default)]
    pub relevant_statements: Vec<LabelStatement>,
    pub evidence: Vec<FlowEvidence>,
}

#[derive(Serialize)]
struct FindingLine<'a> {
    app_id: &'a str,
    kind: FindingKind,
    item: &'a FlowSubject,
    label_purposes: &'a BTreeSet<Purpose>,
    flow_purposes: &'a BTreeSet<Purpose>,
    evidence: &'a [FlowEvidence],
}

impl Finding {
    /// The one-line JSON form used for findings streams.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&FindingLine {
            app_id: &self.app_id,
            kind: self.kind,
            item: &self.item,
            label_purposes: &self.label_purposes,
            flow_purposes: &self.flow_purposes,
            evidence: &self.evidence,
        })
        .expect("finding serializes")
    }
}

/// Groups observations by item. The portfolio is the union of known
/// purposes; an item seen only with Unknown verdicts keeps an empty one.
pub fn aggregate_portfolio(observed: &[(DataObservation, PurposeVerdict)]) -> Vec<Flow> {
    let mut grouped: BTreeMap<DataItem, (BTreeSet<Purpose>, BTreeSet<FlowEvidence>)> =
        BTreeMap::new();
    for (obs, verdict) in observed {
        let (purposes, evidence) = grouped.entry(obs.item).or_default();
        purposes.extend(verdict.purpose);
        evidence.insert(FlowEvidence {
            record_id: obs.record_id.clone(),
            rule_id: verdict.rule_id.clone(),
        });
    }
    grouped
        .into_iter()
        .map(|(item, (purposes, evidence))| Flow {
            item: FlowSubject::Item(item),
            purposes,
            evidence: evidence.into_iter().collect(),
        })
        .collect()
}

/// Statements whose item is a synonym, hypernym or hyponym of the flow's.
pub fn relevant_statements<'a>(
    label: &'a PrivacyLabel,
    flow: &Flow,
    ontology: &Ontology,
) -> Vec<&'a LabelStatement> {
    label
        .statements
        .iter()
        .filter(|s| {
            ontology
                .relate_item(flow.item.as_term(), s.item)
                .is_comparable()
        })
        .collect()
}

/// The decision rule on already-computed portfolios.
pub fn classify_portfolios(
    has_relevant: bool,
    label: &BTreeSet<Purpose>,
    flow: &BTreeSet<Purpose>,
) -> FindingKind {
    if !has_relevant {
        FindingKind::Neglect
    } else if !label.is_subset(flow) && !flow.is_subset(label) {
        FindingKind::Contrary
    } else if label.is_subset(flow) && label != flow {
        FindingKind::Inadequate
    } else {
        FindingKind::Consistent
    }
}

pub fn check_flow(label: &PrivacyLabel, flow: &Flow, ontology: &Ontology) -> Finding {
    let relevant = relevant_statements(label, flow, ontology);
    let label_purposes: BTreeSet<Purpose> = relevant
        .iter()
        .flat_map(|s| s.purposes.iter().copied())
        .collect();
    let kind = classify_portfolios(!relevant.is_empty(), &label_purposes, &flow.purposes);
    Finding {
        app_id: label.app_id.clone(),
        kind,
        item: flow.item.clone(),
        label_purposes,
        flow_purposes: flow.purposes.clone(),
        relevant_statements: relevant.into_iter().cloned().collect(),
        evidence: flow.evidence.clone(),
    }
}

/// One finding per flow, ordered by (kind, item). Flows must be unique per item.
pub fn check_app(
    label: &PrivacyLabel,
    flows: &[Flow],
    ontology: &Ontology,
) -> Result<Vec<Finding>> {
    let mut seen = BTreeSet::new();
    for flow in flows {
        if !seen.insert(&flow.item) {
            return Err(Error::DuplicateFlow(flow.item.to_string()));
        }
    }
    let mut findings: Vec<Finding> = flows
        .iter()
        .map(|f| check_flow(label, f, ontology))
        .collect();
    findings.sort_by(|a, b| (a.kind, &a.item).cmp(&(b.kind, &b.item)));
    Ok(findings)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub alpha: BTreeSet<String>,
    pub beta: BTreeSet<String>,
    pub mu: BTreeSet<String>,
    pub gamma: BTreeSet<String>,
    pub nu: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionCell {
    Mu,
    Gamma,
    Nu,
    None,
}

impl PartitionCell {
    pub fn of(alpha: bool, beta: bool) -> Self {
        match (alpha, beta) {
            (true, false) => PartitionCell::Mu,
            (true, true) => PartitionCell::Gamma,
            (false, true) => PartitionCell::Nu,
            (false, false) => PartitionCell::None,
        }
    }
}

impl Partition {
    pub fn cell(&self, app_id: &str) -> PartitionCell {
        PartitionCell::of(self.alpha.contains(app_id), self.beta.contains(app_id))
    }
}

/// mu = alpha - beta, gamma = alpha & beta, nu = beta - alpha.
pub fn partition(alpha: &BTreeSet<String>, beta: &BTreeSet<String>) -> Partition {
    Partition {
        alpha: alpha.clone(),
        beta: beta.clone(),
        mu: alpha.difference(beta).cloned().collect(),
        gamma: alpha.intersection(beta).cloned().collect(),
        nu: beta.difference(alpha).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::UsageCategory;
    use Purpose::*;

    fn stmt(item: DataItem, purposes: &[Purpose]) -> LabelStatement {
        LabelStatement::new(
            item,
            purposes.iter().copied(),
            UsageCategory::DataLinkedToYou,
        )
        .unwrap()
    }

    fn flow(item: impl Into<FlowSubject>, purposes: &[Purpose]) -> Flow {
        Flow {
            item: item.into(),
            purposes: purposes.iter().copied().collect(),
            evidence: vec![FlowEvidence {
                record_id: "r1".into(),
                rule_id: "R1".into(),
            }],
        }
    }

    fn kind(label: &PrivacyLabel, f: &Flow) -> FindingKind {
        check_flow(label, f, &Ontology::bundled()).kind
    }

    #[test]
    fn canonical_cases() {
        let o = Ontology::bundled();
        let empty = PrivacyLabel::not_collected("a");
        assert_eq!(
            kind(&empty, &flow(DataItem::DeviceId, &[Analytics])),
            FindingKind::Neglect
        );

        let label =
            PrivacyLabel::with_statements("a", vec![stmt(DataItem::DeviceId, &[AppFunctionality])]);
        assert_eq!(
            kind(&label, &flow(DataItem::DeviceId, &[ThirdPartyAdvertising])),
            FindingKind::Contrary
        );

        let label = PrivacyLabel::with_statements(
            "a",
            vec![stmt(DataItem::PreciseLocation, &[AppFunctionality])],
        );
        assert_eq!(
            kind(
                &label,
                &flow(
                    DataItem::PreciseLocation,
                    &[AppFunctionality, ThirdPartyAdvertising]
                )
            ),
            FindingKind::Inadequate
        );

        let label = PrivacyLabel::with_statements(
            "a",
            vec![stmt(
                DataItem::DeviceId,
                &[Analytics, ThirdPartyAdvertising],
            )],
        );
        let f = check_flow(&label, &flow(DataItem::DeviceId, &[Analytics]), &o);
        assert_eq!(f.kind, FindingKind::Consistent);
        assert_eq!(f.relevant_statements.len(), 1);
    }

    #[test]
    fn equal_portfolios_are_consistent() {
        let label =
            PrivacyLabel::with_statements("a", vec![stmt(DataItem::DeviceId, &[Analytics])]);
        assert_eq!(
            kind(&label, &flow(DataItem::DeviceId, &[Analytics])),
            FindingKind::Consistent
        );
    }

    #[test]
    fn relevance_through_subsumption() {
        let o = Ontology::bundled();
        let label = PrivacyLabel::with_statements(
            "a",
            vec![
                stmt(DataItem::PreciseLocation, &[AppFunctionality]),
                stmt(DataItem::DeviceId, &[Analytics]),
            ],
        );
        let gps = flow(
            FlowSubject::Term("GPS coordinates".into()),
            &[AppFunctionality],
        );
        let rel = relevant_statements(&label, &gps, &o);
        assert_eq!(rel.len(), 1);
        assert_eq!(rel[0].item, DataItem::PreciseLocation);

        let health = flow(DataItem::Health, &[Analytics]);
        assert!(relevant_statements(&label, &health, &o).is_empty());
    }

    #[test]
    fn empty_portfolio_only_neglect_or_consistent() {
        let label =
            PrivacyLabel::with_statements("a", vec![stmt(DataItem::DeviceId, &[Analytics])]);
        assert_eq!(
            kind(&label, &flow(DataItem::DeviceId, &[])),
            FindingKind::Consistent
        );
        assert_eq!(
            kind(&label, &flow(DataItem::UserId, &[])),
            FindingKind::Neglect
        );
    }

    fn obs(item: DataItem, record: &str) -> DataObservation {
        DataObservation {
            item,
            evidence: crate::traffic::Evidence::KeywordMatch {
                key_path: "k".into(),
                keyword: "k".into(),
            },
            record_id: record.into(),
            endpoint: "x.example.com".into(),
            value_excerpt: String::new(),
        }
    }

    fn verdict(purpose: Option<Purpose>) -> PurposeVerdict {
        PurposeVerdict {
            purpose,
            entity: crate::purpose::Entity::FirstParty,
            rule_id: "R".into(),
            confidence: 0.5,
        }
    }

    #[test]
    fn aggregation() {
        let flows = aggregate_portfolio(&[
            (obs(DataItem::DeviceId, "r1"), verdict(Some(Analytics))),
            (
                obs(DataItem::DeviceId, "r2"),
                verdict(Some(ThirdPartyAdvertising)),
            ),
        ]);
        assert_eq!(flows.len(), 1);
        assert_eq!(
            flows[0].purposes,
            BTreeSet::from([Analytics, ThirdPartyAdvertising])
        );
        assert_eq!(flows[0].evidence.len(), 2);

        let flows = aggregate_portfolio(&[
            (obs(DataItem::DeviceId, "r1"), verdict(Some(Analytics))),
            (obs(DataItem::UserId, "r1"), verdict(Some(Analytics))),
        ]);
        assert_eq!(flows.len(), 2);

        let flows = aggregate_portfolio(&[(obs(DataItem::DeviceId, "r1"), verdict(None))]);
        assert_eq!(flows.len(), 1);
        assert!(flows[0].purposes.is_empty());
    }

    #[test]
    fn check_app_cases() {
        let o = Ontology::bundled();
        let label =
            PrivacyLabel::with_statements("a", vec![stmt(DataItem::DeviceId, &[Analytics])]);
        assert!(check_app(&label, &[], &o).unwrap().is_empty());

        let findings = check_app(
            &label,
            &[
                flow(DataItem::UserId, &[Analytics]),
                flow(DataItem::DeviceId, &[Analytics]),
            ],
            &o,
        )
        .unwrap();
        let kinds: Vec<_> = findings.iter().map(|f| f.kind).collect();
        assert_eq!(kinds, [FindingKind::Neglect, FindingKind::Consistent]);

        let dup = check_app(
            &label,
            &[
                flow(DataItem::DeviceId, &[Analytics]),
                flow(DataItem::DeviceId, &[]),
            ],
            &o,
        );
        assert!(matches!(dup, Err(Error::DuplicateFlow(_))));
    }

    #[test]
    fn partition_examples() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
        let p = partition(&s(&["a", "b"]), &s(&["b", "c"]));
        assert_eq!((p.mu, p.gamma, p.nu), (s(&["a"]), s(&["b"]), s(&["c"])));
        let p = partition(&s(&["a", "b"]), &s(&["a", "b"]));
        assert!(p.mu.is_empty() && p.nu.is_empty());
        assert_eq!(p.gamma, s(&["a", "b"]));
        let p = partition(&s(&[]), &s(&["x"]));
        assert!(p.mu.is_empty() && p.gamma.is_empty());
        assert_eq!(p.nu, s(&["x"]));
        assert_eq!(p.cell("x"), PartitionCell::Nu);
        assert_eq!(p.cell("q"), PartitionCell::None);
    }

    #[test]
    fn finding_line_shape() {
        let label = PrivacyLabel::not_collected("app.a");
        let f = check_flow(
            &label,
            &flow(DataItem::DeviceId, &[Analytics]),
            &Ontology::bundled(),
        );
        let v: serde_json::Value = serde_json::from_str(&f.to_json_line()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            [
                "app_id",
                "evidence",
                "flow_purposes",
                "item",
                "kind",
                "label_purposes"
            ]
        );
        assert_eq!(v["kind"], "Neglect");
        assert_eq!(v["item"], "Device ID");
        assert_eq!(v["flow_purposes"][0], "Analytics");
    }

    #[test]
    fn subject_serializes_as_string() {
        let item: FlowSubject = serde_json::from_str("\"Device ID\"").unwrap();
        assert_eq!(item, FlowSubject::Item(DataItem::DeviceId));
        let term: FlowSubject = serde_json::from_str("\"GPS coordinates\"").unwrap();
        assert_eq!(term, FlowSubject::Term("GPS coordinates".into()));
    }
}
