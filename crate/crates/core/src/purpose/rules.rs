use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::domains::{DomainCategory, Entity};
use super::tuple::SixTuple;
use crate::error::{read_to_string, Error, Result};
use crate::ontology::normalize_term;
use crate::taxonomy::Purpose;

pub const RULES_JSON: &str = include_str!("../../data/rules.json");

/// `purpose: None` stands for Unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurposeVerdict {
    pub purpose: Option<Purpose>,
    pub entity: Entity,
    pub rule_id: String,
    pub confidence: f64,
}

impl PurposeVerdict {
    pub fn is_unknown(&self) -> bool {
        self.purpose.is_none()
    }
}

/// A pluggable purpose model. Must return exactly one verdict per input.
pub trait PurposeClassifier: Send + Sync {
    fn classify(&self, tuple: &SixTuple, entity: &Entity) -> PurposeVerdict;
}

pub fn infer_purpose(
    tuple: &SixTuple,
    entity: &Entity,
    classifier: &dyn PurposeClassifier,
) -> PurposeVerdict {
    classifier.classify(tuple, entity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    First,
    Third,
}

/// All present fields must hold. An empty condition always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<DomainCategory>,
    /// Name of a keyword set that must hit the request keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<String>,
}

impl Condition {
    fn is_empty(&self) -> bool {
        self.entity.is_none() && self.category.is_none() && self.keywords.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: String,
    #[serde(default)]
    pub when: Condition,
    pub purpose: Option<Purpose>,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    keyword_sets: BTreeMap<String, Vec<String>>,
    rules: Vec<Rule>,
}

/// Precedence-ordered rules; the first whose condition holds decides.
#[derive(Debug, Clone)]
pub struct RuleTable {
    keyword_sets: BTreeMap<String, Vec<Vec<String>>>,
    rules: Vec<Rule>,
}

fn tokens(text: &str) -> Vec<String> {
    normalize_term(text)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Keyword tokens appear consecutively in the key, each as a token prefix.
fn phrase_hit(key: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty()
        && key.len() >= phrase.len()
        && key
            .windows(phrase.len())
            .any(|w| w.iter().zip(phrase).all(|(k, p)| k.starts_with(p.as_str())))
}

impl RuleTable {
    pub fn bundled() -> Self {
        Self::from_json(RULES_JSON).expect("bundled rule table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RuleFile = serde_json::from_str(text)?;
        let keyword_sets: BTreeMap<String, Vec<Vec<String>>> = file
            .keyword_sets
            .into_iter()
            .map(|(name, words)| (name, words.iter().map(|w| tokens(w)).collect()))
            .collect();
        let mut ids = BTreeSet::new();
        for (index, rule) in file.rules.iter().enumerate() {
            let err = |message: String| Error::Entry { index, message };
            if rule.id.trim().is_empty() || !ids.insert(rule.id.as_str()) {
                return Err(err(format!("rule id `{}` is empty or repeated", rule.id)));
            }
            if rule.purpose == Some(Purpose::OtherPurposes) {
                return Err(err("rules may not emit `Other Purposes`".into()));
            }
            if !(0.0..=1.0).contains(&rule.confidence) {
                return Err(err(format!(
                    "confidence {} outside [0, 1]",
                    rule.confidence
                )));
            }
            if let Some(set) = &rule.when.keywords {
                if !keyword_sets.contains_key(set) {
                    return Err(err(format!("unknown keyword set `{set}`")));
                }
            }
            if rule.when.category.is_some() && rule.when.entity == Some(EntityKind::First) {
                return Err(err("a domain category implies a third party".into()));
            }
        }
        if !file.rules.last().is_some_and(|r| r.when.is_empty()) {
            return Err(Error::Validation(
                "rule table must end with an unconditional rule".into(),
            ));
        }
        Ok(RuleTable {
            keyword_sets,
            rules: file.rules,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    fn keyword_hit(&self, set: &str, tuple: &SixTuple) -> bool {
        let Some(phrases) = self.keyword_sets.get(set) else {
            return false;
        };
        tuple.request_keys.iter().any(|key| {
            let key = tokens(key);
            phrases.iter().any(|p| phrase_hit(&key, p))
        })
    }

    fn holds(&self, cond: &Condition, tuple: &SixTuple, entity: &Entity) -> bool {
        let entity_ok = matches!(
            (cond.entity, entity),
            (None, _)
                | (Some(EntityKind::First), Entity::FirstParty)
                | (Some(EntityKind::Third), Entity::ThirdParty(_))
        );
        let category_ok = match (cond.category, entity) {
            (None, _) => true,
            (Some(want), Entity::ThirdParty(got)) => want == *got,
            (Some(_), Entity::FirstParty) => false,
        };
        entity_ok
            && category_ok
            && cond
                .keywords
                .as_deref()
                .is_none_or(|set| self.keyword_hit(set, tuple))
    }
}

impl PurposeClassifier for RuleTable {
    fn classify(&self, tuple: &SixTuple, entity: &Entity) -> PurposeVerdict {
        let rule = self
            .rules
            .iter()
            .find(|r| self.holds(&r.when, tuple, entity))
            .expect("last rule is unconditional");
        PurposeVerdict {
            purpose: rule.purpose,
            entity: *entity,
            rule_id: rule.id.clone(),
            confidence: rule.confidence,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tuple(keys: &[&str]) -> SixTuple {
        SixTuple {
            caller: "app".into(),
            system_api: String::new(),
            frequency: 0,
            endpoint: "x.example.com".into(),
            request_keys: keys.iter().map(|k| k.to_string()).collect(),
            response_excerpt: String::new(),
        }
    }

    fn verdict(keys: &[&str], entity: Entity) -> (Option<Purpose>, String) {
        let v = infer_purpose(&tuple(keys), &entity, &RuleTable::bundled());
        (v.purpose, v.rule_id)
    }

    #[test]
    fn examples() {
        assert_eq!(
            verdict(&["uid"], Entity::ThirdParty(DomainCategory::Analytics)),
            (Some(Purpose::Analytics), "R3a".into())
        );
        assert_eq!(
            verdict(&["username", "password"], Entity::FirstParty),
            (Some(Purpose::AppFunctionality), "R5".into())
        );
        assert_eq!(
            verdict(&[], Entity::ThirdParty(DomainCategory::Advertising)),
            (Some(Purpose::ThirdPartyAdvertising), "R1".into())
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(
            verdict(&["push_token", "event_name"], Entity::FirstParty).0,
            Some(Purpose::DevelopersAdvertisingOrMarketing)
        );
        assert_eq!(
            verdict(&["event_name"], Entity::FirstParty).0,
            Some(Purpose::Analytics)
        );
        assert_eq!(
            verdict(&["user.favorites"], Entity::FirstParty).0,
            Some(Purpose::ProductPersonalization)
        );
        assert_eq!(
            verdict(&["event_name"], Entity::ThirdParty(DomainCategory::Unknown)).0,
            Some(Purpose::Analytics)
        );
        assert_eq!(
            verdict(&["campaign"], Entity::ThirdParty(DomainCategory::Marketing)),
            (
                Some(Purpose::DevelopersAdvertisingOrMarketing),
                "R2b".into()
            )
        );
        assert_eq!(
            verdict(
                &["uid"],
                Entity::ThirdParty(DomainCategory::ServiceProvider)
            ),
            (None, "R6".into())
        );
    }

    #[test]
    fn phrase_matching() {
        let t = |s: &str| tokens(s);
        assert!(phrase_hit(&t("app.event_name"), &t("event_name")));
        assert!(phrase_hit(&t("notifications_enabled"), &t("notification")));
        assert!(!phrase_hit(&t("name_event"), &t("event_name")));
        assert!(!phrase_hit(&t("mypush"), &t("push")));
    }

    #[test]
    fn table_validation() {
        let other =
            r#"{"rules":[{"id":"A","when":{},"purpose":"Other Purposes","confidence":0.1}]}"#;
        assert!(matches!(
            RuleTable::from_json(other),
            Err(Error::Entry { index: 0, .. })
        ));
        let no_fallback = r#"{"rules":[{"id":"A","when":{"entity":"first"},"purpose":"Analytics","confidence":0.1}]}"#;
        assert!(matches!(
            RuleTable::from_json(no_fallback),
            Err(Error::Validation(_))
        ));
        let dup = r#"{"rules":[{"id":"A","when":{},"purpose":null,"confidence":0},{"id":"A","when":{},"purpose":null,"confidence":0}]}"#;
        assert!(RuleTable::from_json(dup).is_err());
        let missing_set = r#"{"rules":[{"id":"A","when":{"keywords":"nope"},"purpose":null,"confidence":0},{"id":"B","when":{},"purpose":null,"confidence":0}]}"#;
        assert!(RuleTable::from_json(missing_set).is_err());
    }

    #[test]
    fn bundled_never_emits_other_purposes() {
        assert!(RuleTable::bundled()
            .rules()
            .iter()
            .all(|r| r.purpose != Some(Purpose::OtherPurposes)));
    }

    fn arb_entity() -> impl Strategy<Value = Entity> {
        prop_oneof![
            Just(Entity::FirstParty),
            proptest::sample::select(DomainCategory::ALL.to_vec()).prop_map(Entity::ThirdParty),
        ]
    }

    fn arb_keys() -> impl Strategy<Value = Vec<String>> {
        let words = proptest::sample::select(vec![
            "uid",
            "push_token",
            "event_name",
            "favorite",
            "os_version",
            "email",
            "lat",
            "campaign_id",
            "session",
            "x",
        ]);
        proptest::collection::vec(words.prop_map(str::to_string), 0..5)
    }

    proptest! {
        #[test]
        fn deterministic_total_and_endpoint_blind(
            keys in arb_keys(),
            entity in arb_entity(),
            host_a in "[a-z]{1,8}\\.example",
            host_b in "[a-z]{1,8}\\.test",
        ) {
            let table = RuleTable::bundled();
            let mut t = SixTuple { request_keys: keys, ..tuple(&[]) };
            t.endpoint = host_a;
            let first = table.classify(&t, &entity);
            prop_assert_eq!(&first, &table.classify(&t, &entity));
            prop_assert!(table.rules().iter().filter(|r| r.id == first.rule_id).count() == 1);
            prop_assert!(first.purpose != Some(Purpose::OtherPurposes));
            t.endpoint = host_b;
            prop_assert_eq!(first, table.classify(&t, &entity));
        }
    }
}
