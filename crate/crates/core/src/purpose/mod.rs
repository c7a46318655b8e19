//! Who receives each observation and why: entity classification, six-tuple
//! context and the purpose classifier.

mod domains;
mod rules;
mod tuple;

pub use domains::{classify_entity, AppMeta, DomainCategory, DomainDB, DomainEntry, Entity};
pub use rules::{
    infer_purpose, Condition, EntityKind, PurposeClassifier, PurposeVerdict, Rule, RuleTable,
};
pub use tuple::{build_six_tuple, SixTuple};

use crate::error::Result;
use crate::traffic::{DataObservation, InferenceConfig, InstrumentationEvent, TrafficRecord};

/// Attaches a verdict to every observation, in input order.
pub fn infer_purposes(
    observations: &[DataObservation],
    records: &[TrafficRecord],
    events: &[InstrumentationEvent],
    meta: &AppMeta,
    db: &DomainDB,
    classifier: &dyn PurposeClassifier,
    config: &InferenceConfig,
) -> Result<Vec<(DataObservation, PurposeVerdict)>> {
    observations
        .iter()
        .map(|obs| {
            let tuple = build_six_tuple(obs, events, records, config)?;
            let entity = classify_entity(&obs.endpoint, meta, db);
            Ok((obs.clone(), infer_purpose(&tuple, &entity, classifier)))
        })
        .collect()
}
