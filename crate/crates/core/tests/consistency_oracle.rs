use std::collections::BTreeSet;
use std::sync::OnceLock;

use labelint_core::consistency::{
    check_flow, partition, FindingKind, Flow, FlowEvidence, FlowSubject,
};
use labelint_core::ontology::Ontology;
use labelint_core::taxonomy::{DataItem, LabelStatement, PrivacyLabel, Purpose, UsageCategory};
use proptest::prelude::*;
use proptest::test_runner::Config;

/// Ten items, none related to another in the bundled ontology.
const ITEMS: [DataItem; 10] = [
    DataItem::DeviceId,
    DataItem::UserId,
    DataItem::EmailAddress,
    DataItem::PreciseLocation,
    DataItem::CoarseLocation,
    DataItem::Health,
    DataItem::Contacts,
    DataItem::PerformanceData,
    DataItem::Name,
    DataItem::PhoneNumber,
];

fn ontology() -> &'static Ontology {
    static O: OnceLock<Ontology> = OnceLock::new();
    O.get_or_init(Ontology::bundled)
}

fn purposes_of(mask: u8) -> BTreeSet<Purpose> {
    Purpose::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, p)| *p)
        .collect()
}

/// Subset test by walking every purpose, no set library calls.
fn subset(a: &BTreeSet<Purpose>, b: &BTreeSet<Purpose>) -> bool {
    Purpose::ALL.iter().all(|p| !a.contains(p) || b.contains(p))
}

fn oracle(label: &[(usize, u8)], item: usize, flow_mask: u8) -> FindingKind {
    let relevant: Vec<_> = label.iter().filter(|(i, _)| *i == item).collect();
    if relevant.is_empty() {
        return FindingKind::Neglect;
    }
    let l: BTreeSet<Purpose> = relevant.iter().flat_map(|(_, m)| purposes_of(*m)).collect();
    let f = purposes_of(flow_mask);
    let l_in_f = subset(&l, &f);
    let f_in_l = subset(&f, &l);
    match (l_in_f, f_in_l) {
        (false, false) => FindingKind::Contrary,
        (true, false) => FindingKind::Inadequate,
        _ => FindingKind::Consistent,
    }
}

fn build(label: &[(usize, u8)]) -> PrivacyLabel {
    let mut stmts: Vec<LabelStatement> = Vec::new();
    for &(i, m) in label {
        let category = if stmts.len().is_multiple_of(2) {
            UsageCategory::DataLinkedToYou
        } else {
            UsageCategory::DataUsedToTrackYou
        };
        let s = LabelStatement::new(ITEMS[i], purposes_of(m), category).unwrap();
        // duplicated items stay as separate statements; relevance must union them
        stmts.push(s);
    }
    PrivacyLabel::with_statements("app", stmts)
}

fn flow(item: usize, mask: u8) -> Flow {
    Flow {
        item: FlowSubject::Item(ITEMS[item]),
        purposes: purposes_of(mask),
        evidence: vec![FlowEvidence {
            record_id: "r".into(),
            rule_id: "R".into(),
        }],
    }
}

fn arb_label() -> impl Strategy<Value = Vec<(usize, u8)>> {
    proptest::collection::vec((0usize..10, 1u8..64), 0..8)
}

proptest! {
    #![proptest_config(Config { cases: 10_000, failure_persistence: None, ..Config::default() })]

    #[test]
    fn check_flow_matches_brute_force(
        label in arb_label(),
        item in 0usize..10,
        flow_mask in 0u8..64,
    ) {
        let o = ontology();
        let got = check_flow(&build(&label), &flow(item, flow_mask), o);
        prop_assert_eq!(got.kind, oracle(&label, item, flow_mask));
        prop_assert_eq!(got.kind == FindingKind::Neglect, got.relevant_statements.is_empty());
    }
}

proptest! {
    #![proptest_config(Config { cases: 512, failure_persistence: None, ..Config::default() })]

    #[test]
    fn over_disclosure_is_consistent(
        mut label in arb_label(),
        item in 0usize..10,
        own in 1u8..64,
        pick in any::<u8>(),
    ) {
        let o = ontology();
        label.push((item, own));
        let built = build(&label);
        let l: BTreeSet<Purpose> = built.statements.iter()
            .filter(|s| s.item == ITEMS[item])
            .flat_map(|s| s.purposes.iter().copied())
            .collect();
        let f: BTreeSet<Purpose> = l.iter().enumerate()
            .filter(|(i, _)| pick & (1 << i) != 0)
            .map(|(_, p)| *p)
            .collect();
        let fl = Flow { purposes: f, ..flow(item, 0) };
        prop_assert_eq!(check_flow(&built, &fl, o).kind, FindingKind::Consistent);
    }

    #[test]
    fn growing_a_statement_never_creates_neglect(
        label in arb_label(),
        item in 0usize..10,
        flow_mask in 0u8..64,
        extra in 0usize..6,
    ) {
        let o = ontology();
        let before = build(&label);
        let mut after = before.clone();
        for s in &mut after.statements {
            s.purposes.insert(Purpose::ALL[extra]);
        }
        let f = flow(item, flow_mask);
        if check_flow(&before, &f, o).kind != FindingKind::Neglect {
            prop_assert_ne!(check_flow(&after, &f, o).kind, FindingKind::Neglect);
        }
    }

    #[test]
    fn partition_identities(
        alpha in proptest::collection::btree_set("[a-f]{1,2}", 0..12),
        beta in proptest::collection::btree_set("[a-f]{1,2}", 0..12),
    ) {
        let p = partition(&alpha, &beta);
        prop_assert!(p.mu.is_disjoint(&p.gamma));
        prop_assert!(p.gamma.is_disjoint(&p.nu));
        prop_assert!(p.mu.is_disjoint(&p.nu));
        let mu_gamma: BTreeSet<_> = p.mu.union(&p.gamma).cloned().collect();
        let gamma_nu: BTreeSet<_> = p.gamma.union(&p.nu).cloned().collect();
        prop_assert_eq!(mu_gamma, alpha);
        prop_assert_eq!(gamma_nu, beta);
    }
}
