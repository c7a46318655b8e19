//! Corpus-level summaries: item/purpose/kind matrices, endpoint ranking and
//! totals, plus CSV export.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consistency::{partition, FindingKind, Partition};
use crate::error::{Error, Result};
use crate::pipeline::AppReport;
use crate::taxonomy::Purpose;

/// Findings of one kind for one item under one flow purpose.
/// `purpose: None` marks findings whose flow portfolio is empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatrixCell {
    pub item: String,
    pub purpose: Option<Purpose>,
    pub kind: FindingKind,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemKindCount {
    pub item: String,
    pub kind: FindingKind,
    pub count: usize,
}

/// For Contrary findings: a label purpose the flow lacks, paired with a
/// flow purpose the label lacks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub label_purpose: Purpose,
    pub flow_purpose: Purpose,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointCount {
    pub endpoint: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub per_app: Vec<AppReport>,
    /// Incidence counts: a finding adds one to every purpose of its flow.
    pub matrices: Vec<MatrixCell>,
    /// One count per finding; sums to `totals`.
    pub item_totals: Vec<ItemKindCount>,
    pub contrary_transitions: Vec<Transition>,
    pub endpoint_ranking: Vec<EndpointCount>,
    pub totals: BTreeMap<FindingKind, usize>,
    /// Apps with at least one finding of each kind.
    pub apps_with_kind: BTreeMap<FindingKind, usize>,
    pub partition: Partition,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn has_inconsistency(&self) -> bool {
        self.totals
            .iter()
            .any(|(k, n)| *k != FindingKind::Consistent && *n > 0)
    }
}

fn zeroed() -> BTreeMap<FindingKind, usize> {
    FindingKind::ALL.iter().map(|k| (*k, 0)).collect()
}

/// Builds the corpus report. Output does not depend on the order of `apps`.
pub fn summarize(mut apps: Vec<AppReport>, top_n: usize) -> Report {
    apps.sort_by_cached_key(|a| {
        (
            a.app_id.clone(),
            serde_json::to_string(a).unwrap_or_default(),
        )
    });

    let mut matrix: BTreeMap<(String, Option<Purpose>, FindingKind), usize> = BTreeMap::new();
    let mut items: BTreeMap<(String, FindingKind), usize> = BTreeMap::new();
    let mut transitions: BTreeMap<(Purpose, Purpose), usize> = BTreeMap::new();
    let mut endpoints: BTreeMap<&str, usize> = BTreeMap::new();
    let mut totals = zeroed();
    let mut apps_with_kind = zeroed();
    let mut alpha = BTreeSet::new();
    let mut beta = BTreeSet::new();

    for app in &apps {
        if app.alpha {
            alpha.insert(app.app_id.clone());
        }
        if app.beta {
            beta.insert(app.app_id.clone());
        }
        for (host, n) in &app.endpoint_counts {
            *endpoints.entry(host).or_default() += n;
        }
        let kinds: BTreeSet<FindingKind> = app.findings.iter().map(|f| f.kind).collect();
        for k in kinds {
            *apps_with_kind.entry(k).or_default() += 1;
        }
        for f in &app.findings {
            let item = f.item.to_string();
            *totals.entry(f.kind).or_default() += 1;
            *items.entry((item.clone(), f.kind)).or_default() += 1;
            if f.flow_purposes.is_empty() {
                *matrix.entry((item.clone(), None, f.kind)).or_default() += 1;
            }
            for p in &f.flow_purposes {
                *matrix.entry((item.clone(), Some(*p), f.kind)).or_default() += 1;
            }
            if f.kind == FindingKind::Contrary {
                for l in f.label_purposes.difference(&f.flow_purposes) {
                    for q in f.flow_purposes.difference(&f.label_purposes) {
                        *transitions.entry((*l, *q)).or_default() += 1;
                    }
                }
            }
        }
    }

    let mut endpoint_ranking: Vec<EndpointCount> = endpoints
        .into_iter()
        .map(|(e, count)| EndpointCount {
            endpoint: e.to_string(),
            count,
        })
        .collect();
    endpoint_ranking.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.endpoint.cmp(&b.endpoint))
    });
    endpoint_ranking.truncate(top_n);

    Report {
        matrices: matrix
            .into_iter()
            .map(|((item, purpose, kind), count)| MatrixCell {
                item,
                purpose,
                kind,
                count,
            })
            .collect(),
        item_totals: items
            .into_iter()
            .map(|((item, kind), count)| ItemKindCount { item, kind, count })
            .collect(),
        contrary_transitions: transitions
            .into_iter()
            .map(|((label_purpose, flow_purpose), count)| Transition {
                label_purpose,
                flow_purpose,
                count,
            })
            .collect(),
        endpoint_ranking,
        totals,
        apps_with_kind,
        partition: partition(&alpha, &beta),
        per_app: apps,
    }
}

/// Merges saved reports into one; an app may appear only once.
pub fn merge_reports(reports: Vec<Report>, top_n: usize) -> Result<Report> {
    let mut seen = BTreeSet::new();
    let mut apps = Vec::new();
    for r in reports {
        for app in r.per_app {
            if !seen.insert(app.app_id.clone()) {
                return Err(Error::Validation(format!(
                    "app `{}` appears in more than one report",
                    app.app_id
                )));
            }
            apps.push(app);
        }
    }
    Ok(summarize(apps, top_n))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `matrix.csv`, `item_totals.csv`, `endpoints.csv` and
/// `partition.csv` into `dir`.
pub fn write_csv(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let open = |name: &str| -> Result<csv::Writer<std::fs::File>> {
        let path = dir.join(name);
        Ok(csv::Writer::from_writer(
            std::fs::File::create(&path).map_err(io_err(&path))?,
        ))
    };
    let flush = |w: &mut csv::Writer<std::fs::File>| w.flush().map_err(io_err(dir));

    let mut w = open("matrix.csv")?;
    w.write_record(["item", "purpose", "kind", "count"])?;
    for c in &report.matrices {
        w.write_record([
            c.item.as_str(),
            c.purpose.map_or("", |p| p.name()),
            c.kind.name(),
            &c.count.to_string(),
        ])?;
    }
    flush(&mut w)?;

    let mut w = open("item_totals.csv")?;
    w.write_record(["item", "kind", "count"])?;
    for c in &report.item_totals {
        w.write_record([c.item.as_str(), c.kind.name(), &c.count.to_string()])?;
    }
    flush(&mut w)?;

    let mut w = open("endpoints.csv")?;
    w.write_record(["endpoint", "count"])?;
    for e in &report.endpoint_ranking {
        w.write_record([e.endpoint.as_str(), &e.count.to_string()])?;
    }
    flush(&mut w)?;

    let mut w = open("partition.csv")?;
    w.write_record(["app_id", "alpha", "beta", "cell"])?;
    for app in &report.per_app {
        let cell = serde_json::to_value(app.partition_cell)?;
        w.write_record([
            app.app_id.as_str(),
            &app.alpha.to_string(),
            &app.beta.to_string(),
            cell.as_str().unwrap_or_default(),
        ])?;
    }
    flush(&mut w)
}
