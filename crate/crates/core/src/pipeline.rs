//! Per-app driver: scan, ingest, infer, aggregate, check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binary_scan::{scan_file, ScanResult};
use crate::config::Resources;
use crate::consistency::{aggregate_portfolio, check_app, Finding, FindingKind, PartitionCell};
use crate::error::{read_to_string, Error, Result};
use crate::policy::{check_label_vs_policy, load_policy, PolicyCheck};
use crate::purpose::{infer_purposes, AppMeta, PurposeVerdict};
use crate::taxonomy::parse_label_json;
use crate::traffic::{
    detect_browser_redirect, infer_data_items, parse_capture_with, parse_instrumentation,
    DataObservation, InstrumentationEvent, TrafficRecord,
};

/// Input files for one app. Only the label, capture and meta are required.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppInputs {
    pub label: PathBuf,
    pub har: PathBuf,
    pub meta: PathBuf,
    pub frida: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub binary: Option<PathBuf>,
}

impl AppInputs {
    /// The conventional layout of one app directory in a corpus.
    pub fn from_dir(dir: &Path) -> Self {
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        AppInputs {
            label: dir.join("label.json"),
            har: dir.join("traffic.har"),
            meta: dir.join("meta.json"),
            frida: optional("frida.jsonl"),
            policy: optional("policy.jsonl"),
            binary: optional("app.bin"),
        }
    }
}

/// Parsed capture plus inferred observations, as written by `ingest`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestBundle {
    pub records: Vec<TrafficRecord>,
    pub events: Vec<InstrumentationEvent>,
    pub observations: Vec<DataObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributedObservation {
    pub observation: DataObservation,
    pub verdict: PurposeVerdict,
}

/// Everything learned about one app.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppReport {
    pub app_id: String,
    pub findings: Vec<Finding>,
    pub alpha: bool,
    pub beta: bool,
    pub partition_cell: PartitionCell,
    pub scan: Option<ScanResult>,
    pub policy: Option<PolicyCheck>,
    /// Observations per receiving host.
    pub endpoint_counts: BTreeMap<String, usize>,
    pub observations: Vec<AttributedObservation>,
    /// Record ids whose User-Agent matches the browser-redirect pattern.
    pub browser_redirect_candidates: Vec<String>,
}

impl AppReport {
    pub fn has_inconsistency(&self) -> bool {
        self.findings
            .iter()
            .any(|f| f.kind != FindingKind::Consistent)
    }
}

/// Parses a capture and a hook log and infers observations.
pub fn ingest(har: &Path, frida: Option<&Path>, res: &Resources) -> Result<IngestBundle> {
    let records = parse_capture_with(&read_to_string(har)?, &res.apple)?;
    let events = match frida {
        Some(path) => parse_instrumentation(&read_to_string(path)?)?,
        None => Vec::new(),
    };
    let observations = infer_data_items(
        &records,
        &events,
        &res.keywords,
        &res.lmapping,
        &res.config.inference(),
    );
    Ok(IngestBundle {
        records,
        events,
        observations,
    })
}

/// Runs every stage for one app. Errors name the failing stage.
pub fn run_pipeline(inputs: &AppInputs, res: &Resources) -> Result<AppReport> {
    let scan = inputs
        .binary
        .as_deref()
        .map(|b| scan_file(b, &res.lmapping))
        .transpose()
        .map_err(Error::in_stage("scan"))?;

    let (label, meta, bundle) = (|| {
        let label = parse_label_json(&read_to_string(&inputs.label)?)?;
        let meta = AppMeta::load(&inputs.meta)?;
        let bundle = ingest(&inputs.har, inputs.frida.as_deref(), res)?;
        Ok::<_, Error>((label, meta, bundle))
    })()
    .map_err(Error::in_stage("ingest"))?;

    let attributed = infer_purposes(
        &bundle.observations,
        &bundle.records,
        &bundle.events,
        &meta,
        &res.domains,
        &res.rules,
        &res.config.inference(),
    )
    .map_err(Error::in_stage("infer"))?;

    let flows = aggregate_portfolio(&attributed);
    let findings = check_app(&label, &flows, &res.ontology).map_err(Error::in_stage("check"))?;

    let policy = inputs
        .policy
        .as_deref()
        .map(|p| load_policy(p).map(|stmts| check_label_vs_policy(&label, &stmts, &res.ontology)))
        .transpose()
        .map_err(Error::in_stage("policy"))?;

    let alpha = scan.as_ref().is_some_and(ScanResult::is_alpha_member);
    let beta = policy.as_ref().is_some_and(|p| p.beta_member);

    let mut endpoint_counts = BTreeMap::new();
    for obs in &bundle.observations {
        *endpoint_counts.entry(obs.endpoint.clone()).or_default() += 1;
    }
    let browser_redirect_candidates = bundle
        .records
        .iter()
        .filter(|r| !r.excluded && detect_browser_redirect(r))
        .map(|r| r.id.clone())
        .collect();

    let app_id = if label.app_id.is_empty() {
        meta.bundle_id.clone()
    } else {
        label.app_id.clone()
    };
    Ok(AppReport {
        app_id,
        findings,
        alpha,
        beta,
        partition_cell: PartitionCell::of(alpha, beta),
        scan,
        policy,
        endpoint_counts,
        observations: attributed
            .into_iter()
            .map(|(observation, verdict)| AttributedObservation {
                observation,
                verdict,
            })
            .collect(),
        browser_redirect_candidates,
    })
}

/// Runs many apps on a bounded pool; results keep the input order.
pub fn run_corpus(apps: &[AppInputs], res: &Resources) -> Result<Vec<Result<AppReport>>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(res.config.thresholds.workers)
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    Ok(pool.install(|| apps.par_iter().map(|a| run_pipeline(a, res)).collect()))
}
