use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use labelint_core::binary_scan::{scan_file, LMapping};
use labelint_core::config::{Config, Resources};
use labelint_core::consistency::{aggregate_portfolio, partition};
use labelint_core::pipeline::{
    ingest, run_corpus, run_pipeline, AppInputs, AttributedObservation, IngestBundle,
};
use labelint_core::policy::{check_label_vs_policy, load_policy};
use labelint_core::purpose::{infer_purposes, AppMeta};
use labelint_core::report::{merge_reports, summarize, write_csv, Report};
use labelint_core::taxonomy::parse_label_json;
use serde::Serialize;

/// Exit status when any finding is not Consistent.
const EXIT_FINDINGS: u8 = 2;

#[derive(Parser)]
#[command(
    name = "labelint",
    version,
    about = "Check iOS privacy labels against traffic, binaries and policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Seeds {
    /// TOML config pinning seed-data paths and thresholds.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    lmapping: Option<PathBuf>,
    #[arg(long)]
    keywords: Option<PathBuf>,
    #[arg(long)]
    domains: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
}

impl Seeds {
    fn resources(&self) -> Result<Resources> {
        let mut config = match &self.config {
            Some(path) => {
                Config::load(path).with_context(|| format!("config {}", path.display()))?
            }
            None => Config::default(),
        };
        let p = &mut config.paths;
        for (slot, flag) in [
            (&mut p.ontology, &self.ontology),
            (&mut p.lmapping, &self.lmapping),
            (&mut p.keywords, &self.keywords),
            (&mut p.domains, &self.domains),
            (&mut p.rules, &self.rules),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        Resources::load(&config).context("loading seed data")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline for one app or a corpus of app directories.
    Check {
        #[arg(long, required_unless_present = "corpus")]
        label: Option<PathBuf>,
        #[arg(long, required_unless_present = "corpus")]
        har: Option<PathBuf>,
        #[arg(long, required_unless_present = "corpus")]
        meta: Option<PathBuf>,
        #[arg(long)]
        frida: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        binary: Option<PathBuf>,
        /// Directory with one subdirectory per app (label.json, traffic.har,
        /// meta.json, and optionally frida.jsonl, policy.jsonl, app.bin).
        #[arg(long, conflicts_with_all = ["label", "har", "meta", "frida", "policy", "binary"])]
        corpus: Option<PathBuf>,
        /// Report JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Findings as JSON lines.
        #[arg(long)]
        findings: Option<PathBuf>,
        /// Directory for CSV matrices.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Search a binary for sensitive-API selectors.
    ScanBinary {
        file: PathBuf,
        #[arg(long)]
        lmapping: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a capture and hook log and infer which label items were sent.
    Ingest {
        #[arg(long)]
        har: PathBuf,
        #[arg(long)]
        frida: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Attach purposes to the observations of an ingest bundle.
    Infer {
        /// Bundle written by `ingest`.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Check a label against privacy-policy statements.
    ComparePolicy {
        #[arg(long)]
        label: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Split apps into mu, gamma and nu from alpha and beta id lists.
    Partition {
        /// One app id per line.
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        beta: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge saved reports into one.
    Summarize {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value_t = 15)]
        top_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_ids(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn corpus_inputs(dir: &Path) -> Result<Vec<(String, AppInputs)>> {
    let mut apps: Vec<(String, AppInputs)> = fs::read_dir(dir)
        .with_context(|| format!("reading corpus {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            (name, AppInputs::from_dir(&e.path()))
        })
        .collect();
    apps.sort_by(|a, b| a.0.cmp(&b.0));
    if apps.is_empty() {
        bail!("corpus {} has no app directories", dir.display());
    }
    Ok(apps)
}

fn findings_exit(inconsistent: bool) -> ExitCode {
    if inconsistent {
        ExitCode::from(EXIT_FINDINGS)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Check {
            label,
            har,
            meta,
            frida,
            policy,
            binary,
            corpus,
            out,
            findings,
            csv,
            seeds,
        } => {
            let res = seeds.resources()?;
            let apps = match corpus {
                Some(dir) => {
                    let inputs = corpus_inputs(&dir)?;
                    let (names, inputs): (Vec<_>, Vec<_>) = inputs.into_iter().unzip();
                    run_corpus(&inputs, &res)?
                        .into_iter()
                        .zip(names)
                        .map(|(r, name)| r.with_context(|| format!("app {name}")))
                        .collect::<Result<Vec<_>>>()?
                }
                None => {
                    let inputs = AppInputs {
                        label: label.expect("required by clap"),
                        har: har.expect("required by clap"),
                        meta: meta.expect("required by clap"),
                        frida,
                        policy,
                        binary,
                    };
                    vec![run_pipeline(&inputs, &res)?]
                }
            };
            let report = summarize(apps, res.config.thresholds.top_n);
            if let Some(path) = findings {
                let mut lines = String::new();
                for app in &report.per_app {
                    for f in &app.findings {
                        lines.push_str(&f.to_json_line());
                        lines.push('\n');
                    }
                }
                fs::write(&path, lines).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(dir) = csv {
                write_csv(&report, &dir)?;
            }
            emit(&report, out.as_deref())?;
            Ok(findings_exit(report.has_inconsistency()))
        }
        Command::ScanBinary {
            file,
            lmapping,
            out,
        } => {
            let mapping = match lmapping {
                Some(p) => LMapping::load(&p)?,
                None => LMapping::bundled(),
            };
            emit(&scan_file(&file, &mapping)?, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Ingest {
            har,
            frida,
            out,
            seeds,
        } => {
            let res = seeds.resources()?;
            let bundle = ingest(&har, frida.as_deref(), &res).context("ingest")?;
            emit(&bundle, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Infer {
            obs,
            meta,
            out,
            seeds,
        } => {
            let res = seeds.resources()?;
            let bundle: IngestBundle = serde_json::from_str(&read(&obs)?)
                .with_context(|| format!("parsing bundle {}", obs.display()))?;
            let meta = AppMeta::load(&meta)?;
            let attributed = infer_purposes(
                &bundle.observations,
                &bundle.records,
                &bundle.events,
                &meta,
                &res.domains,
                &res.rules,
                &res.config.inference(),
            )
            .context("infer")?;
            #[derive(Serialize)]
            struct Inferred {
                observations: Vec<AttributedObservation>,
                flows: Vec<labelint_core::consistency::Flow>,
            }
            let flows = aggregate_portfolio(&attributed);
            let observations = attributed
                .into_iter()
                .map(|(observation, verdict)| AttributedObservation {
                    observation,
                    verdict,
                })
                .collect();
            emit(
                &Inferred {
                    observations,
                    flows,
                },
                out.as_deref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ComparePolicy {
            label,
            policy,
            out,
            seeds,
        } => {
            let res = seeds.resources()?;
            let label = parse_label_json(&read(&label)?).context("label")?;
            let stmts = load_policy(&policy).context("policy")?;
            let check = check_label_vs_policy(&label, &stmts, &res.ontology);
            emit(&check, out.as_deref())?;
            Ok(findings_exit(check.beta_member))
        }
        Command::Partition { alpha, beta, out } => {
            emit(
                &partition(&read_ids(&alpha)?, &read_ids(&beta)?),
                out.as_deref(),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize {
            reports,
            top_n,
            out,
            csv,
        } => {
            let parsed = reports
                .iter()
                .map(|p| {
                    Report::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let merged = merge_reports(parsed, top_n)?;
            if let Some(dir) = csv {
                write_csv(&merged, &dir)?;
            }
            emit(&merged, out.as_deref())?;
            Ok(findings_exit(merged.has_inconsistency()))
        }
    }
}

/// The cause chain on one line. Library errors already embed their cause in
/// their message, so a cause that is a suffix of the text so far is skipped.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if text.ends_with(&part) {
            continue;
        }
        if !text.is_empty() {
            text.push_str(": ");
        }
        text.push_str(&part);
    }
    text
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::FAILURE
        }
    }
}
