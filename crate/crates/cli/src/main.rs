use std::fmt::Write as _;
use std::fs;
use std::io::{ErrorKind, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{Parser, Subcommand, ValueEnum};
use qer_core::discovery::{probe_many, read_targets, write_observation_file, ProbeOptions, TlsObservation};
use qer_core::enrich::{enrich, EnrichOptions, EnrichedAsset, GovernanceDataset, MigrationHeuristic, RetentionPolicy};
use qer_core::exposure::{apply_override, build_entries, diff_scenarios, run_scenario, QerEntry, ThreatScenario};
use qer_core::ingest::{
    findings_from_observation, ingest_crypto_sbom, load_sbom, normalize, parse_dependency_map, AssetRules,
    CandidateAsset, CycloneDxAdapter,
};
use qer_core::report::{portfolio_stats, render_report, synthesize_estate, EstateParams, ReportTemplate};
use qer_core::scan::{scan_tree, RuleSet, ScanOptions};
use qer_core::store::{CommitRequest, ExportFormat, RegisterStore};
use qer_core::{fixture, jsonl, DiscoveryFinding, ExceptionKind, ExceptionNote, ProtocolContext};

/// Discovery, exposure evaluation, and governance tooling for a quantum
/// exposure register.
#[derive(Parser)]
#[command(name = "qer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a source tree for cryptographic usage and embedded keys.
    Scan {
        #[arg(long)]
        root: PathBuf,
        /// Rules file; the bundled rules are used when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write skipped files as exception records.
        #[arg(long)]
        skipped: Option<PathBuf>,
        /// Only flag PEM private-key blocks, not high-entropy literals.
        #[arg(long)]
        pem_only: bool,
    },
    /// Probe TLS endpoints and record what they negotiate.
    Probe {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, default_value_t = 5000)]
        timeout_ms: u64,
        #[arg(long, default_value_t = 8)]
        parallel: usize,
        /// Maximum new connections per second.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, value_enum, default_value_t = Floor::Tls12)]
        floor: Floor,
        /// Probe each endpoint once per protocol version.
        #[arg(long)]
        deep: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Group findings, observations, and supplier SBOMs into candidate assets.
    Ingest {
        #[arg(long, num_args = 1..)]
        findings: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        observations: Vec<PathBuf>,
        /// Crypto-SBOM files as `ASSET_ID=PATH`.
        #[arg(long, num_args = 1..)]
        sbom: Vec<String>,
        /// Dependency maps (`from,to,relation,mechanism[,supplier]`).
        #[arg(long, num_args = 1..)]
        deps: Vec<PathBuf>,
        #[arg(long)]
        asset_rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attach governance metadata and evidence confidence to candidates.
    Enrich {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        governance: PathBuf,
        #[arg(long)]
        retention_policy: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        exceptions: Option<PathBuf>,
        /// Estimate missing migration durations as BASE,PER_DEPENDENCY years.
        #[arg(long, value_parser = parse_heuristic)]
        migration_heuristic: Option<MigrationHeuristic>,
    },
    /// Evaluate exposure, priority, and waves under one threat horizon.
    Evaluate {
        #[arg(long)]
        assets: PathBuf,
        #[arg(long)]
        t_threat: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace an entry's wave. A register directory gets a new version;
    /// an entries file is rewritten in place.
    Override {
        #[arg(long)]
        register: PathBuf,
        /// Version to override in a register directory; defaults to latest.
        #[arg(long)]
        version: Option<u64>,
        #[arg(long)]
        id: String,
        #[arg(long)]
        wave: u8,
        #[arg(long)]
        actor: String,
        #[arg(long)]
        why: String,
    },
    /// Compare the same assets under two threat horizons.
    ScenarioDiff {
        #[arg(long)]
        assets: PathBuf,
        #[arg(long)]
        t_threat_a: f64,
        #[arg(long)]
        t_threat_b: f64,
    },
    /// Commit an entries file as a new register version.
    Commit {
        #[arg(long)]
        register: PathBuf,
        #[arg(long)]
        entries: PathBuf,
        #[arg(long)]
        actor: String,
        /// Expected latest version; defaults to the current latest.
        #[arg(long)]
        parent: Option<u64>,
        /// Horizon for an empty entries file.
        #[arg(long)]
        t_threat: Option<f64>,
    },
    Export {
        #[arg(long)]
        register: PathBuf,
        #[arg(long)]
        version: Option<u64>,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List register versions.
    History {
        #[arg(long)]
        register: PathBuf,
    },
    /// Coverage and open exceptions for a version.
    Exceptions {
        #[arg(long)]
        register: PathBuf,
        #[arg(long)]
        version: Option<u64>,
        /// Exception files written by `scan --skipped` or `enrich --exceptions`.
        #[arg(long, num_args = 1..)]
        extra: Vec<PathBuf>,
    },
    /// Render a plain-text report and a stats file.
    Report {
        #[arg(long)]
        register: PathBuf,
        #[arg(long)]
        version: Option<u64>,
        #[arg(long, default_value = "summary")]
        template: String,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the report path with a `.stats.json` extension.
        #[arg(long)]
        stats_out: Option<PathBuf>,
        #[arg(long, default_value_t = qer_core::report::DEFAULT_LONG_LIVED_YEARS)]
        long_lived_years: f64,
        #[arg(long, num_args = 1..)]
        extra: Vec<PathBuf>,
    },
    /// Generate a seeded synthetic estate as pipeline input files.
    Synth {
        /// TOML or JSON parameters; omitted fields take their defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Serve the register over HTTP.
    Serve {
        #[arg(long)]
        register: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Bundled reference data.
    Fixture {
        #[command(subcommand)]
        which: FixtureCommand,
    },
}

#[derive(Subcommand)]
enum FixtureCommand {
    /// Write the twelve-asset reference inputs, and optionally commit them.
    Reference {
        #[arg(long)]
        out_dir: PathBuf,
        /// Seed an empty register directory with the reference register.
        #[arg(long)]
        register: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Floor {
    #[value(name = "1.2")]
    Tls12,
    #[value(name = "1.3")]
    Tls13,
}

fn parse_heuristic(s: &str) -> Result<MigrationHeuristic, String> {
    let (a, b) = s.split_once(',').ok_or("expected BASE,PER_DEPENDENCY")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(MigrationHeuristic {
        base_years: num(a)?,
        per_dependency_years: num(b)?,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn open_store(dir: &Path) -> Result<RegisterStore> {
    RegisterStore::open_existing(dir).with_context(|| format!("opening register {}", dir.display()))
}

fn version_or_latest(store: &RegisterStore, version: Option<u64>) -> Result<u64> {
    match version {
        Some(v) => Ok(v),
        None => store.latest_id()?.context("register has no versions"),
    }
}

/// Writes to stdout. A closed pipe (e.g. `| head`) is not an error.
fn emit(body: impl AsRef<[u8]>) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(body.as_ref()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn read_notes(paths: &[PathBuf]) -> Result<Vec<ExceptionNote>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(jsonl::read::<ExceptionNote>(p)?);
    }
    Ok(out)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    run(Cli::parse().command)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Scan {
            root,
            rules,
            out,
            skipped,
            pem_only,
        } => {
            let loaded;
            let rules = match rules {
                Some(p) => {
                    loaded = RuleSet::load(&p)?;
                    &loaded
                }
                None => RuleSet::bundled(),
            };
            let options = ScanOptions {
                secrets: (!pem_only).then(Default::default),
                ..ScanOptions::default()
            };
            let report = scan_tree(&root, rules, &options)?;
            jsonl::write(&out, &report.findings)?;
            if let Some(p) = skipped {
                let notes: Vec<ExceptionNote> = report
                    .skipped
                    .iter()
                    .map(|s| ExceptionNote {
                        kind: ExceptionKind::ScanSkipped,
                        subject: s.path.clone(),
                        detail: s.reason.clone(),
                    })
                    .collect();
                jsonl::write(&p, &notes)?;
            }
            eprintln!(
                "scanned {} files: {} findings, {} skipped",
                report.files_scanned,
                report.findings.len(),
                report.skipped.len()
            );
        }
        Command::Probe {
            targets,
            timeout_ms,
            parallel,
            rate,
            floor,
            deep,
            out,
        } => {
            let endpoints = read_targets(&read(&targets)?)?;
            let options = ProbeOptions {
                timeout: Duration::from_millis(timeout_ms),
                version_floor: match floor {
                    Floor::Tls12 => ProtocolContext::Tls12,
                    Floor::Tls13 => ProtocolContext::Tls13,
                },
                parallelism: parallel,
                rate_per_second: rate,
                deep,
            };
            let observations = probe_many(&endpoints, &options)?;
            write_observation_file(&out, &observations)?;
            eprintln!("{} observations from {} endpoints", observations.len(), endpoints.len());
        }
        Command::Ingest {
            findings,
            observations,
            sbom,
            deps,
            asset_rules,
            out,
        } => {
            let mut all: Vec<DiscoveryFinding> = Vec::new();
            for p in &findings {
                all.extend(jsonl::read::<DiscoveryFinding>(p)?);
            }
            for p in &observations {
                for obs in jsonl::read::<TlsObservation>(p)? {
                    all.extend(findings_from_observation(&obs));
                }
            }
            for spec in &sbom {
                let (asset, path) = spec
                    .split_once('=')
                    .with_context(|| format!("--sbom {spec:?}: expected ASSET_ID=PATH"))?;
                for doc in load_sbom(Path::new(path), &[&CycloneDxAdapter])? {
                    all.extend(ingest_crypto_sbom(&doc, asset)?);
                }
            }
            for p in &deps {
                all.extend(parse_dependency_map(&p.display().to_string(), &read(p)?, Utc::now())?);
            }
            let rules = AssetRules::load(&asset_rules)?;
            let normalized = normalize(&all, &rules);
            jsonl::write(&out, &normalized.assets)?;
            eprintln!(
                "{} findings -> {} candidate assets ({} duplicates removed, {} unmapped hints)",
                all.len(),
                normalized.assets.len(),
                normalized.duplicates_removed,
                normalized.unmapped_hints.len()
            );
        }
        Command::Enrich {
            candidates,
            governance,
            retention_policy,
            out,
            exceptions,
            migration_heuristic,
        } => {
            let candidates: Vec<CandidateAsset> = jsonl::read(&candidates)?;
            let policy = RetentionPolicy::load(&retention_policy)?;
            let governance = GovernanceDataset::load(&governance, &policy)?;
            let options = EnrichOptions {
                migration_heuristic,
                ..EnrichOptions::default()
            };
            let output = enrich(&candidates, &governance, &policy, &options)?;
            jsonl::write(&out, &output.assets)?;
            if let Some(p) = exceptions {
                jsonl::write(&p, &output.exceptions)?;
            }
            eprintln!(
                "{} assets enriched, {} exceptions",
                output.assets.len(),
                output.exceptions.len()
            );
        }
        Command::Evaluate { assets, t_threat, out } => {
            let assets: Vec<EnrichedAsset> = jsonl::read(&assets)?;
            let entries = build_entries(&assets, &ThreatScenario::years(t_threat)?)?;
            jsonl::write(&out, &entries)?;
            eprintln!("{} entries evaluated", entries.len());
        }
        Command::Override {
            register,
            version,
            id,
            wave,
            actor,
            why,
        } => {
            if register.is_dir() {
                let store = open_store(&register)?;
                let base = version_or_latest(&store, version)?;
                let v = store.override_entry(base, &id, wave, &actor, &why, Utc::now())?;
                emit(format!("{}\n", v.version_id))?;
            } else {
                if version.is_some() {
                    bail!("--version applies to register directories only");
                }
                let mut entries: Vec<QerEntry> = jsonl::read(&register)?;
                let entry = entries
                    .iter_mut()
                    .find(|e| e.qer_id == id)
                    .with_context(|| format!("{id} not found in {}", register.display()))?;
                *entry = apply_override(entry, wave, &actor, &why, Utc::now())?;
                jsonl::write(&register, &entries)?;
            }
        }
        Command::ScenarioDiff {
            assets,
            t_threat_a,
            t_threat_b,
        } => {
            let assets: Vec<EnrichedAsset> = jsonl::read(&assets)?;
            let a = run_scenario(&assets, &ThreatScenario::years(t_threat_a)?)?;
            let b = run_scenario(&assets, &ThreatScenario::years(t_threat_b)?)?;
            let diff = diff_scenarios(&a, &b)?;
            emit(serde_json::to_string_pretty(&diff)? + "\n")?;
        }
        Command::Commit {
            register,
            entries,
            actor,
            parent,
            t_threat,
        } => {
            let store = RegisterStore::open(&register)?;
            let entries: Vec<QerEntry> = jsonl::read(&entries)?;
            let scenario = match (entries.first(), t_threat) {
                (Some(e), None) => e.scenario.clone(),
                (Some(e), Some(t)) if e.scenario.t_threat_years == t => e.scenario.clone(),
                (Some(e), Some(t)) => bail!("entries were evaluated at {} years, not {t}", e.scenario.t_threat_years),
                (None, Some(t)) => ThreatScenario::years(t)?,
                (None, None) => bail!("empty entries file needs --t-threat"),
            };
            let parent = match parent {
                Some(p) => Some(p),
                None => store.latest_id()?,
            };
            let v = store.commit(CommitRequest {
                entries,
                scenario,
                parent,
                actor,
                at: Utc::now(),
            })?;
            emit(format!("{}\n", v.version_id))?;
        }
        Command::Export {
            register,
            version,
            format,
            out,
        } => {
            let store = open_store(&register)?;
            let id = version_or_latest(&store, version)?;
            let bytes = store.export(id, ExportFormat::parse(&format)?)?;
            match out {
                Some(p) => write(&p, bytes)?,
                None => emit(bytes)?,
            }
        }
        Command::History { register } => {
            let store = open_store(&register)?;
            let mut text = format!(
                "{:>7}  {:<20}  {:>8}  {:>6}  {:>7}\n",
                "version", "created", "t_threat", "parent", "entries"
            );
            for v in store.versions()? {
                let _ = writeln!(
                    text,
                    "{:>7}  {:<20}  {:>8}  {:>6}  {:>7}",
                    v.version_id,
                    v.created_at.format("%Y-%m-%dT%H:%M:%SZ"),
                    v.t_threat,
                    v.parent_version.map_or_else(|| "-".into(), |p| p.to_string()),
                    v.entry_count
                );
            }
            emit(text)?;
        }
        Command::Exceptions {
            register,
            version,
            extra,
        } => {
            let store = open_store(&register)?;
            let id = version_or_latest(&store, version)?;
            let (coverage, records) = store.coverage_and_exceptions(id, &read_notes(&extra)?)?;
            let body = serde_json::json!({ "version_id": id, "coverage": coverage, "exceptions": records });
            emit(serde_json::to_string_pretty(&body)? + "\n")?;
        }
        Command::Report {
            register,
            version,
            template,
            out,
            stats_out,
            long_lived_years,
            extra,
        } => {
            let store = open_store(&register)?;
            let id = version_or_latest(&store, version)?;
            let v = store.load(id)?;
            let (_, exceptions) = store.coverage_and_exceptions(id, &read_notes(&extra)?)?;
            let stats = portfolio_stats(&v, long_lived_years);
            write(
                &out,
                render_report(&v, &stats, ReportTemplate::parse(&template)?, &exceptions),
            )?;
            let stats_out = stats_out.unwrap_or_else(|| out.with_extension("stats.json"));
            write(&stats_out, serde_json::to_string_pretty(&stats)? + "\n")?;
        }
        Command::Synth { params, out_dir } => {
            let params: EstateParams = match params {
                None => EstateParams::default(),
                Some(p) if p.extension().is_some_and(|e| e == "json") => serde_json::from_str(&read(&p)?)?,
                Some(p) => toml::from_str(&read(&p)?).with_context(|| format!("parsing {}", p.display()))?,
            };
            let files = synthesize_estate(&params, &out_dir)?;
            eprintln!("wrote {}", files.findings.display());
        }
        Command::Serve { register, bind } => {
            tokio::runtime::Runtime::new()?.block_on(qer_api::serve(&register, bind))?;
        }
        Command::Fixture {
            which: FixtureCommand::Reference { out_dir, register },
        } => {
            fixture::write_inputs(&out_dir)?;
            if let Some(dir) = register {
                let store = RegisterStore::open(&dir)?;
                if store.latest_id()?.is_some() {
                    bail!("{} already holds a register", dir.display());
                }
                emit(format!("{}\n", fixture::seed_store(&store)?.version_id))?;
            }
        }
    }
    Ok(())
}
