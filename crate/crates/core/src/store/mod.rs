//! Versioned, append-only persistence for the register.
//!
//! Layout under the store root:
//!
//! ```text
//! registry/index          JSON list of committed versions (the commit point)
//! registry/lock           exclusive writer lock
//! registry/v<N>/entries   the version document
//! registry/v<N>/audit     audit events, one JSON record per line
//! ```

mod coverage;
mod export;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use coverage::{coverage_map, entry_exceptions, CoverageMap, ExceptionRecord};
pub use export::{export_csv, export_structured, import_structured, ExportFormat, CSV_COLUMNS};

use crate::error::{Error, Result};
use crate::exposure::{apply_override, register_order, QerEntry, ThreatScenario};
use crate::jsonl;
use crate::model::ExceptionNote;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditAction {
    Commit,
    Override,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub timestamp: DateTime<Utc>,
    /// Caller-asserted; the store does not authenticate.
    pub actor: String,
    pub action: AuditAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qer_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterVersion {
    pub version_id: u64,
    pub created_at: DateTime<Utc>,
    pub scenario: ThreatScenario,
    pub parent_version: Option<u64>,
    pub entries: Vec<QerEntry>,
    pub audit_events: Vec<AuditEvent>,
}

impl RegisterVersion {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            e.validate()?;
            if e.scenario != self.scenario {
                return Err(Error::Input(format!(
                    "{} was evaluated under a different scenario than the version",
                    e.qer_id
                )));
            }
            if !ids.insert(e.qer_id.as_str()) {
                return Err(Error::Input(format!("duplicate QER id {}", e.qer_id)));
            }
        }
        Ok(())
    }

    pub fn entry(&self, qer_id: &str) -> Option<&QerEntry> {
        self.entries.iter().find(|e| e.qer_id == qer_id)
    }

    pub fn summary(&self) -> VersionSummary {
        VersionSummary {
            version_id: self.version_id,
            created_at: self.created_at,
            t_threat: self.scenario.t_threat_years,
            parent_version: self.parent_version,
            entry_count: self.entries.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionSummary {
    pub version_id: u64,
    pub created_at: DateTime<Utc>,
    pub t_threat: f64,
    pub parent_version: Option<u64>,
    pub entry_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Index {
    versions: Vec<VersionSummary>,
}

/// What changed between two versions, keyed by QER id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    /// `(qer_id, field, before, after)`.
    pub changed: Vec<(String, String, String, String)>,
}

impl VersionDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }

    pub fn describe(&self) -> String {
        if self.is_empty() {
            return "no entry changes".into();
        }
        let mut parts = Vec::new();
        if !self.added.is_empty() {
            parts.push(format!("added {}", self.added.join(", ")));
        }
        if !self.removed.is_empty() {
            parts.push(format!("removed {}", self.removed.join(", ")));
        }
        for (id, field, a, b) in &self.changed {
            parts.push(format!("{id} {field} {a} -> {b}"));
        }
        parts.join("; ")
    }
}

pub fn diff_versions(before: &[QerEntry], after: &[QerEntry]) -> VersionDiff {
    let a: BTreeMap<&str, &QerEntry> = before.iter().map(|e| (e.qer_id.as_str(), e)).collect();
    let b: BTreeMap<&str, &QerEntry> = after.iter().map(|e| (e.qer_id.as_str(), e)).collect();
    let mut d = VersionDiff::default();
    for (id, x) in &a {
        let Some(y) = b.get(id) else {
            d.removed.push((*id).to_owned());
            continue;
        };
        let mut field = |name: &str, p: String, q: String| {
            if p != q {
                d.changed.push(((*id).to_owned(), name.to_owned(), p, q));
            }
        };
        field("exposure", x.exposure.to_string(), y.exposure.to_string());
        field(
            "priority",
            x.priority.priority.to_string(),
            y.priority.priority.to_string(),
        );
        field("wave", x.assigned_wave.to_string(), y.assigned_wave.to_string());
        field(
            "evidence",
            x.enriched.evidence.label().into(),
            y.enriched.evidence.label().into(),
        );
        if x.enriched != y.enriched {
            field("asset", "record".into(), "updated record".into());
        }
    }
    d.added = b
        .keys()
        .filter(|k| !a.contains_key(*k))
        .map(|k| (*k).to_owned())
        .collect();
    d
}

pub struct CommitRequest {
    pub entries: Vec<QerEntry>,
    pub scenario: ThreatScenario,
    /// Must equal the latest committed version (`None` for the first commit).
    pub parent: Option<u64>,
    pub actor: String,
    pub at: DateTime<Utc>,
}

pub struct RegisterStore {
    dir: PathBuf,
    lock_timeout: Duration,
}

impl RegisterStore {
    /// Opens the store rooted at `root`, creating the layout if absent.
    pub fn open(root: &Path) -> Result<Self> {
        let dir = root.join("registry");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RegisterStore {
            dir,
            lock_timeout: Duration::from_secs(5),
        })
    }

    /// Opens an existing store without creating anything.
    pub fn open_existing(root: &Path) -> Result<Self> {
        let dir = root.join("registry");
        if !dir.join("index").is_file() {
            return Err(Error::NotFound(format!("no register at {}", root.display())));
        }
        Ok(RegisterStore {
            dir,
            lock_timeout: Duration::from_secs(5),
        })
    }

    pub fn with_lock_timeout(mut self, t: Duration) -> Self {
        self.lock_timeout = t;
        self
    }

    fn read_index(&self) -> Result<Index> {
        let path = self.dir.join("index");
        match fs::read(&path) {
            Ok(b) => serde_json::from_slice(&b).map_err(|e| Error::format(path.display().to_string(), 1, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Index::default()),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn versions(&self) -> Result<Vec<VersionSummary>> {
        Ok(self.read_index()?.versions)
    }

    pub fn latest_id(&self) -> Result<Option<u64>> {
        Ok(self.read_index()?.versions.last().map(|v| v.version_id))
    }

    pub fn latest(&self) -> Result<Option<RegisterVersion>> {
        self.latest_id()?.map(|id| self.load(id)).transpose()
    }

    pub fn load(&self, id: u64) -> Result<RegisterVersion> {
        if !self.read_index()?.versions.iter().any(|v| v.version_id == id) {
            return Err(Error::NotFound(format!("register version {id}")));
        }
        let vdir = self.dir.join(format!("v{id}"));
        let path = vdir.join("entries");
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let mut version: RegisterVersion =
            serde_json::from_slice(&bytes).map_err(|e| Error::format(path.display().to_string(), 1, e))?;
        version.audit_events = jsonl::read(&vdir.join("audit"))?;
        Ok(version)
    }

    fn lock(&self) -> Result<File> {
        let path = self.dir.join("lock");
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let start = Instant::now();
        loop {
            match f.try_lock() {
                Ok(()) => return Ok(f),
                Err(fs::TryLockError::WouldBlock) if start.elapsed() < self.lock_timeout => {
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(fs::TryLockError::WouldBlock) => return Err(Error::Locked),
                Err(fs::TryLockError::Error(e)) => return Err(Error::io(&path, e)),
            }
        }
    }

    /// Persists a new immutable version. Fails with [`Error::Conflict`] when
    /// `parent` is not the latest version.
    pub fn commit(&self, req: CommitRequest) -> Result<RegisterVersion> {
        req.scenario.validate()?;
        if req.actor.trim().is_empty() {
            return Err(Error::Input("commit actor must not be empty".into()));
        }
        let _guard = self.lock()?;
        let mut index = self.read_index()?;
        let latest = index.versions.last().map(|v| v.version_id);
        if latest != req.parent {
            return Err(Error::Conflict {
                expected: req.parent,
                actual: latest,
            });
        }
        let parent = req.parent.map(|p| self.load(p)).transpose()?;

        let mut entries = req.entries;
        entries.sort_by(register_order);
        let version_id = latest.map_or(1, |l| l + 1);
        let empty = Vec::new();
        let parent_entries = parent.as_ref().map_or(&empty, |p| &p.entries);
        let diff = diff_versions(parent_entries, &entries);

        let mut audit_events = Vec::new();
        for e in &entries {
            let Some(o) = &e.wave_override else { continue };
            let inherited = parent_entries
                .iter()
                .find(|p| p.qer_id == e.qer_id)
                .and_then(|p| p.wave_override.as_ref())
                == Some(o);
            if !inherited {
                audit_events.push(AuditEvent {
                    timestamp: o.timestamp,
                    actor: o.actor.clone(),
                    action: AuditAction::Override,
                    qer_id: Some(e.qer_id.clone()),
                    detail: format!(
                        "wave {} -> {} (algorithmic {}): {}",
                        o.from_wave, o.to_wave, e.priority.algorithmic_wave, o.rationale
                    ),
                });
            }
        }
        if audit_events.is_empty() {
            audit_events.push(AuditEvent {
                timestamp: req.at,
                actor: req.actor.clone(),
                action: AuditAction::Commit,
                qer_id: None,
                detail: match req.parent {
                    Some(p) => format!("from v{p}: {}", diff.describe()),
                    None => format!("initial version with {} entries", entries.len()),
                },
            });
        }

        let version = RegisterVersion {
            version_id,
            created_at: req.at,
            scenario: req.scenario,
            parent_version: req.parent,
            entries,
            audit_events,
        };
        version.validate()?;

        let vdir = self.dir.join(format!("v{version_id}"));
        if vdir.exists() {
            // Left behind by an interrupted commit that never reached the index.
            fs::remove_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        }
        fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
        let mut doc = version.clone();
        doc.audit_events.clear();
        write_atomic(&vdir.join("entries"), export_structured(&doc).as_bytes())?;
        write_atomic(&vdir.join("audit"), jsonl::to_string(&version.audit_events).as_bytes())?;

        index.versions.push(version.summary());
        let idx = serde_json::to_vec_pretty(&index).expect("index serializes");
        write_atomic(&self.dir.join("index"), &idx)?;
        Ok(version)
    }

    /// Records a wave override on `qer_id` as a new version whose parent is
    /// `version_id`.
    pub fn override_entry(
        &self,
        version_id: u64,
        qer_id: &str,
        to_wave: u8,
        actor: &str,
        rationale: &str,
        at: DateTime<Utc>,
    ) -> Result<RegisterVersion> {
        let base = self.load(version_id)?;
        let mut found = false;
        let entries = base
            .entries
            .iter()
            .map(|e| {
                if e.qer_id == qer_id {
                    found = true;
                    apply_override(e, to_wave, actor, rationale, at)
                } else {
                    Ok(e.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if !found {
            return Err(Error::NotFound(format!("{qer_id} in version {version_id}")));
        }
        self.commit(CommitRequest {
            entries,
            scenario: base.scenario,
            parent: Some(version_id),
            actor: actor.to_owned(),
            at,
        })
    }

    pub fn export(&self, version_id: u64, format: ExportFormat) -> Result<Vec<u8>> {
        let v = self.load(version_id)?;
        Ok(match format {
            ExportFormat::Csv => export_csv(&v),
            ExportFormat::Structured => export_structured(&v),
        }
        .into_bytes())
    }

    /// Versions from `version_id` back to the first, newest first.
    pub fn lineage(&self, version_id: u64) -> Result<Vec<RegisterVersion>> {
        let mut out = Vec::new();
        let mut next = Some(version_id);
        while let Some(id) = next {
            let v = self.load(id)?;
            next = v.parent_version;
            out.push(v);
        }
        Ok(out)
    }

    /// Checks that every override in `version_id` has exactly one matching
    /// audit event in its lineage. Returns the number of overrides.
    pub fn verify_audit(&self, version_id: u64) -> Result<usize> {
        let lineage = self.lineage(version_id)?;
        let events: Vec<&AuditEvent> = lineage
            .iter()
            .flat_map(|v| &v.audit_events)
            .filter(|e| e.action == AuditAction::Override)
            .collect();
        let mut count = 0;
        for e in &lineage[0].entries {
            let Some(o) = &e.wave_override else { continue };
            count += 1;
            let matching = events
                .iter()
                .filter(|ev| {
                    ev.qer_id.as_deref() == Some(e.qer_id.as_str())
                        && ev.timestamp == o.timestamp
                        && ev.actor == o.actor
                })
                .count();
            if matching != 1 {
                return Err(Error::Input(format!(
                    "{} override has {matching} matching audit events",
                    e.qer_id
                )));
            }
        }
        Ok(count)
    }

    /// Coverage and tracked exceptions for a version. `extra` adds
    /// exceptions from outside the register (e.g. unmapped hints, skipped
    /// scan files); first-seen times come from the version lineage.
    pub fn coverage_and_exceptions(
        &self,
        version_id: u64,
        extra: &[ExceptionNote],
    ) -> Result<(CoverageMap, Vec<ExceptionRecord>)> {
        let lineage = self.lineage(version_id)?;
        let current = &lineage[0];
        let mut notes = entry_exceptions(&current.entries);
        notes.extend(extra.iter().cloned());
        notes.sort();
        notes.dedup_by(|a, b| a.kind == b.kind && a.subject == b.subject);

        let records = notes
            .into_iter()
            .map(|n| {
                let first_seen = lineage
                    .iter()
                    .rev()
                    .find(|v| {
                        entry_exceptions(&v.entries)
                            .iter()
                            .any(|x| x.kind == n.kind && x.subject == n.subject)
                    })
                    .map_or(current.created_at, |v| v.created_at);
                ExceptionRecord {
                    kind: n.kind,
                    subject: n.subject,
                    detail: n.detail,
                    first_seen,
                    last_seen: current.created_at,
                }
            })
            .collect();
        Ok((coverage_map(&current.entries), records))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
