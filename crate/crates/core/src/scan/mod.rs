//! Static discovery over source and configuration trees.

mod rules;
pub(crate) use rules::wildcard_match;
mod secrets;

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::model::{CryptoMechanism, DiscoveryFinding, FindingKind, FindingSource, MechanismFamily};

pub use rules::{RuleSet, ScanRule};
pub use secrets::{
    detect_embedded_secret, detect_embedded_secret_with, redact_excerpt, shannon_entropy, SecretConfidence,
    SecretHeuristic, SecretSpan, EXCERPT_KEEP_CHARS,
};

/// Origin id for PEM private-key blocks no rule matched.
pub const PEM_BLOCK_ORIGIN: &str = "SECRET-PEM-BLOCK";
/// Origin id for high-entropy blobs.
pub const ENTROPY_ORIGIN: &str = "SECRET-HIGH-ENTROPY";

const PEM_ONLY: SecretHeuristic = SecretHeuristic {
    min_length: usize::MAX,
    min_entropy_bits: f64::INFINITY,
};

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Files larger than this are only checked for PEM armor.
    pub max_file_bytes: u64,
    pub secrets: Option<SecretHeuristic>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            max_file_bytes: 1 << 20,
            secrets: Some(SecretHeuristic::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub findings: Vec<DiscoveryFinding>,
    pub skipped: Vec<SkippedFile>,
    pub files_scanned: usize,
}

/// Scans every regular file below `root` with `rules`.
///
/// Findings are ordered by (path, line, rule id). Symlinks are not followed.
pub fn scan_tree(root: &Path, rules: &RuleSet, options: &ScanOptions) -> Result<ScanReport> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::Input(format!("{} is not a directory", root.display())));
    }
    std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;

    let mut files: Vec<(String, PathBuf)> = Vec::new();
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root).follow_links(false).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                files.push((relative(root, e.path()), e.into_path()));
            }
            Ok(_) => {}
            Err(e) => skipped.push(SkippedFile {
                path: e.path().map(|p| relative(root, p)).unwrap_or_default(),
                reason: e.to_string(),
            }),
        }
    }

    let per_file: Vec<std::result::Result<Vec<Keyed>, SkippedFile>> = files
        .par_iter()
        .map(|(rel, path)| scan_file(rel, path, rules, options))
        .collect();

    let mut keyed = Vec::new();
    let mut files_scanned = 0;
    for r in per_file {
        match r {
            Ok(found) => {
                files_scanned += 1;
                keyed.extend(found);
            }
            Err(skip) => skipped.push(skip),
        }
    }
    keyed.sort_by(|a, b| (&a.path, a.line, &a.finding.origin_id).cmp(&(&b.path, b.line, &b.finding.origin_id)));
    skipped.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(ScanReport {
        findings: keyed.into_iter().map(|k| k.finding).collect(),
        skipped,
        files_scanned,
    })
}

struct Keyed {
    path: String,
    line: usize,
    finding: DiscoveryFinding,
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn scan_file(
    rel: &str,
    path: &Path,
    rules: &RuleSet,
    options: &ScanOptions,
) -> std::result::Result<Vec<Keyed>, SkippedFile> {
    let skip = |reason: String| SkippedFile {
        path: rel.to_owned(),
        reason,
    };
    let meta = std::fs::metadata(path).map_err(|e| skip(e.to_string()))?;
    let bytes = std::fs::read(path).map_err(|e| skip(e.to_string()))?;
    let observed_at: DateTime<Utc> = meta
        .modified()
        .map(DateTime::<Utc>::from)
        .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);

    let binary = bytes.iter().take(8192).any(|&b| b == 0);
    let armor_only = binary || meta.len() > options.max_file_bytes;
    let text = String::from_utf8_lossy(&bytes);

    let make = |line_no: usize, origin: &str, mechanism: CryptoMechanism, kind, excerpt: &str| Keyed {
        path: rel.to_owned(),
        line: line_no,
        finding: DiscoveryFinding {
            source: FindingSource::Static,
            asset_hint: rel.to_owned(),
            location: format!("{rel}:{line_no}"),
            mechanism,
            kind,
            observed_at,
            origin_id: origin.to_owned(),
            raw_excerpt: redact_excerpt(excerpt),
            artifact_id: None,
            supplier: None,
            depends_on: None,
        },
    };

    let active: Vec<&ScanRule> = rules
        .rules
        .iter()
        .filter(|r| r.applies_to(rel))
        .filter(|r| !armor_only || r.kind == FindingKind::EmbeddedKey)
        .collect();

    let mut out = Vec::new();
    let mut key_lines = std::collections::BTreeSet::new();
    let lines: Vec<&str> = text.lines().collect();
    for (idx, line) in lines.iter().enumerate() {
        for rule in &active {
            if let Some(caps) = rule.pattern.captures(line) {
                if rule.kind == FindingKind::EmbeddedKey {
                    key_lines.insert(idx + 1);
                }
                out.push(make(idx + 1, &rule.id, rule.mechanism_for(&caps), rule.kind, line));
            }
        }
    }

    // Key material the ruleset did not cover. PEM armor is always checked;
    // the entropy heuristic only runs on ordinary text files.
    let heuristic = match options.secrets {
        Some(h) if !armor_only => h,
        _ => PEM_ONLY,
    };
    let spans = detect_embedded_secret_with(&text, &heuristic);
    if !spans.is_empty() {
        let line_starts: Vec<usize> = std::iter::once(0)
            .chain(text.match_indices('\n').map(|(i, _)| i + 1))
            .collect();
        for span in spans {
            let line_no = line_starts.partition_point(|&s| s <= span.start);
            if key_lines.contains(&line_no) {
                continue;
            }
            let line = lines.get(line_no - 1).copied().unwrap_or("");
            let (origin, mechanism) = match span.confidence {
                SecretConfidence::High => (
                    PEM_BLOCK_ORIGIN,
                    pem_label_mechanism(span.label.as_deref().unwrap_or("")),
                ),
                SecretConfidence::Med => (ENTROPY_ORIGIN, CryptoMechanism::unknown("high-entropy blob")),
            };
            key_lines.insert(line_no);
            out.push(make(line_no, origin, mechanism, FindingKind::EmbeddedKey, line));
        }
    }
    Ok(out)
}

fn pem_label_mechanism(label: &str) -> CryptoMechanism {
    let family = match label.split_whitespace().next() {
        Some("RSA") => MechanismFamily::Rsa,
        Some("EC") => MechanismFamily::Ecc,
        Some("DSA") => MechanismFamily::Dsa,
        _ => return CryptoMechanism::unknown(label.to_owned()),
    };
    CryptoMechanism::new(family, None).expect("no parameter")
}
