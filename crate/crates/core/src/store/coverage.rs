use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::exposure::QerEntry;
use crate::model::{ExceptionKind, ExceptionNote, FindingSource};

/// Share of assets backed by each evidence source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub total_assets: usize,
    pub assets_with_source: BTreeMap<FindingSource, usize>,
    pub ratio: BTreeMap<FindingSource, f64>,
}

pub fn coverage_map(entries: &[QerEntry]) -> CoverageMap {
    let total = entries.len();
    let mut counts: BTreeMap<FindingSource, usize> = FindingSource::ALL.iter().map(|s| (*s, 0)).collect();
    for e in entries {
        for s in e.enriched.candidate.sources() {
            *counts.entry(s).or_default() += 1;
        }
    }
    let ratio = counts
        .iter()
        .map(|(s, n)| (*s, if total == 0 { 0.0 } else { *n as f64 / total as f64 }))
        .collect();
    CoverageMap {
        total_assets: total,
        assets_with_source: counts,
        ratio,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionRecord {
    pub kind: ExceptionKind,
    pub subject: String,
    pub detail: String,
    pub first_seen: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
}

/// Exceptions implied by the entries themselves, sorted by kind then subject.
pub fn entry_exceptions(entries: &[QerEntry]) -> Vec<ExceptionNote> {
    let mut out = Vec::new();
    for e in entries {
        let a = &e.enriched;
        if a.candidate.unmapped {
            out.push(ExceptionNote {
                kind: ExceptionKind::UnmappedEvidence,
                subject: a.candidate.asset_id.clone(),
                detail: format!("{} finding(s) matched no asset rule", a.candidate.findings.len()),
            });
        }
        if a.defaulted {
            out.push(ExceptionNote {
                kind: ExceptionKind::NoMetadata,
                subject: e.qer_id.clone(),
                detail: "no governance record; worst-case defaults applied".into(),
            });
        }
        if !a.ownership_known {
            out.push(ExceptionNote {
                kind: ExceptionKind::NoAccountableOwner,
                subject: e.qer_id.clone(),
                detail: "RACI has no accountable role".into(),
            });
        }
    }
    out.sort();
    out.dedup();
    out
}
