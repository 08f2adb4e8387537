//! The bundled twelve-asset reference register, as raw pipeline inputs.
//!
//! Everything is produced through the normal pipeline (normalize, enrich,
//! evaluate) so the fixture doubles as an end-to-end check. Published waves
//! that differ from the computed band are applied as governance overrides.

use std::fs;
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use serde::Deserialize;

use crate::enrich::{enrich, EnrichOptions, EnrichOutput, GovernanceDataset, RetentionPolicy};
use crate::error::{Error, Result};
use crate::exposure::{apply_override, build_entries, register_order, QerEntry, ThreatScenario};
use crate::ingest::{normalize, AssetRules};
use crate::model::DiscoveryFinding;
use crate::store::{CommitRequest, RegisterStore, RegisterVersion};

pub const FINDINGS: &str = include_str!("../data/reference/findings.jsonl");
pub const ASSET_RULES: &str = include_str!("../data/reference/asset-rules.csv");
pub const GOVERNANCE: &str = include_str!("../data/reference/governance.csv");
pub const RETENTION_POLICY: &str = include_str!("../data/reference/retention-policy.csv");
pub const PUBLISHED_WAVES: &str = include_str!("../data/reference/published-waves.csv");

/// Threat horizon the reference register was published under.
pub const T_THREAT_YEARS: f64 = 8.0;
pub const OVERRIDE_ACTOR: &str = "risk-committee";

/// File names used by [`write_inputs`].
pub const FILES: [(&str, &str); 5] = [
    ("findings.jsonl", FINDINGS),
    ("asset-rules.csv", ASSET_RULES),
    ("governance.csv", GOVERNANCE),
    ("retention-policy.csv", RETENTION_POLICY),
    ("published-waves.csv", PUBLISHED_WAVES),
];

pub fn override_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 2, 1, 10, 0, 0).unwrap()
}

pub fn commit_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 2, 1, 9, 0, 0).unwrap()
}

/// A published wave that replaces the computed one.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct PublishedWave {
    pub qer_id: String,
    pub wave: u8,
    pub rationale: String,
}

pub fn parse_published_waves(text: &str) -> Result<Vec<PublishedWave>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::format("published waves", i + 1, e)))
        .collect()
}

pub fn findings() -> Result<Vec<DiscoveryFinding>> {
    crate::jsonl::parse("reference findings", FINDINGS)
}

pub fn policy() -> Result<RetentionPolicy> {
    RetentionPolicy::parse_csv(RETENTION_POLICY)
}

pub fn scenario() -> ThreatScenario {
    ThreatScenario::years(T_THREAT_YEARS).expect("positive horizon")
}

/// Normalized and enriched assets for the reference register.
pub fn enriched() -> Result<EnrichOutput> {
    let findings = findings()?;
    let rules = AssetRules::parse_csv(ASSET_RULES)?;
    let policy = policy()?;
    let governance = GovernanceDataset::parse_csv(GOVERNANCE, &policy)?;
    let normalized = normalize(&findings, &rules);
    enrich(&normalized.assets, &governance, &policy, &EnrichOptions::default())
}

/// Entries with algorithmic waves only.
pub fn algorithmic_entries(scenario: &ThreatScenario) -> Result<Vec<QerEntry>> {
    build_entries(&enriched()?.assets, scenario)
}

/// Entries under the published horizon with the published waves applied.
pub fn register_entries() -> Result<Vec<QerEntry>> {
    let mut entries = algorithmic_entries(&scenario())?;
    apply_published(&mut entries, &parse_published_waves(PUBLISHED_WAVES)?)?;
    Ok(entries)
}

pub fn apply_published(entries: &mut [QerEntry], published: &[PublishedWave]) -> Result<()> {
    for p in published {
        let entry = entries
            .iter_mut()
            .find(|e| e.qer_id == p.qer_id)
            .ok_or_else(|| Error::NotFound(format!("published wave for unknown asset {}", p.qer_id)))?;
        if entry.assigned_wave != p.wave {
            *entry = apply_override(entry, p.wave, OVERRIDE_ACTOR, &p.rationale, override_time())?;
        }
    }
    entries.sort_by(register_order);
    Ok(())
}

/// Commits the reference register as the first version of an empty store.
pub fn seed_store(store: &RegisterStore) -> Result<RegisterVersion> {
    store.commit(CommitRequest {
        entries: register_entries()?,
        scenario: scenario(),
        parent: None,
        actor: OVERRIDE_ACTOR.into(),
        at: commit_time(),
    })
}

/// Writes the raw input files into `dir`.
pub fn write_inputs(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in FILES {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_inputs_parse() {
        assert_eq!(enriched().unwrap().assets.len(), 12);
        assert_eq!(parse_published_waves(PUBLISHED_WAVES).unwrap().len(), 4);
    }
}
