//! The ingest → enrich → evaluate chain in one call.

use crate::enrich::{enrich, EnrichOptions, GovernanceDataset, RetentionPolicy};
use crate::error::Result;
use crate::exposure::{build_entries, QerEntry, ThreatScenario};
use crate::ingest::{normalize, AssetRules};
use crate::model::{DiscoveryFinding, ExceptionKind, ExceptionNote};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub entries: Vec<QerEntry>,
    pub exceptions: Vec<ExceptionNote>,
    pub duplicates_removed: usize,
}

pub struct PipelineInputs<'a> {
    pub findings: &'a [DiscoveryFinding],
    pub rules: &'a AssetRules,
    pub governance: &'a GovernanceDataset,
    pub policy: &'a RetentionPolicy,
    pub options: &'a EnrichOptions,
}

pub fn evaluate_register(inputs: &PipelineInputs<'_>, scenario: &ThreatScenario) -> Result<PipelineOutput> {
    let normalized = normalize(inputs.findings, inputs.rules);
    let enriched = enrich(&normalized.assets, inputs.governance, inputs.policy, inputs.options)?;
    let mut exceptions = enriched.exceptions;
    exceptions.extend(normalized.unmapped_hints.iter().map(|h| ExceptionNote {
        kind: ExceptionKind::UnmappedEvidence,
        subject: h.clone(),
        detail: "asset hint matched no asset rule".into(),
    }));
    exceptions.sort();
    exceptions.dedup();
    Ok(PipelineOutput {
        entries: build_entries(&enriched.assets, scenario)?,
        exceptions,
        duplicates_removed: normalized.duplicates_removed,
    })
}
