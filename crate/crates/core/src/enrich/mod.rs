//! Joins candidate assets with governance metadata.

mod governance;

use serde::{Deserialize, Serialize};

pub use governance::{
    derive_shelf_life, format_years, GovernanceDataset, GovernanceMetadata, GovernanceRecord, Raci, RegisterFields,
    RetentionPolicy, TargetState, GOVERNANCE_COLUMNS,
};

use crate::error::{Error, Result};
use crate::ingest::{fuse_evidence, CandidateAsset};
use crate::model::{CiaTriple, EvidenceConfidence, ExceptionKind, ExceptionNote};

/// Additive migration-duration estimate: `base + per_dependency × edges`.
/// The coefficients are placeholders to be calibrated locally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationHeuristic {
    pub base_years: f64,
    pub per_dependency_years: f64,
}

impl MigrationHeuristic {
    pub fn estimate(&self, asset: &CandidateAsset) -> f64 {
        self.base_years + self.per_dependency_years * asset.dependency_edges.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichOptions {
    /// Migration duration for assets with no governance row.
    pub default_t_migration_years: f64,
    /// Shelf life when the retention policy is empty.
    pub fallback_t_shelf_years: f64,
    pub migration_heuristic: Option<MigrationHeuristic>,
}

impl Default for EnrichOptions {
    fn default() -> Self {
        EnrichOptions {
            default_t_migration_years: 5.0,
            fallback_t_shelf_years: 15.0,
            migration_heuristic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedAsset {
    pub candidate: CandidateAsset,
    pub metadata: GovernanceMetadata,
    pub fields: RegisterFields,
    pub evidence: EvidenceConfidence,
    pub ownership_known: bool,
    /// No governance row existed; worst-case defaults were applied.
    #[serde(default)]
    pub defaulted: bool,
}

impl EnrichedAsset {
    pub fn qer_id(&self) -> &str {
        &self.fields.qer_id
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnrichOutput {
    pub assets: Vec<EnrichedAsset>,
    pub exceptions: Vec<ExceptionNote>,
}

/// Attaches governance metadata and fused evidence to every candidate.
/// Output order follows input order and no asset is dropped.
pub fn enrich(
    candidates: &[CandidateAsset],
    governance: &GovernanceDataset,
    policy: &RetentionPolicy,
    options: &EnrichOptions,
) -> Result<EnrichOutput> {
    let mut out = EnrichOutput::default();
    for c in candidates {
        let fused = fuse_evidence(c);
        if c.unmapped {
            out.exceptions.push(ExceptionNote {
                kind: ExceptionKind::UnmappedEvidence,
                subject: c.asset_id.clone(),
                detail: format!("{} finding(s) matched no asset rule", c.findings.len()),
            });
        }
        let enriched = match governance.records.get(&c.asset_id) {
            Some(rec) => {
                let mut metadata = rec.metadata.clone();
                if rec.t_migration_missing {
                    let h = options.migration_heuristic.ok_or_else(|| {
                        Error::Input(format!(
                            "asset {} has no t_migration_years and no migration heuristic is enabled",
                            c.asset_id
                        ))
                    })?;
                    metadata.t_migration_years = h.estimate(c);
                }
                let mut fields = rec.fields.clone();
                if fields.current_crypto.is_empty() {
                    fields.current_crypto = describe_mechanisms(c);
                }
                if fields.third_party_dependency.is_empty() {
                    fields.third_party_dependency = default_dependency_text(c);
                }
                EnrichedAsset {
                    ownership_known: metadata.raci.has_accountable(),
                    candidate: c.clone(),
                    metadata,
                    fields,
                    evidence: fused,
                    defaulted: false,
                }
            }
            None => {
                out.exceptions.push(ExceptionNote {
                    kind: ExceptionKind::NoMetadata,
                    subject: c.asset_id.clone(),
                    detail: "no governance record; worst-case defaults applied".into(),
                });
                let t_migration = match options.migration_heuristic {
                    Some(h) => h.estimate(c),
                    None => options.default_t_migration_years,
                };
                EnrichedAsset {
                    candidate: c.clone(),
                    metadata: GovernanceMetadata {
                        criticality: CiaTriple::ALL_HIGH,
                        t_shelf_years: policy.max_years().unwrap_or(options.fallback_t_shelf_years),
                        t_migration_years: t_migration,
                        raci: Raci::default(),
                        crypto_agility: 1,
                        target_state: TargetState::CompensatingControls,
                        next_action: "Assign accountable owner and complete governance record".into(),
                        domain_label: "Unclassified".into(),
                        retention_class: None,
                        remediation_deadline: None,
                    },
                    fields: RegisterFields {
                        qer_id: c.asset_id.clone(),
                        service_name: c.display_name.clone(),
                        current_crypto: describe_mechanisms(c),
                        third_party_dependency: default_dependency_text(c),
                        target_note: String::new(),
                    },
                    evidence: fused.min(EvidenceConfidence::Low),
                    ownership_known: false,
                    defaulted: true,
                }
            }
        };
        if !enriched.ownership_known {
            out.exceptions.push(ExceptionNote {
                kind: ExceptionKind::NoAccountableOwner,
                subject: c.asset_id.clone(),
                detail: "RACI has no accountable role".into(),
            });
        }
        out.assets.push(enriched);
    }
    Ok(out)
}

fn describe_mechanisms(c: &CandidateAsset) -> String {
    let mut labels: Vec<String> = c
        .mechanisms
        .iter()
        .map(|m| {
            let mut m = m.clone();
            m.protocol_context = None;
            m.to_string()
        })
        .collect();
    labels.dedup();
    if labels.is_empty() {
        "Unknown".into()
    } else {
        labels.join(" + ")
    }
}

fn default_dependency_text(c: &CandidateAsset) -> String {
    let suppliers: std::collections::BTreeSet<&str> = c.findings.iter().filter_map(|f| f.supplier.as_deref()).collect();
    if !suppliers.is_empty() {
        suppliers.into_iter().collect::<Vec<_>>().join(", ")
    } else if c.third_party {
        "Third party".into()
    } else {
        "None".into()
    }
}
