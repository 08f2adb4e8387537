//! Portfolio statistics, committee reports, and synthetic estates.

mod render;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use render::{render_report, ReportTemplate};
pub use synth::{generate_estate, synthesize_estate, EstateFiles, EstateParams, SyntheticEstate};

use crate::exposure::{ExposureStatus, PriorityBand};
use crate::model::{FindingKind, FindingSource, MechanismFamily};
use crate::store::RegisterVersion;

pub const DEFAULT_LONG_LIVED_YEARS: f64 = 10.0;

/// Buckets used for the public-key mix.
pub const PK_RSA: &str = "RSA";
pub const PK_ECC: &str = "ECC";
pub const PK_OTHER: &str = "OTHER_PK";

/// Aggregates over one register version. Fractions are `None` when the
/// register is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats {
    pub version_id: u64,
    pub t_threat_years: f64,
    pub total_assets: usize,
    /// Assets carrying each public-key bucket; an asset counts once per bucket.
    pub mechanism_counts: BTreeMap<String, usize>,
    /// `mechanism_counts` normalized over all buckets.
    pub mechanism_distribution: BTreeMap<String, f64>,
    pub ownership_unknown_count: usize,
    pub ownership_unknown_fraction: Option<f64>,
    pub yes_count: usize,
    pub borderline_count: usize,
    /// YES plus BORDERLINE.
    pub time_exposed_count: usize,
    pub time_exposed_fraction: Option<f64>,
    /// Time-exposed assets in the critical band.
    pub critical_time_exposed_count: usize,
    pub critical_time_exposed_fraction: Option<f64>,
    pub long_lived_threshold_years: f64,
    pub long_lived_count: usize,
    /// Assigned waves, after overrides. Every wave is present.
    pub wave_counts: BTreeMap<u8, usize>,
    pub algorithmic_wave_counts: BTreeMap<u8, usize>,
    pub overridden_count: usize,
    /// Distinct certificate fingerprints in the evidence.
    pub certificate_count: usize,
    /// Distinct endpoints behind dynamic evidence.
    pub endpoint_count: usize,
}

fn pk_bucket(f: MechanismFamily) -> Option<&'static str> {
    match f {
        MechanismFamily::Rsa => Some(PK_RSA),
        MechanismFamily::Ecc => Some(PK_ECC),
        MechanismFamily::Dh | MechanismFamily::Dsa => Some(PK_OTHER),
        _ => None,
    }
}

fn fraction(n: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| n as f64 / total as f64)
}

fn endpoint_of(location: &str) -> Option<&str> {
    let rest = location.strip_prefix("tls://")?;
    Some(rest.split('/').next().unwrap_or(rest))
}

pub fn portfolio_stats(version: &RegisterVersion, long_lived_threshold_years: f64) -> PortfolioStats {
    let entries = &version.entries;
    let total = entries.len();
    let mut mechanism_counts: BTreeMap<String, usize> =
        [PK_RSA, PK_ECC, PK_OTHER].iter().map(|k| (k.to_string(), 0)).collect();
    let mut wave_counts: BTreeMap<u8, usize> = (1..=4).map(|w| (w, 0)).collect();
    let mut algorithmic_wave_counts = wave_counts.clone();
    let mut certs = BTreeSet::new();
    let mut endpoints = BTreeSet::new();
    let (mut yes, mut borderline, mut critical, mut long_lived, mut unknown_owner, mut overridden) = (0, 0, 0, 0, 0, 0);

    for e in entries {
        let asset = &e.enriched;
        let buckets: BTreeSet<_> = asset
            .candidate
            .mechanisms
            .iter()
            .filter_map(|m| pk_bucket(m.family))
            .collect();
        for b in buckets {
            *mechanism_counts.get_mut(b).expect("bucket seeded") += 1;
        }
        for f in &asset.candidate.findings {
            if f.kind == FindingKind::Certificate {
                if let Some(id) = &f.artifact_id {
                    certs.insert(id.as_str());
                }
            }
            if f.source == FindingSource::Dynamic {
                if let Some(ep) = endpoint_of(&f.location) {
                    endpoints.insert(ep);
                }
            }
        }
        match e.exposure {
            ExposureStatus::Yes => yes += 1,
            ExposureStatus::Borderline => borderline += 1,
            ExposureStatus::No => {}
        }
        if e.exposure != ExposureStatus::No && e.priority.band == PriorityBand::CriticalW1 {
            critical += 1;
        }
        if asset.metadata.t_shelf_years >= long_lived_threshold_years {
            long_lived += 1;
        }
        if !asset.ownership_known {
            unknown_owner += 1;
        }
        if e.is_overridden() {
            overridden += 1;
        }
        *wave_counts.entry(e.assigned_wave).or_default() += 1;
        *algorithmic_wave_counts.entry(e.priority.algorithmic_wave).or_default() += 1;
    }

    let pk_total: usize = mechanism_counts.values().sum();
    let mechanism_distribution = if pk_total == 0 {
        BTreeMap::new()
    } else {
        mechanism_counts
            .iter()
            .map(|(k, n)| (k.clone(), *n as f64 / pk_total as f64))
            .collect()
    };

    PortfolioStats {
        version_id: version.version_id,
        t_threat_years: version.scenario.t_threat_years,
        total_assets: total,
        mechanism_counts,
        mechanism_distribution,
        ownership_unknown_count: unknown_owner,
        ownership_unknown_fraction: fraction(unknown_owner, total),
        yes_count: yes,
        borderline_count: borderline,
        time_exposed_count: yes + borderline,
        time_exposed_fraction: fraction(yes + borderline, total),
        critical_time_exposed_count: critical,
        critical_time_exposed_fraction: fraction(critical, total),
        long_lived_threshold_years,
        long_lived_count: long_lived,
        wave_counts,
        algorithmic_wave_counts,
        overridden_count: overridden,
        certificate_count: certs.len(),
        endpoint_count: endpoints.len(),
    }
}
