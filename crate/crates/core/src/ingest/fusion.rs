use std::collections::{BTreeMap, BTreeSet};

use super::CandidateAsset;
use crate::model::{DiscoveryFinding, EvidenceConfidence, FindingSource, MechanismFamily};

pub fn fuse_evidence(asset: &CandidateAsset) -> EvidenceConfidence {
    fuse_findings(&asset.findings)
}

/// Evidence confidence from the mix of sources behind a set of findings.
///
/// * HIGH: two or more sources name a common family and at least one of
///   them is a direct (static or dynamic) source.
/// * LOW: two or more sources name known families but share none.
/// * MED: otherwise, when any direct source is present.
/// * LOW: indirect evidence only, or nothing.
///
/// UNKNOWN mechanisms neither corroborate nor contradict.
pub fn fuse_findings(findings: &[DiscoveryFinding]) -> EvidenceConfidence {
    let mut present = BTreeSet::new();
    let mut families: BTreeMap<FindingSource, BTreeSet<MechanismFamily>> = BTreeMap::new();
    for f in findings {
        present.insert(f.source);
        if f.mechanism.family != MechanismFamily::Unknown {
            families.entry(f.source).or_default().insert(f.mechanism.family);
        }
    }

    let mut supporters: BTreeMap<MechanismFamily, BTreeSet<FindingSource>> = BTreeMap::new();
    for (src, fams) in &families {
        for fam in fams {
            supporters.entry(*fam).or_default().insert(*src);
        }
    }
    let corroborated = supporters
        .values()
        .any(|srcs| srcs.len() >= 2 && srcs.iter().any(|s| s.is_direct()));
    if corroborated {
        return EvidenceConfidence::High;
    }
    let contradiction = families.len() >= 2 && supporters.values().all(|s| s.len() == 1);
    if contradiction {
        return EvidenceConfidence::Low;
    }
    if present.iter().any(|s| s.is_direct()) {
        EvidenceConfidence::Med
    } else {
        EvidenceConfidence::Low
    }
}
