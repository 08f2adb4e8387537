use proptest::prelude::*;
use qer_core::enrich::{
    derive_shelf_life, enrich, EnrichOptions, GovernanceDataset, MigrationHeuristic, RetentionPolicy, TargetState,
};
use qer_core::ingest::{normalize, AssetRules, CandidateAsset};
use qer_core::{fixture, CiaTriple, Error, EvidenceConfidence, ExceptionKind, Rating};

fn policy() -> RetentionPolicy {
    RetentionPolicy::parse_csv("class,years\nidentity-longterm,15\nweb-session,0\n").unwrap()
}

#[test]
fn shelf_life_lookup() {
    assert_eq!(derive_shelf_life("identity-longterm", &policy()).unwrap(), 15.0);
    assert_eq!(derive_shelf_life("web-session", &policy()).unwrap(), 0.0);
    let err = derive_shelf_life("missing", &RetentionPolicy::default()).unwrap_err();
    assert!(matches!(&err, Error::Config(m) if m.contains("missing")), "{err:?}");
}

#[test]
fn fixture_row_qer009() {
    let out = fixture::enriched().unwrap();
    let a = out.assets.iter().find(|a| a.qer_id() == "QER-009").unwrap();
    let m = &a.metadata;
    assert_eq!(a.fields.service_name, "Customer KYC Vault");
    assert_eq!(m.criticality, CiaTriple::new(Rating::High, Rating::High, Rating::Med));
    assert_eq!((m.t_shelf_years, m.t_migration_years), (15.0, 4.0));
    assert_eq!(m.raci.owner_label(), "Chief Data Owner / Sec Eng");
    assert_eq!(m.target_state, TargetState::Pqc);
    assert_eq!(m.crypto_agility, 2);
    assert_eq!(a.evidence, EvidenceConfidence::High);
    assert!(a.ownership_known);
    assert!(out.exceptions.is_empty(), "{:?}", out.exceptions);
}

fn candidates() -> Vec<CandidateAsset> {
    let findings = fixture::findings().unwrap();
    normalize(&findings, &AssetRules::parse_csv(fixture::ASSET_RULES).unwrap()).assets
}

#[test]
fn missing_metadata_gets_worst_case_defaults() {
    let policy = fixture::policy().unwrap();
    let gov = GovernanceDataset::parse_csv(
        &fixture::GOVERNANCE
            .lines()
            .filter(|l| !l.starts_with("QER-004,"))
            .collect::<Vec<_>>()
            .join("\n"),
        &policy,
    )
    .unwrap();
    let cands = candidates();
    let out = enrich(&cands, &gov, &policy, &EnrichOptions::default()).unwrap();
    assert_eq!(out.assets.len(), cands.len());
    let a = out.assets.iter().find(|a| a.qer_id() == "QER-004").unwrap();
    assert!(a.defaulted && !a.ownership_known);
    assert_eq!(a.metadata.criticality, CiaTriple::ALL_HIGH);
    assert_eq!(a.metadata.t_shelf_years, 15.0);
    assert_eq!(a.metadata.crypto_agility, 1);
    assert_eq!(a.evidence, EvidenceConfidence::Low);
    let kinds: Vec<_> = out.exceptions.iter().map(|e| (e.kind, e.subject.as_str())).collect();
    assert!(kinds.contains(&(ExceptionKind::NoMetadata, "QER-004")));
    assert!(kinds.contains(&(ExceptionKind::NoAccountableOwner, "QER-004")));

    assert!(enrich(&[], &gov, &policy, &EnrichOptions::default())
        .unwrap()
        .assets
        .is_empty());
}

#[test]
fn blank_accountable_is_an_exception_not_an_error() {
    let policy = fixture::policy().unwrap();
    let text = fixture::GOVERNANCE.replace("Chief Data Owner", "");
    let gov = GovernanceDataset::parse_csv(&text, &policy).unwrap();
    let out = enrich(&candidates(), &gov, &policy, &EnrichOptions::default()).unwrap();
    let unowned: Vec<_> = out
        .assets
        .iter()
        .filter(|a| !a.ownership_known)
        .map(|a| a.qer_id())
        .collect();
    assert_eq!(unowned, vec!["QER-009"]);
    assert_eq!(out.exceptions.len(), 1);
}

#[test]
fn migration_heuristic_only_when_enabled() {
    let policy = fixture::policy().unwrap();
    let text: String = fixture::GOVERNANCE
        .lines()
        .map(|l| {
            if l.starts_with("QER-001,") {
                l.replacen(",identity-longterm,3,", ",identity-longterm,,", 1)
            } else {
                l.to_owned()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let gov = GovernanceDataset::parse_csv(&text, &policy).unwrap();
    assert!(matches!(
        enrich(&candidates(), &gov, &policy, &EnrichOptions::default()),
        Err(Error::Input(_))
    ));
    let opts = EnrichOptions {
        migration_heuristic: Some(MigrationHeuristic {
            base_years: 2.0,
            per_dependency_years: 0.5,
        }),
        ..EnrichOptions::default()
    };
    let out = enrich(&candidates(), &gov, &policy, &opts).unwrap();
    let a = out.assets.iter().find(|a| a.qer_id() == "QER-001").unwrap();
    assert_eq!(a.metadata.t_migration_years, 2.0);
}

#[test]
fn malformed_governance_rows_are_format_errors() {
    let policy = fixture::policy().unwrap();
    let bad_rating = fixture::GOVERNANCE.replacen("High,High,Med", "High,Huge,Med", 1);
    assert!(matches!(
        GovernanceDataset::parse_csv(&bad_rating, &policy),
        Err(Error::Format { index: 1, .. })
    ));
    let bad_agility = fixture::GOVERNANCE.replacen(",2,HYBRID,", ",9,HYBRID,", 1);
    assert!(matches!(
        GovernanceDataset::parse_csv(&bad_agility, &policy),
        Err(Error::Format { .. })
    ));
    let unknown_class = fixture::GOVERNANCE.replacen("identity-longterm", "nope", 1);
    assert!(matches!(
        GovernanceDataset::parse_csv(&unknown_class, &policy),
        Err(Error::Config(_))
    ));
}

#[test]
fn governance_round_trip() {
    let policy = fixture::policy().unwrap();
    let gov = GovernanceDataset::parse_csv(fixture::GOVERNANCE, &policy).unwrap();
    let again = GovernanceDataset::parse_csv(&gov.to_csv(), &policy).unwrap();
    assert_eq!(gov, again);
    let p2 = RetentionPolicy::parse_csv(&policy.to_csv()).unwrap();
    assert_eq!(policy, p2);
}

proptest! {
    #[test]
    fn enrichment_never_drops_assets(keep in prop::collection::vec(any::<bool>(), 12)) {
        let policy = fixture::policy().unwrap();
        let mut lines = fixture::GOVERNANCE.lines();
        let mut text = lines.next().unwrap().to_owned();
        for (line, k) in lines.zip(&keep) {
            if *k {
                text.push('\n');
                text.push_str(line);
            }
        }
        let gov = GovernanceDataset::parse_csv(&text, &policy).unwrap();
        let cands = candidates();
        let out = enrich(&cands, &gov, &policy, &EnrichOptions::default()).unwrap();
        prop_assert_eq!(out.assets.len(), cands.len());
        let unknown = out.assets.iter().filter(|a| !a.ownership_known).count();
        prop_assert_eq!(unknown, keep.iter().filter(|k| !**k).count());
        for a in out.assets.iter().filter(|a| a.defaulted) {
            prop_assert_eq!(a.evidence, EvidenceConfidence::Low);
        }
    }
}
