use std::collections::BTreeMap;

use proptest::prelude::*;
use qer_core::exposure::{
    apply_override, build_entries, criticality_score, diff_scenarios, evaluate_exposure, exposure_status,
    priority_score, run_scenario, ExposureStatus, PriorityBand, Score, ThreatScenario,
};
use qer_core::{fixture, CiaTriple, Error, Rating};

fn scenario(t: f64) -> ThreatScenario {
    ThreatScenario::years(t).unwrap()
}

#[test]
fn reference_statuses_from_rows() {
    // Shelf and migration per row, with the published status.
    let rows = [
        ("QER-001", 15.0, 3.0, "Yes"),
        ("QER-002", 10.0, 4.0, "Yes"),
        ("QER-003", 5.0, 2.0, "No"),
        ("QER-004", 12.0, 5.0, "Yes"),
        ("QER-005", 15.0, 6.0, "Yes"),
        ("QER-006", 7.0, 1.0, "No"),
        ("QER-007", 10.0, 6.0, "Yes"),
        ("QER-008", 12.0, 2.0, "Yes"),
        ("QER-009", 15.0, 4.0, "Yes"),
        ("QER-010", 8.0, 3.0, "Borderline"),
        ("QER-011", 10.0, 7.0, "Yes"),
        ("QER-012", 10.0, 2.0, "Yes"),
    ];
    let entries = fixture::register_entries().unwrap();
    for (id, s, m, expected) in rows {
        let status = evaluate_exposure(s, m, &scenario(8.0)).unwrap();
        assert_eq!(status, ExposureStatus::parse(expected).unwrap(), "{id}");
        let e = entries.iter().find(|e| e.qer_id == id).unwrap();
        assert_eq!(
            (e.enriched.metadata.t_shelf_years, e.enriched.metadata.t_migration_years),
            (s, m),
            "{id}"
        );
    }
}

#[test]
fn exposure_examples_and_errors() {
    assert_eq!(exposure_status(7.0, 1.0, 8.0).unwrap(), ExposureStatus::No);
    assert_eq!(exposure_status(8.0, 3.0, 8.0).unwrap(), ExposureStatus::Borderline);
    assert!(matches!(exposure_status(-1.0, 1.0, 8.0), Err(Error::Input(_))));
    assert!(matches!(exposure_status(1.0, -0.5, 8.0), Err(Error::Input(_))));
    assert!(ThreatScenario::years(0.0).is_err());
    assert_eq!(exposure_status(2.5, 0.5, 3.0).unwrap(), ExposureStatus::No);
}

#[test]
fn criticality_examples() {
    let t = |s: &str| criticality_score(&CiaTriple::parse(s).unwrap());
    assert_eq!(t("High / High / Med"), 3);
    assert_eq!(t("Low / Low / Low"), 1);
    assert_eq!(t("Med / High / High"), 3);
    assert_eq!(t("Med / Low / Med"), 2);
}

#[test]
fn priority_examples() {
    let p = |c, e, v| priority_score(c, e, v).unwrap();
    assert_eq!(p(3, 3, 0).priority.to_string(), "2.4");
    assert_eq!(p(3, 3, 0).band, PriorityBand::CriticalW1);
    assert_eq!(p(1, 1, 0).priority.to_string(), "0.8");
    assert_eq!(p(1, 1, 0).band, PriorityBand::LowW4);
    assert_eq!(p(3, 3, 2).priority.to_string(), "2.8");
    assert_eq!(p(3, 1, 0).priority.to_string(), "1.6");
    assert_eq!(p(3, 1, 0).band, PriorityBand::MediumW3);
    assert!(priority_score(0, 1, 0).is_err());
    assert!(priority_score(1, 4, 0).is_err());
    assert!(priority_score(1, 1, 3).is_err());
}

#[test]
fn score_space_matches_decimal_oracle() {
    // Independent oracle: weights as integer tenths, bands as the published
    // closed ranges in hundredths.
    let bands = [(80, 129, 4u8), (130, 189, 3), (190, 239, 2), (240, 280, 1)];
    let mut seen = std::collections::BTreeSet::new();
    for c in 1..=3u8 {
        for e in 1..=3u8 {
            for p in 0..=2u8 {
                let r = priority_score(c, e, p).unwrap();
                let hundredths = 40 * c as u32 + 40 * e as u32 + 20 * p as u32;
                assert_eq!(r.priority.tenths() as u32 * 10, hundredths);
                let waves: Vec<u8> = bands
                    .iter()
                    .filter(|(lo, hi, _)| (*lo..=*hi).contains(&hundredths))
                    .map(|b| b.2)
                    .collect();
                assert_eq!(waves, vec![r.algorithmic_wave], "{c}{e}{p}");
                seen.insert(hundredths);
                if c < 3 {
                    assert!(priority_score(c + 1, e, p).unwrap().priority > r.priority);
                }
                if e < 3 {
                    assert!(priority_score(c, e + 1, p).unwrap().priority > r.priority);
                }
                if p < 2 {
                    assert!(priority_score(c, e, p + 1).unwrap().priority > r.priority);
                }
            }
        }
    }
    let expected: std::collections::BTreeSet<u32> = (80..=280).step_by(20).collect();
    assert_eq!(seen, expected);
    assert_eq!(Score::MIN.to_string(), "0.8");
    assert_eq!(Score::MAX.to_string(), "2.8");
}

#[test]
fn scenario_eight_to_twelve_and_twenty() {
    let assets = fixture::enriched().unwrap().assets;
    let base = run_scenario(&assets, &scenario(8.0)).unwrap();
    let twelve = run_scenario(&assets, &scenario(12.0)).unwrap();
    let twenty = run_scenario(&assets, &scenario(20.0)).unwrap();

    let d = diff_scenarios(&base, &twelve).unwrap();
    let qer002 = d.changes.iter().find(|c| c.qer_id == "QER-002").unwrap();
    assert_eq!(
        (qer002.before.exposure, qer002.after.exposure),
        (ExposureStatus::Yes, ExposureStatus::Borderline)
    );

    let non_no: Vec<_> = twenty
        .outcomes
        .iter()
        .filter(|(_, o)| o.exposure != ExposureStatus::No)
        .map(|(id, o)| (id.as_str(), o.exposure))
        .collect();
    assert_eq!(non_no, vec![("QER-005", ExposureStatus::Borderline)]);
    let d = diff_scenarios(&base, &twenty).unwrap();
    assert_eq!(d.changes.len(), 10);
    assert!(diff_scenarios(&base, &base).unwrap().changes.is_empty());

    let fewer = run_scenario(&assets[..3], &scenario(8.0)).unwrap();
    assert!(matches!(diff_scenarios(&base, &fewer), Err(Error::Input(_))));
}

#[test]
fn changing_horizon_keeps_identity_fields() {
    let assets = fixture::enriched().unwrap().assets;
    let a = build_entries(&assets, &scenario(8.0)).unwrap();
    let b = build_entries(&assets, &scenario(20.0)).unwrap();
    let by_id: BTreeMap<_, _> = b.iter().map(|e| (e.qer_id.as_str(), e)).collect();
    for e in &a {
        let o = by_id[e.qer_id.as_str()];
        assert_eq!(e.enriched, o.enriched);
        assert!(a.iter().all(|x| x.scenario == e.scenario));
    }
    assert!(build_entries(&[], &scenario(8.0)).unwrap().is_empty());
}

#[test]
fn single_asset_qer009() {
    let assets = fixture::enriched().unwrap().assets;
    let one: Vec<_> = assets.into_iter().filter(|a| a.qer_id() == "QER-009").collect();
    let e = &build_entries(&one, &scenario(8.0)).unwrap()[0];
    assert_eq!(e.priority.priority.to_string(), "2.4");
    assert_eq!(e.priority.algorithmic_wave, 1);
    assert_eq!(
        e.enriched.metadata.criticality,
        CiaTriple::new(Rating::High, Rating::High, Rating::Med)
    );
}

#[test]
fn overrides_keep_algorithmic_wave() {
    let entries = fixture::algorithmic_entries(&scenario(8.0)).unwrap();
    let e = entries.iter().find(|e| e.qer_id == "QER-012").unwrap();
    let at = fixture::override_time();
    let o = apply_override(e, 2, "committee", "sequenced after PKI", at).unwrap();
    assert_eq!((o.assigned_wave, o.priority.algorithmic_wave), (2, 1));
    o.validate().unwrap();
    let same = apply_override(e, 1, "committee", "confirmed", at).unwrap();
    assert_eq!(same.assigned_wave, 1);
    assert!(same.is_overridden());
    assert!(matches!(
        apply_override(e, 2, "committee", "  ", at),
        Err(Error::Input(_))
    ));
    assert!(apply_override(e, 5, "committee", "x", at).is_err());
}

fn status_rank(s: ExposureStatus) -> u8 {
    s as u8
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn exposure_is_monotone(s in 0.0f64..40.0, m in 0.0f64..20.0, t in 0.1f64..40.0, d in 0.0f64..10.0) {
        let base = status_rank(exposure_status(s, m, t).unwrap());
        prop_assert!(status_rank(exposure_status(s + d, m, t).unwrap()) >= base);
        prop_assert!(status_rank(exposure_status(s, m + d, t).unwrap()) >= base);
        prop_assert!(status_rank(exposure_status(s, m, t + d).unwrap()) <= base);
    }

    #[test]
    fn exposure_matches_inequality(s in 0u32..40, m in 0u32..20, t in 1u32..40) {
        let st = exposure_status(s as f64, m as f64, t as f64).unwrap();
        prop_assert_eq!(st != ExposureStatus::No, s + m > t);
        prop_assert_eq!(st == ExposureStatus::Yes, s > t);
    }
}
