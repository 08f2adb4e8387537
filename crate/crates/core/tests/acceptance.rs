//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use qer_core::discovery::parse_certificate;
use qer_core::exposure::{
    criticality_score, diff_scenarios, evidence_penalty, exposure_status, priority_score, run_scenario,
    time_exposure_score, ExposureStatus, PriorityBand, ThreatScenario,
};
use qer_core::report::{generate_estate, portfolio_stats, EstateParams, DEFAULT_LONG_LIVED_YEARS, PK_RSA};
use qer_core::scan::{scan_tree, RuleSet, ScanOptions};
use qer_core::store::{export_structured, import_structured, ExportFormat, RegisterStore, RegisterVersion};
use qer_core::{fixture, CiaTriple, Error, EvidenceConfidence, MechanismFamily, Rating};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn reference_exposure() -> Outcome {
    let started = Instant::now();
    let entries = fixture::register_entries().map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let ids = |s: ExposureStatus| -> Vec<&str> {
        entries
            .iter()
            .filter(|e| e.exposure == s)
            .map(|e| e.qer_id.as_str())
            .collect()
    };
    let yes = ids(ExposureStatus::Yes).len();
    let mut borderline = ids(ExposureStatus::Borderline);
    let mut no = ids(ExposureStatus::No);
    borderline.sort();
    no.sort();
    ensure(entries.len() == 12, || format!("{} entries", entries.len()))?;
    ensure(yes == 9, || format!("{yes} YES"))?;
    ensure(borderline == ["QER-010"], || format!("BORDERLINE {borderline:?}"))?;
    ensure(no == ["QER-003", "QER-006"], || format!("NO {no:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("9 Yes, Borderline {borderline:?}, No {no:?} in {elapsed:.2?}"))
}

fn worked_example() -> Outcome {
    let c = criticality_score(&CiaTriple::new(Rating::High, Rating::High, Rating::Med));
    let r = priority_score(
        c,
        time_exposure_score(ExposureStatus::Yes),
        evidence_penalty(EvidenceConfidence::High),
    )
    .map_err(|e| e.to_string())?;
    ensure(r.priority.to_string() == "2.4", || format!("priority {}", r.priority))?;
    ensure(r.band == PriorityBand::CriticalW1, || format!("band {:?}", r.band))?;
    Ok(format!("priority {} band {}", r.priority, r.band.label()))
}

fn score_space() -> Outcome {
    let mut seen = BTreeSet::new();
    for c in 1..=3 {
        for e in 1..=3 {
            for p in 0..=2 {
                let r = priority_score(c, e, p).map_err(|e| e.to_string())?;
                let bands = PriorityBand::ALL
                    .iter()
                    .filter(|b| {
                        let (lo, hi) = b.range_tenths();
                        (lo..=hi).contains(&r.priority.tenths())
                    })
                    .count();
                ensure(bands == 1, || format!("{} falls in {bands} bands", r.priority))?;
                seen.insert(r.priority.tenths());
            }
        }
    }
    let expected: BTreeSet<u16> = (8..=28).step_by(2).collect();
    ensure(seen == expected, || format!("scores {seen:?}"))?;
    Ok(format!(
        "27 combinations -> {} scores from 0.8 to 2.8, one band each",
        seen.len()
    ))
}

fn boundary() -> Outcome {
    let s = exposure_status(7.0, 1.0, 8.0).map_err(|e| e.to_string())?;
    ensure(s == ExposureStatus::No, || format!("(7, 1, 8) -> {s:?}"))?;
    Ok("(7, 1, 8) -> No".into())
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_808);
    let mut violations = 0;
    let n = 10_000;
    for _ in 0..n {
        let s = rng.random_range(0.0..40.0);
        let m = rng.random_range(0.0..20.0);
        let t = rng.random_range(0.1..40.0);
        let d = rng.random_range(0.0..10.0);
        let base = exposure_status(s, m, t).map_err(|e| e.to_string())?;
        let up_s = exposure_status(s + d, m, t).map_err(|e| e.to_string())?;
        let up_m = exposure_status(s, m + d, t).map_err(|e| e.to_string())?;
        let up_t = exposure_status(s, m, t + d).map_err(|e| e.to_string())?;
        if up_s < base || up_m < base || up_t > base {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("{n} triples, 0 violations"))
}

fn scanner_corpus() -> Outcome {
    let planted_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let planted = common::plant(planted_dir.path());
    let rules = RuleSet::bundled();
    let a = scan_tree(planted_dir.path(), rules, &ScanOptions::default()).map_err(|e| e.to_string())?;
    let b = scan_tree(planted_dir.path(), rules, &ScanOptions::default()).map_err(|e| e.to_string())?;
    ensure(a == b, || "two runs differ".into())?;
    let found: BTreeSet<(String, usize, String)> = a
        .findings
        .iter()
        .filter_map(|f| {
            let (p, l) = f.location.rsplit_once(':')?;
            Some((p.to_owned(), l.parse().ok()?, f.origin_id.clone()))
        })
        .collect();
    let hit = planted.intersection(&found).count();
    ensure(hit == planted.len(), || format!("recall {hit}/{}", planted.len()))?;

    let clean = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::write(
        clean.path(),
        "src/main.rs",
        "fn main() {\n    println!(\"hello\");\n}\n",
    );
    common::write(clean.path(), "config/app.toml", "[server]\nport = 8080\n");
    let c = scan_tree(clean.path(), rules, &ScanOptions::default()).map_err(|e| e.to_string())?;
    ensure(c.findings.is_empty(), || {
        format!("{} findings on clean tree", c.findings.len())
    })?;
    Ok(format!(
        "recall {hit}/{}, clean tree 0 findings, deterministic",
        planted.len()
    ))
}

fn certificates() -> Outcome {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/certs");
    let read = |n: &str| std::fs::read(dir.join(n)).map_err(|e| e.to_string());
    let rsa = parse_certificate(&read("rsa2048.pem")?).map_err(|e| e.to_string())?;
    let ec = parse_certificate(&read("p256.pem")?).map_err(|e| e.to_string())?;
    ensure(
        rsa.public_key_algorithm.family == MechanismFamily::Rsa && rsa.key_size_bits == 2048,
        || format!("rsa parsed as {} {}", rsa.public_key_algorithm, rsa.key_size_bits),
    )?;
    ensure(
        ec.public_key_algorithm.family == MechanismFamily::Ecc && ec.key_size_bits == 256,
        || format!("ec parsed as {} {}", ec.public_key_algorithm, ec.key_size_bits),
    )?;
    let der = read("rsa2048.der")?;
    let truncated = parse_certificate(&der[..der.len() / 2]);
    ensure(matches!(truncated, Err(Error::CertificateParse { .. })), || {
        format!("truncated: {truncated:?}")
    })?;
    Ok("RSA 2048 and ECC P-256 parsed, truncated DER rejected".into())
}

fn desk_scale() -> Outcome {
    let started = Instant::now();
    let params = EstateParams::default();
    let scenario = ThreatScenario::years(8.0).map_err(|e| e.to_string())?;
    let out = generate_estate(&params)
        .and_then(|e| e.evaluate(&scenario))
        .map_err(|e| e.to_string())?;
    let version = RegisterVersion {
        version_id: 1,
        created_at: fixture::commit_time(),
        scenario,
        parent_version: None,
        entries: out.entries,
        audit_events: vec![],
    };
    let s = portfolio_stats(&version, DEFAULT_LONG_LIVED_YEARS);
    let elapsed = started.elapsed();
    let rsa = s.mechanism_distribution.get(PK_RSA).copied().unwrap_or(0.0);
    let owner = s.ownership_unknown_fraction.unwrap_or(0.0);
    let critical = s.critical_time_exposed_fraction.unwrap_or(1.0);
    ensure(s.total_assets == params.n_assets, || {
        format!("{} assets", s.total_assets)
    })?;
    ensure(s.endpoint_count == params.n_endpoints, || {
        format!("{} endpoints", s.endpoint_count)
    })?;
    ensure(s.certificate_count == params.n_certificates, || {
        format!("{} certificates", s.certificate_count)
    })?;
    ensure((rsa - 0.68).abs() <= 0.02, || format!("RSA fraction {rsa:.4}"))?;
    ensure((owner - 0.40).abs() <= 0.04, || format!("ownership-unknown {owner:.4}"))?;
    ensure(s.critical_time_exposed_count > 0 && critical < 0.03, || {
        format!("critical subset {critical:.4}")
    })?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "RSA {rsa:.3}, ownership unknown {owner:.3}, critical time-exposed {} ({:.2}%), {} endpoints, {} certs in {elapsed:.2?}",
        s.critical_time_exposed_count,
        critical * 100.0,
        s.endpoint_count,
        s.certificate_count
    ))
}

fn register_integrity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = RegisterStore::open(dir.path()).map_err(|e| e.to_string())?;
    fixture::seed_store(&store).map_err(|e| e.to_string())?;
    let a = store.export(1, ExportFormat::Structured).map_err(|e| e.to_string())?;
    let b = export_structured(&import_structured(&a).map_err(|e| e.to_string())?).into_bytes();
    ensure(a == b, || "structured export changed after import".into())?;

    let v2 = store
        .override_entry(
            1,
            "QER-010",
            1,
            "committee",
            "partner deadline",
            fixture::override_time(),
        )
        .map_err(|e| e.to_string())?;
    let count = store.versions().map_err(|e| e.to_string())?.len();
    ensure(count == 2 && v2.audit_events.len() == 1, || {
        format!("{count} versions, {} new audit events", v2.audit_events.len())
    })?;

    let barrier = Arc::new(Barrier::new(2));
    let root = dir.path().to_owned();
    let results: Vec<_> = (0..2u8)
        .map(|n| {
            let (root, barrier) = (root.clone(), barrier.clone());
            thread::spawn(move || {
                let s = RegisterStore::open(&root)?;
                barrier.wait();
                s.override_entry(2, "QER-003", 1 + n, "writer", "race", fixture::override_time())
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().expect("writer thread"))
        .collect();
    let winners = results.iter().filter(|r| r.is_ok()).count();
    let conflicts = results
        .iter()
        .filter(|r| matches!(r, Err(Error::Conflict { .. })))
        .count();
    ensure(winners == 1 && conflicts == 1, || {
        format!("{winners} winners, {conflicts} conflicts")
    })?;
    Ok("round trip byte-identical, override +1 version +1 event, race has one winner".into())
}

fn scenario_analysis() -> Outcome {
    let assets = fixture::enriched().map_err(|e| e.to_string())?.assets;
    let run = |t: f64| {
        ThreatScenario::years(t)
            .and_then(|s| run_scenario(&assets, &s))
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run(8.0)?, run(20.0)?);
    let diff = diff_scenarios(&a, &b).map_err(|e| e.to_string())?;
    let non_no: Vec<_> = b
        .outcomes
        .iter()
        .filter(|(_, o)| o.exposure != ExposureStatus::No)
        .map(|(id, o)| format!("{id} {}", o.exposure))
        .collect();
    ensure(non_no == ["QER-005 Borderline"], || format!("non-NO at 20: {non_no:?}"))?;
    Ok(format!(
        "{} rows changed; only non-NO at 20 years: {}",
        diff.changes.len(),
        non_no.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("reference-register-exposure", reference_exposure),
        ("worked-example-priority", worked_example),
        ("score-space-totality", score_space),
        ("boundary-semantics", boundary),
        ("exposure-monotonicity", monotonicity),
        ("scanner-corpus", scanner_corpus),
        ("certificate-parsing", certificates),
        ("desk-scale-aggregates", desk_scale),
        ("register-integrity", register_integrity),
        ("scenario-analysis", scenario_analysis),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
