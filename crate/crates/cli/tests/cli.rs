use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qer_core::enrich::EnrichedAsset;
use qer_core::exposure::{QerEntry, ScenarioDiff};
use qer_core::report::PortfolioStats;
use qer_core::{fixture, jsonl};

fn qer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qer")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = qer(args);
    assert!(
        out.status.success(),
        "qer {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn reference_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let inputs = d.join("inputs");
    ok(&["fixture", "reference", "--out-dir", p(&inputs)]);

    let cand = d.join("candidates.jsonl");
    let assets = d.join("assets.jsonl");
    let entries = d.join("entries.jsonl");
    let exc = d.join("exceptions.jsonl");
    ok(&[
        "ingest",
        "--findings",
        p(&inputs.join("findings.jsonl")),
        "--asset-rules",
        p(&inputs.join("asset-rules.csv")),
        "--out",
        p(&cand),
    ]);
    ok(&[
        "enrich",
        "--candidates",
        p(&cand),
        "--governance",
        p(&inputs.join("governance.csv")),
        "--retention-policy",
        p(&inputs.join("retention-policy.csv")),
        "--out",
        p(&assets),
        "--exceptions",
        p(&exc),
    ]);
    let enriched: Vec<EnrichedAsset> = jsonl::read(&assets).unwrap();
    assert_eq!(enriched, fixture::enriched().unwrap().assets);

    ok(&[
        "evaluate",
        "--assets",
        p(&assets),
        "--t-threat",
        "8",
        "--out",
        p(&entries),
    ]);
    let got: Vec<QerEntry> = jsonl::read(&entries).unwrap();
    assert_eq!(got, fixture::algorithmic_entries(&fixture::scenario()).unwrap());

    // An entries file can be overridden in place.
    ok(&[
        "override",
        "--register",
        p(&entries),
        "--id",
        "QER-012",
        "--wave",
        "2",
        "--actor",
        "cab",
        "--why",
        "vendor lead time",
    ]);
    let got: Vec<QerEntry> = jsonl::read(&entries).unwrap();
    let e = got.iter().find(|e| e.qer_id == "QER-012").unwrap();
    assert_eq!((e.assigned_wave, e.priority.algorithmic_wave), (2, 1));

    let diff: ScenarioDiff = serde_json::from_str(&ok(&[
        "scenario-diff",
        "--assets",
        p(&assets),
        "--t-threat-a",
        "8",
        "--t-threat-b",
        "12",
    ]))
    .unwrap();
    let changed: Vec<_> = diff
        .changes
        .iter()
        .filter(|c| c.before.exposure != c.after.exposure)
        .map(|c| c.qer_id.as_str())
        .collect();
    assert!(changed.contains(&"QER-002"), "{changed:?}");
    // Shelf life alone still exceeds twelve years.
    assert!(!changed.contains(&"QER-005"), "{changed:?}");

    let reg = d.join("reg");
    assert_eq!(
        ok(&[
            "commit",
            "--register",
            p(&reg),
            "--entries",
            p(&entries),
            "--actor",
            "cab"
        ])
        .trim(),
        "1"
    );
    assert_eq!(
        ok(&[
            "override",
            "--register",
            p(&reg),
            "--id",
            "QER-010",
            "--wave",
            "1",
            "--actor",
            "cab",
            "--why",
            "regulator date",
        ])
        .trim(),
        "2"
    );
    let history = ok(&["history", "--register", p(&reg)]);
    assert_eq!(history.lines().count(), 3, "{history}");

    let csv = ok(&["export", "--register", p(&reg), "--format", "csv"]);
    assert!(csv.starts_with("QER ID,"));
    assert_eq!(csv.lines().count(), 13);

    let exceptions: serde_json::Value =
        serde_json::from_str(&ok(&["exceptions", "--register", p(&reg), "--extra", p(&exc)])).unwrap();
    assert_eq!(exceptions["version_id"], 2);
}

#[test]
fn report_writes_text_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let reg = d.join("reg");
    assert_eq!(
        ok(&[
            "fixture",
            "reference",
            "--out-dir",
            p(&d.join("in")),
            "--register",
            p(&reg)
        ])
        .trim(),
        "1"
    );
    let out = d.join("committee.txt");
    ok(&[
        "report",
        "--register",
        p(&reg),
        "--version",
        "1",
        "--template",
        "committee",
        "--out",
        p(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("Governance overrides"));
    assert!(text.contains("QER-012: wave 1 -> 2 by risk-committee"));
    let stats: PortfolioStats =
        serde_json::from_str(&fs::read_to_string(d.join("committee.stats.json")).unwrap()).unwrap();
    assert_eq!(stats.total_assets, 12);
    assert_eq!(stats.wave_counts[&1], 6);

    // Seeding twice is refused.
    assert!(!qer(&[
        "fixture",
        "reference",
        "--out-dir",
        p(&d.join("in")),
        "--register",
        p(&reg)
    ])
    .status
    .success());
}

#[test]
fn scan_and_synth() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let tree = d.join("tree");
    fs::create_dir_all(tree.join("etc")).unwrap();
    fs::write(
        tree.join("etc/site.conf"),
        "ssl_protocols TLSv1 TLSv1.2;\nssl_ciphers RSA;\n",
    )
    .unwrap();
    let findings = d.join("findings.jsonl");
    ok(&["scan", "--root", p(&tree), "--out", p(&findings)]);
    let found: Vec<qer_core::DiscoveryFinding> = jsonl::read(&findings).unwrap();
    assert!(found.iter().any(|f| f.location == "etc/site.conf:2"), "{found:?}");

    let params = d.join("params.toml");
    fs::write(
        &params,
        "n_assets = 50\nn_endpoints = 60\nn_certificates = 80\nseed = 7\n",
    )
    .unwrap();
    let a = d.join("a");
    let b = d.join("b");
    ok(&["synth", "--params", p(&params), "--out-dir", p(&a)]);
    ok(&["synth", "--params", p(&params), "--out-dir", p(&b)]);
    for f in [
        "findings.jsonl",
        "governance.csv",
        "asset-rules.csv",
        "retention-policy.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = qer(&["history", "--register", p(&dir.path().join("missing"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no register"));

    let params = dir.path().join("bad.toml");
    fs::write(&params, "rsa_fraction = 1.5\n").unwrap();
    assert!(!qer(&["synth", "--params", p(&params), "--out-dir", p(dir.path())])
        .status
        .success());
}
