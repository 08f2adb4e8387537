//! Seeded synthetic estates for desk-scale end-to-end runs.
//!
//! Each asset draws from its own ChaCha stream derived from the seed, so the
//! output does not depend on thread scheduling. Endpoint and certificate
//! placement uses stream 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::enrich::{format_years, EnrichOptions, GovernanceDataset, RetentionPolicy, GOVERNANCE_COLUMNS};
use crate::error::{Error, Result};
use crate::exposure::ThreatScenario;
use crate::ingest::{AssetRule, AssetRules, SystemContext};
use crate::model::{
    CryptoMechanism, DiscoveryFinding, EvidenceConfidence, FindingKind, FindingSource, MechanismFamily,
    ProtocolContext, Rating, UsageRole,
};
use crate::pipeline::{evaluate_register, PipelineInputs, PipelineOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstateParams {
    pub n_assets: usize,
    pub n_endpoints: usize,
    pub n_certificates: usize,
    /// Share of assets whose public-key mechanism is RSA; the rest use ECC.
    pub rsa_fraction: f64,
    pub owner_unknown_fraction: f64,
    /// `(years, weight)` pairs for the confidentiality horizon.
    pub shelf_distribution: Vec<(f64, f64)>,
    /// `(years, weight)` pairs for the migration duration.
    pub migration_distribution: Vec<(f64, f64)>,
    pub evidence_mix: BTreeMap<EvidenceConfidence, f64>,
    pub seed: u64,
}

impl Default for EstateParams {
    /// A tenth of a large bank's estate with a thin long-shelf tail.
    fn default() -> Self {
        EstateParams {
            n_assets: 2000,
            n_endpoints: 2435,
            n_certificates: 8720,
            rsa_fraction: 0.68,
            owner_unknown_fraction: 0.40,
            shelf_distribution: vec![
                (1.0, 0.30),
                (3.0, 0.30),
                (5.0, 0.26),
                (7.0, 0.12),
                (12.0, 0.015),
                (15.0, 0.005),
            ],
            migration_distribution: vec![(1.0, 0.6), (2.0, 0.4)],
            evidence_mix: BTreeMap::from([
                (EvidenceConfidence::High, 0.5),
                (EvidenceConfidence::Med, 0.35),
                (EvidenceConfidence::Low, 0.15),
            ]),
            seed: 42,
        }
    }
}

impl EstateParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Input(m));
        if self.n_assets == 0 {
            return bad("n_assets must be positive".into());
        }
        for (name, v) in [
            ("rsa_fraction", self.rsa_fraction),
            ("owner_unknown_fraction", self.owner_unknown_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, dist) in [
            ("shelf_distribution", &self.shelf_distribution),
            ("migration_distribution", &self.migration_distribution),
        ] {
            if dist.is_empty() {
                return bad(format!("{name} is empty"));
            }
            for (years, w) in dist {
                if !years.is_finite() || *years < 0.0 {
                    return bad(format!("{name} has invalid years {years}"));
                }
                if !w.is_finite() || *w <= 0.0 {
                    return bad(format!("{name} weights must be positive, got {w}"));
                }
            }
        }
        if self.evidence_mix.is_empty() || self.evidence_mix.values().any(|w| !w.is_finite() || *w <= 0.0) {
            return bad("evidence_mix weights must be positive".into());
        }
        let dynamic_possible = self.evidence_mix.keys().any(|l| *l != EvidenceConfidence::Low);
        if self.n_endpoints > 0 && !dynamic_possible {
            return bad("endpoints need HIGH or MED evidence in evidence_mix".into());
        }
        if self.n_certificates > 0 && self.n_endpoints == 0 {
            return bad("certificates need at least one endpoint".into());
        }
        Ok(())
    }
}

/// A generated estate in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEstate {
    pub findings: Vec<DiscoveryFinding>,
    pub governance_csv: String,
    pub asset_rules: AssetRules,
    pub retention_policy_csv: String,
}

impl SyntheticEstate {
    /// Runs the estate through the full pipeline.
    pub fn evaluate(&self, scenario: &ThreatScenario) -> Result<PipelineOutput> {
        let policy = RetentionPolicy::parse_csv(&self.retention_policy_csv)?;
        let governance = GovernanceDataset::parse_csv(&self.governance_csv, &policy)?;
        evaluate_register(
            &PipelineInputs {
                findings: &self.findings,
                rules: &self.asset_rules,
                governance: &governance,
                policy: &policy,
                options: &EnrichOptions::default(),
            },
            scenario,
        )
    }
}

/// Paths written by [`synthesize_estate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EstateFiles {
    pub findings: PathBuf,
    pub governance: PathBuf,
    pub asset_rules: PathBuf,
    pub retention_policy: PathBuf,
}

struct AssetDraw {
    id: String,
    slug: String,
    family: MechanismFamily,
    evidence: EvidenceConfidence,
    owner_known: bool,
    cia: [Rating; 3],
    shelf: f64,
    migration: f64,
    agility: u8,
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap()
}

fn stream(seed: u64, n: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(n);
    r
}

fn weighted<T: Copy>(pairs: &[(T, f64)]) -> (Vec<T>, WeightedIndex<f64>) {
    let values = pairs.iter().map(|(v, _)| *v).collect();
    let idx = WeightedIndex::new(pairs.iter().map(|(_, w)| *w)).expect("validated weights");
    (values, idx)
}

fn rating(r: &mut ChaCha8Rng) -> Rating {
    match r.random_range(0..3) {
        0 => Rating::Low,
        1 => Rating::Med,
        _ => Rating::High,
    }
}

fn mechanism(family: MechanismFamily, usage: UsageRole) -> CryptoMechanism {
    let param = match family {
        MechanismFamily::Rsa => "2048",
        _ => "P-256",
    };
    CryptoMechanism::new(family, Some(param))
        .expect("valid parameter")
        .with_usage(usage)
}

pub fn generate_estate(params: &EstateParams) -> Result<SyntheticEstate> {
    params.validate()?;
    let width = params.n_assets.to_string().len().max(4);
    let shelf = weighted(&params.shelf_distribution);
    let migration = weighted(&params.migration_distribution);
    let evidence_pairs: Vec<_> = params.evidence_mix.iter().map(|(k, v)| (*k, *v)).collect();
    let evidence = weighted(&evidence_pairs);

    let draws: Vec<AssetDraw> = (0..params.n_assets)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(params.seed, i as u64 + 1);
            let family = if r.random_bool(params.rsa_fraction) {
                MechanismFamily::Rsa
            } else {
                MechanismFamily::Ecc
            };
            let owner_known = !r.random_bool(params.owner_unknown_fraction);
            let ev = evidence.0[evidence.1.sample(&mut r)];
            let cia = [rating(&mut r), rating(&mut r), rating(&mut r)];
            let s = shelf.0[shelf.1.sample(&mut r)];
            let m = migration.0[migration.1.sample(&mut r)];
            AssetDraw {
                id: format!("SYN-{:0width$}", i + 1),
                slug: format!("syn-{:0width$}", i + 1),
                family,
                evidence: ev,
                owner_known,
                cia,
                shelf: s,
                migration: m,
                agility: r.random_range(1..=5),
            }
        })
        .collect();

    // Endpoints go to assets with dynamic-capable evidence: one each while
    // they last, then uniformly. Certificates spread over endpoints the same way.
    let mut placement = stream(params.seed, 0);
    let dynamic: Vec<usize> = (0..draws.len())
        .filter(|i| draws[*i].evidence != EvidenceConfidence::Low)
        .collect();
    let mut endpoints_of: Vec<Vec<usize>> = vec![Vec::new(); draws.len()];
    let mut endpoint_owner = Vec::new();
    if !dynamic.is_empty() {
        for e in 0..params.n_endpoints {
            let owner = if e < dynamic.len() {
                dynamic[e]
            } else {
                dynamic[placement.random_range(0..dynamic.len())]
            };
            endpoints_of[owner].push(e);
            endpoint_owner.push(owner);
        }
    }
    let mut certs_of: Vec<Vec<usize>> = vec![Vec::new(); endpoint_owner.len()];
    if !endpoint_owner.is_empty() {
        for c in 0..params.n_certificates {
            let ep = if c < endpoint_owner.len() {
                c
            } else {
                placement.random_range(0..endpoint_owner.len())
            };
            certs_of[ep].push(c);
        }
    }

    let t0 = base_time();
    let mut findings = Vec::new();
    let mut rules = Vec::new();
    for (i, a) in draws.iter().enumerate() {
        let at = t0 + Duration::minutes(i as i64);
        let repo = format!("repos/{}/", a.slug);
        let vendor = format!("vendor/{}/", a.slug);
        let host_prefix = format!("{}-ep", a.slug);
        for pattern in [&repo, &vendor, &host_prefix] {
            rules.push(AssetRule {
                pattern: pattern.clone(),
                asset_id: a.id.clone(),
                system_context: SystemContext::Application,
                third_party: false,
                display_name: Some(format!("Synthetic service {}", a.id)),
            });
        }
        let static_finding = || {
            let path = format!("{repo}src/crypto.conf");
            DiscoveryFinding {
                source: FindingSource::Static,
                asset_hint: path.clone(),
                location: format!("{path}:7"),
                mechanism: mechanism(a.family, UsageRole::Signing),
                kind: FindingKind::ConfigReference,
                observed_at: at,
                origin_id: "SYNTH-STATIC".into(),
                raw_excerpt: format!("key_algorithm = {}", a.family.as_str()),
                artifact_id: None,
                supplier: None,
                depends_on: None,
            }
        };
        let sbom_finding = || DiscoveryFinding {
            source: FindingSource::Sbom,
            asset_hint: format!("{vendor}component"),
            location: format!("{}: declared signing", a.slug),
            mechanism: mechanism(a.family, UsageRole::Signing),
            kind: FindingKind::SbomDeclaration,
            observed_at: at,
            origin_id: format!("sbom:synthetic/{}", a.slug),
            raw_excerpt: String::new(),
            artifact_id: Some(a.slug.clone()),
            supplier: Some("synthetic".into()),
            depends_on: None,
        };
        let mut dynamic_findings = Vec::new();
        for e in &endpoints_of[i] {
            let ep = format!("{host_prefix}{e}.estate.test:443");
            dynamic_findings.push(DiscoveryFinding {
                source: FindingSource::Dynamic,
                asset_hint: ep.clone(),
                location: format!("tls://{ep}/kx"),
                mechanism: mechanism(a.family, UsageRole::KeyExchange).with_protocol(ProtocolContext::Tls13),
                kind: FindingKind::TlsHandshake,
                observed_at: at,
                origin_id: "tls-probe".into(),
                raw_excerpt: String::new(),
                artifact_id: None,
                supplier: None,
                depends_on: None,
            });
            for (k, c) in certs_of[*e].iter().enumerate() {
                let fp = hex::encode(Sha256::digest(format!("{}:{c}", params.seed)));
                dynamic_findings.push(DiscoveryFinding {
                    source: FindingSource::Dynamic,
                    asset_hint: ep.clone(),
                    location: format!("tls://{ep}/cert/{k}"),
                    mechanism: mechanism(a.family, UsageRole::Signing).with_protocol(ProtocolContext::Tls13),
                    kind: FindingKind::Certificate,
                    observed_at: at,
                    origin_id: "tls-probe".into(),
                    raw_excerpt: format!("subject=CN={ep}"),
                    artifact_id: Some(fp),
                    supplier: None,
                    depends_on: None,
                });
            }
        }
        match a.evidence {
            EvidenceConfidence::High => {
                findings.push(static_finding());
                if dynamic_findings.is_empty() {
                    findings.push(sbom_finding());
                }
            }
            EvidenceConfidence::Med if dynamic_findings.is_empty() => findings.push(static_finding()),
            EvidenceConfidence::Med => {}
            EvidenceConfidence::Low => findings.push(sbom_finding()),
        }
        findings.extend(dynamic_findings);
    }

    let mut policy: BTreeMap<String, f64> = BTreeMap::new();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Input(format!("writing synthetic governance: {e}"));
    w.write_record(GOVERNANCE_COLUMNS).map_err(io)?;
    for a in &draws {
        let class = format!("retention-{}y", format_years(a.shelf));
        policy.insert(class.clone(), a.shelf);
        let (accountable, responsible) = if a.owner_known {
            (format!("Owner {}", &a.id[4..]), "Service Team".to_owned())
        } else {
            (String::new(), "Service Team".to_owned())
        };
        let record = [
            a.id.clone(),
            a.id.clone(),
            format!("Synthetic service {}", a.id),
            "Synthetic".into(),
            a.cia[0].label().into(),
            a.cia[1].label().into(),
            a.cia[2].label().into(),
            String::new(),
            class,
            format_years(a.migration),
            accountable,
            responsible,
            "Risk Committee".into(),
            "Architecture Board".into(),
            a.agility.to_string(),
            "HYBRID".into(),
            String::new(),
            String::new(),
            String::new(),
            "Review migration plan".into(),
            String::new(),
        ];
        w.write_record(&record).map_err(io)?;
    }
    let governance_csv =
        String::from_utf8(w.into_inner().map_err(|e| Error::Input(e.to_string()))?).expect("utf-8 input");
    let mut retention_policy_csv = String::from("class,years\n");
    for (class, years) in &policy {
        retention_policy_csv.push_str(&format!("{class},{}\n", format_years(*years)));
    }

    Ok(SyntheticEstate {
        findings,
        governance_csv,
        asset_rules: AssetRules { rules },
        retention_policy_csv,
    })
}

/// Generates an estate and writes its input files into `out_dir`.
pub fn synthesize_estate(params: &EstateParams, out_dir: &Path) -> Result<EstateFiles> {
    let estate = generate_estate(params)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = EstateFiles {
        findings: out_dir.join("findings.jsonl"),
        governance: out_dir.join("governance.csv"),
        asset_rules: out_dir.join("asset-rules.csv"),
        retention_policy: out_dir.join("retention-policy.csv"),
    };
    crate::jsonl::write(&files.findings, &estate.findings)?;
    for (path, body) in [
        (&files.governance, &estate.governance_csv),
        (&files.asset_rules, &estate.asset_rules.to_csv()),
        (&files.retention_policy, &estate.retention_policy_csv),
    ] {
        fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}
