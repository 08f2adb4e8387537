use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{parse_mechanism_label, DiscoveryFinding, FindingKind, FindingSource};
use crate::scan::redact_excerpt;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredMechanism {
    /// Mechanism label, e.g. `RSA-2048` or `ECDSA P-256`.
    pub mechanism: String,
    pub location: String,
}

/// Supplier-declared cryptographic inventory for one delivered component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CryptoSbomDocument {
    pub supplier: String,
    pub component: String,
    pub declared_mechanisms: Vec<DeclaredMechanism>,
    #[serde(default)]
    pub key_management_notes: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pqc_roadmap_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issued_at: Option<DateTime<Utc>>,
}

impl CryptoSbomDocument {
    pub fn validate(&self) -> Result<()> {
        if self.supplier.trim().is_empty() || self.component.trim().is_empty() {
            return Err(Error::Input("supplier and component are required".into()));
        }
        if self.declared_mechanisms.is_empty() {
            return Err(Error::Input(format!(
                "{}/{} declares no mechanisms",
                self.supplier, self.component
            )));
        }
        for d in &self.declared_mechanisms {
            parse_mechanism_label(&d.mechanism)?;
        }
        Ok(())
    }
}

/// Parses and validates a native crypto-SBOM JSON document.
pub fn parse_crypto_sbom(context: &str, text: &str) -> Result<CryptoSbomDocument> {
    let doc: CryptoSbomDocument = serde_json::from_str(text).map_err(|e| Error::format(context, 1, e))?;
    doc.validate().map_err(|e| Error::format(context, 1, e))?;
    Ok(doc)
}

/// One SBOM finding per declared mechanism, in declaration order.
pub fn ingest_crypto_sbom(doc: &CryptoSbomDocument, supplier_asset_id: &str) -> Result<Vec<DiscoveryFinding>> {
    doc.validate()
        .map_err(|e| Error::format(format!("crypto-SBOM {}", doc.component), 1, e))?;
    let observed_at = doc.issued_at.unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    doc.declared_mechanisms
        .iter()
        .map(|d| {
            let f = DiscoveryFinding {
                source: FindingSource::Sbom,
                asset_hint: supplier_asset_id.to_owned(),
                location: format!("{}: {}", doc.component, d.location),
                mechanism: parse_mechanism_label(&d.mechanism)?,
                kind: FindingKind::SbomDeclaration,
                observed_at,
                origin_id: format!("sbom:{}/{}", doc.supplier, doc.component),
                raw_excerpt: redact_excerpt(&doc.key_management_notes),
                artifact_id: Some(doc.component.clone()),
                supplier: Some(doc.supplier.clone()),
                depends_on: None,
            };
            f.validate()?;
            Ok(f)
        })
        .collect()
}

/// Converts an industry SBOM format into native crypto-SBOM documents.
pub trait SbomAdapter {
    fn format_name(&self) -> &'static str;
    fn convert(&self, text: &str) -> Result<Vec<CryptoSbomDocument>>;
}

/// Reads a file in either the native format or one of `adapters`' formats.
pub fn load_sbom(path: &Path, adapters: &[&dyn SbomAdapter]) -> Result<Vec<CryptoSbomDocument>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    if let Ok(doc) = serde_json::from_str::<CryptoSbomDocument>(&text) {
        doc.validate().map_err(|e| Error::format(&ctx, 1, e))?;
        return Ok(vec![doc]);
    }
    let mut last_err = None;
    for a in adapters {
        match a.convert(&text) {
            Ok(docs) => return Ok(docs),
            Err(e) => last_err = Some(format!("{}: {e}", a.format_name())),
        }
    }
    Err(Error::format(
        ctx,
        1,
        last_err.unwrap_or_else(|| "not a crypto-SBOM document".into()),
    ))
}

/// CycloneDX cryptographic bill of materials (components of type
/// `cryptographic-asset`).
#[derive(Debug, Clone, Copy, Default)]
pub struct CycloneDxAdapter;

impl SbomAdapter for CycloneDxAdapter {
    fn format_name(&self) -> &'static str {
        "CycloneDX"
    }

    fn convert(&self, text: &str) -> Result<Vec<CryptoSbomDocument>> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::format("CycloneDX", 1, e))?;
        if v.get("bomFormat").and_then(Value::as_str) != Some("CycloneDX") {
            return Err(Error::format("CycloneDX", 1, "bomFormat is not CycloneDX"));
        }
        let meta = &v["metadata"];
        let component = meta["component"]["name"].as_str().unwrap_or("").to_owned();
        let supplier = meta["supplier"]["name"]
            .as_str()
            .or_else(|| meta["component"]["supplier"]["name"].as_str())
            .or_else(|| meta["manufacturer"]["name"].as_str())
            .unwrap_or("")
            .to_owned();
        let issued_at = meta["timestamp"]
            .as_str()
            .and_then(|t| DateTime::parse_from_rfc3339(t).ok())
            .map(|t| t.with_timezone(&Utc));

        let mut declared = Vec::new();
        let mut notes = Vec::new();
        for (i, c) in v["components"].as_array().into_iter().flatten().enumerate() {
            if c["type"].as_str() != Some("cryptographic-asset") {
                continue;
            }
            let props = &c["cryptoProperties"];
            let name = c["name"].as_str().unwrap_or("");
            let mut label = name.to_owned();
            for extra in [
                &props["algorithmProperties"]["parameterSetIdentifier"],
                &props["algorithmProperties"]["curve"],
            ] {
                if let Some(x) = extra.as_str() {
                    label.push(' ');
                    label.push_str(x);
                }
            }
            if label.trim().is_empty() {
                return Err(Error::format("CycloneDX", i + 1, "cryptographic asset without a name"));
            }
            let location = c["evidence"]["occurrences"][0]["location"]
                .as_str()
                .or_else(|| c["bom-ref"].as_str())
                .unwrap_or(name)
                .to_owned();
            if props["assetType"].as_str() == Some("related-crypto-material") {
                notes.push(format!("{name} ({location})"));
            }
            declared.push(DeclaredMechanism {
                mechanism: label,
                location,
            });
        }
        let doc = CryptoSbomDocument {
            supplier,
            component,
            declared_mechanisms: declared,
            key_management_notes: notes.join("; "),
            pqc_roadmap_date: None,
            issued_at,
        };
        doc.validate().map_err(|e| Error::format("CycloneDX", 1, e))?;
        Ok(vec![doc])
    }
}

#[derive(Debug, Deserialize)]
struct DependencyRow {
    from: String,
    to: String,
    relation: String,
    mechanism: String,
    #[serde(default)]
    supplier: Option<String>,
}

/// Reads a dependency map (`from,to,relation,mechanism[,supplier]`) into
/// DEPENDENCY findings attributed to `from`.
pub fn parse_dependency_map(context: &str, text: &str, observed_at: DateTime<Utc>) -> Result<Vec<DiscoveryFinding>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    rdr.deserialize::<DependencyRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::format(context, i + 1, e))?;
            let f = DiscoveryFinding {
                source: FindingSource::Dependency,
                asset_hint: row.from.clone(),
                location: format!("{} -> {}", row.from, row.to),
                mechanism: parse_mechanism_label(&row.mechanism).map_err(|e| Error::format(context, i + 1, e))?,
                kind: FindingKind::DependencyEdge,
                observed_at,
                origin_id: row.relation.clone(),
                raw_excerpt: String::new(),
                artifact_id: None,
                supplier: row.supplier.filter(|s| !s.is_empty()),
                depends_on: Some(row.to),
            };
            f.validate().map_err(|e| Error::format(context, i + 1, e))?;
            Ok(f)
        })
        .collect()
}
