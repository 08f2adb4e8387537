use crate::enrich::format_years;
use crate::error::{Error, Result};

use super::RegisterVersion;

pub const CSV_COLUMNS: [&str; 16] = [
    "QER ID",
    "Asset/Service",
    "Domain",
    "Criticality C/I/A",
    "T_shelf",
    "T_migration",
    "T_threat",
    "Time-Exposed?",
    "Current Crypto",
    "Evidence Confidence",
    "Owner Biz/Tech",
    "Third-Party Dependency",
    "Crypto-Agility",
    "Target State",
    "Next Action",
    "Wave",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Structured,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "structured" | "json" => Ok(Self::Structured),
            other => Err(Error::Input(format!("unknown export format {other:?}"))),
        }
    }
}

/// Register rows in the published column order, RFC 4180 quoting, CRLF rows.
pub fn export_csv(version: &RegisterVersion) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for e in &version.entries {
        let a = &e.enriched;
        let m = &a.metadata;
        let target = if a.fields.target_note.is_empty() {
            m.target_state.label().to_owned()
        } else {
            a.fields.target_note.clone()
        };
        w.write_record([
            e.qer_id.clone(),
            a.fields.service_name.clone(),
            m.domain_label.clone(),
            m.criticality.to_string(),
            format_years(m.t_shelf_years),
            format_years(m.t_migration_years),
            format_years(e.scenario.t_threat_years),
            e.exposure.label().to_owned(),
            a.fields.current_crypto.clone(),
            a.evidence.label().to_owned(),
            m.raci.owner_label(),
            a.fields.third_party_dependency.clone(),
            m.crypto_agility.to_string(),
            target,
            m.next_action.clone(),
            format!("Wave {}", e.assigned_wave),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Lossless JSON form of a version; [`import_structured`] reverses it.
pub fn export_structured(version: &RegisterVersion) -> String {
    let mut s = serde_json::to_string_pretty(version).expect("register version serializes");
    s.push('\n');
    s
}

pub fn import_structured(bytes: &[u8]) -> Result<RegisterVersion> {
    let v: RegisterVersion = serde_json::from_slice(bytes).map_err(|e| Error::format("structured register", 1, e))?;
    v.validate()?;
    Ok(v)
}
