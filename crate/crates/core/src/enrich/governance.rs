use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CiaTriple, Rating};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TargetState {
    Hybrid,
    Pqc,
    SupplierLed,
    CompensatingControls,
}

impl TargetState {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace([' ', '-'], "_").as_str() {
            "HYBRID" => Ok(Self::Hybrid),
            "PQC" => Ok(Self::Pqc),
            "SUPPLIER_LED" => Ok(Self::SupplierLed),
            "COMPENSATING_CONTROLS" => Ok(Self::CompensatingControls),
            other => Err(Error::Input(format!("unknown target state {other:?}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Hybrid => "Hybrid",
            Self::Pqc => "PQC",
            Self::SupplierLed => "Supplier-led",
            Self::CompensatingControls => "Compensating controls",
        }
    }
}

impl fmt::Display for TargetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Responsible / Accountable / Consulted / Informed role lists. The first
/// accountable role is the primary owner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Raci {
    #[serde(default)]
    pub responsible: Vec<String>,
    #[serde(default)]
    pub accountable: Vec<String>,
    #[serde(default)]
    pub consulted: Vec<String>,
    #[serde(default)]
    pub informed: Vec<String>,
}

impl Raci {
    pub fn primary_accountable(&self) -> Option<&str> {
        self.accountable.first().map(String::as_str)
    }

    pub fn has_accountable(&self) -> bool {
        self.primary_accountable().is_some()
    }

    /// `Business / Technical` owner pair as shown in the register.
    pub fn owner_label(&self) -> String {
        match (self.accountable.first(), self.responsible.first()) {
            (Some(a), Some(r)) => format!("{a} / {r}"),
            (Some(a), None) => a.clone(),
            (None, Some(r)) => format!("Unknown / {r}"),
            (None, None) => "Unknown".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceMetadata {
    pub criticality: CiaTriple,
    pub t_shelf_years: f64,
    pub t_migration_years: f64,
    pub raci: Raci,
    pub crypto_agility: u8,
    pub target_state: TargetState,
    pub next_action: String,
    pub domain_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remediation_deadline: Option<NaiveDate>,
}

impl GovernanceMetadata {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.crypto_agility) {
            return Err(Error::Input(format!(
                "crypto agility {} is outside 1-5",
                self.crypto_agility
            )));
        }
        for (name, v) in [("t_shelf", self.t_shelf_years), ("t_migration", self.t_migration_years)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Input(format!(
                    "{name} must be a finite non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Retention class → confidentiality horizon in years.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetentionPolicy {
    pub classes: BTreeMap<String, f64>,
}

impl RetentionPolicy {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    /// CSV with header `class,years`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            class: String,
            years: f64,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut classes = BTreeMap::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::format("retention policy", i + 1, e))?;
            if !row.years.is_finite() || row.years < 0.0 {
                return Err(Error::format("retention policy", i + 1, "years must be non-negative"));
            }
            if classes.insert(row.class.clone(), row.years).is_some() {
                return Err(Error::format(
                    "retention policy",
                    i + 1,
                    format!("duplicate class {}", row.class),
                ));
            }
        }
        Ok(RetentionPolicy { classes })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,years\n");
        for (c, y) in &self.classes {
            out.push_str(&format!("{c},{}\n", format_years(*y)));
        }
        out
    }

    pub fn max_years(&self) -> Option<f64> {
        self.classes.values().copied().reduce(f64::max)
    }
}

pub fn derive_shelf_life(retention_class: &str, policy: &RetentionPolicy) -> Result<f64> {
    policy.classes.get(retention_class).copied().ok_or_else(|| {
        Error::Config(format!(
            "retention class {retention_class:?} is not in the policy table"
        ))
    })
}

/// Register-facing text carried alongside the metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterFields {
    pub qer_id: String,
    pub service_name: String,
    pub current_crypto: String,
    pub third_party_dependency: String,
    /// Free-text description of the target state, e.g. `Hybrid TLS`.
    pub target_note: String,
}

/// One governance dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernanceRecord {
    pub asset_id: String,
    pub metadata: GovernanceMetadata,
    pub fields: RegisterFields,
    /// Left blank in the dataset; filled by the migration heuristic or rejected.
    #[serde(default)]
    pub t_migration_missing: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GovernanceDataset {
    pub records: BTreeMap<String, GovernanceRecord>,
}

pub const GOVERNANCE_COLUMNS: [&str; 21] = [
    "asset_id",
    "qer_id",
    "service_name",
    "domain",
    "confidentiality",
    "integrity",
    "availability",
    "t_shelf_years",
    "retention_class",
    "t_migration_years",
    "accountable",
    "responsible",
    "consulted",
    "informed",
    "crypto_agility",
    "target_state",
    "target_note",
    "current_crypto",
    "third_party_dependency",
    "next_action",
    "remediation_deadline",
];

#[derive(Debug, Deserialize)]
struct GovernanceRow {
    asset_id: String,
    #[serde(default)]
    qer_id: String,
    #[serde(default)]
    service_name: String,
    domain: String,
    confidentiality: String,
    integrity: String,
    availability: String,
    #[serde(default)]
    t_shelf_years: String,
    #[serde(default)]
    retention_class: String,
    #[serde(default)]
    t_migration_years: String,
    #[serde(default)]
    accountable: String,
    #[serde(default)]
    responsible: String,
    #[serde(default)]
    consulted: String,
    #[serde(default)]
    informed: String,
    crypto_agility: u8,
    target_state: String,
    #[serde(default)]
    target_note: String,
    #[serde(default)]
    current_crypto: String,
    #[serde(default)]
    third_party_dependency: String,
    #[serde(default)]
    next_action: String,
    #[serde(default)]
    remediation_deadline: String,
}

fn split_roles(s: &str) -> Vec<String> {
    s.split(';')
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse_years(s: &str, what: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Input(format!("{what} {s:?} is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Input(format!("{what} must be non-negative, got {s}")));
    }
    Ok(Some(v))
}

impl GovernanceDataset {
    pub fn load(path: &Path, policy: &RetentionPolicy) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, policy)
    }

    /// Parses the governance CSV. Blank `t_shelf_years` is derived from
    /// `retention_class` through `policy`.
    pub fn parse_csv(text: &str, policy: &RetentionPolicy) -> Result<Self> {
        let ctx = "governance dataset";
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut records = BTreeMap::new();
        for (i, row) in rdr.deserialize::<GovernanceRow>().enumerate() {
            let idx = i + 1;
            let fmt_err = |e: Error| match e {
                Error::Config(_) => e,
                other => Error::format(ctx, idx, other),
            };
            let row = row.map_err(|e| Error::format(ctx, idx, e))?;
            if row.asset_id.is_empty() {
                return Err(Error::format(ctx, idx, "asset_id is required"));
            }
            let criticality = CiaTriple::new(
                Rating::parse(&row.confidentiality).map_err(fmt_err)?,
                Rating::parse(&row.integrity).map_err(fmt_err)?,
                Rating::parse(&row.availability).map_err(fmt_err)?,
            );
            let retention_class = Some(row.retention_class.clone()).filter(|c| !c.is_empty());
            let t_shelf = match parse_years(&row.t_shelf_years, "t_shelf_years").map_err(fmt_err)? {
                Some(v) => v,
                None => match &retention_class {
                    Some(c) => derive_shelf_life(c, policy)?,
                    None => {
                        return Err(Error::format(
                            ctx,
                            idx,
                            "either t_shelf_years or retention_class is required",
                        ))
                    }
                },
            };
            let t_migration = parse_years(&row.t_migration_years, "t_migration_years").map_err(fmt_err)?;
            let remediation_deadline = match row.remediation_deadline.as_str() {
                "" => None,
                d => Some(
                    NaiveDate::parse_from_str(d, "%Y-%m-%d")
                        .map_err(|e| Error::format(ctx, idx, format!("remediation_deadline: {e}")))?,
                ),
            };
            let metadata = GovernanceMetadata {
                criticality,
                t_shelf_years: t_shelf,
                t_migration_years: t_migration.unwrap_or(0.0),
                raci: Raci {
                    responsible: split_roles(&row.responsible),
                    accountable: split_roles(&row.accountable),
                    consulted: split_roles(&row.consulted),
                    informed: split_roles(&row.informed),
                },
                crypto_agility: row.crypto_agility,
                target_state: TargetState::parse(&row.target_state).map_err(fmt_err)?,
                next_action: row.next_action,
                domain_label: row.domain,
                retention_class,
                remediation_deadline,
            };
            metadata.validate().map_err(fmt_err)?;
            let fields = RegisterFields {
                qer_id: if row.qer_id.is_empty() {
                    row.asset_id.clone()
                } else {
                    row.qer_id
                },
                service_name: if row.service_name.is_empty() {
                    row.asset_id.clone()
                } else {
                    row.service_name
                },
                current_crypto: row.current_crypto,
                third_party_dependency: row.third_party_dependency,
                target_note: row.target_note,
            };
            let rec = GovernanceRecord {
                asset_id: row.asset_id.clone(),
                metadata,
                fields,
                t_migration_missing: t_migration.is_none(),
            };
            if records.insert(row.asset_id.clone(), rec).is_some() {
                return Err(Error::format(ctx, idx, format!("duplicate asset_id {}", row.asset_id)));
            }
        }
        Ok(GovernanceDataset { records })
    }

    /// Writes the dataset back in the column layout [`Self::parse_csv`] reads.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(GOVERNANCE_COLUMNS).expect("in-memory write");
        for r in self.records.values() {
            let m = &r.metadata;
            let join = |v: &[String]| v.join(";");
            w.write_record([
                r.asset_id.clone(),
                r.fields.qer_id.clone(),
                r.fields.service_name.clone(),
                m.domain_label.clone(),
                m.criticality.confidentiality.label().to_owned(),
                m.criticality.integrity.label().to_owned(),
                m.criticality.availability.label().to_owned(),
                format_years(m.t_shelf_years),
                m.retention_class.clone().unwrap_or_default(),
                if r.t_migration_missing {
                    String::new()
                } else {
                    format_years(m.t_migration_years)
                },
                join(&m.raci.accountable),
                join(&m.raci.responsible),
                join(&m.raci.consulted),
                join(&m.raci.informed),
                m.crypto_agility.to_string(),
                m.target_state.label().to_owned(),
                r.fields.target_note.clone(),
                r.fields.current_crypto.clone(),
                r.fields.third_party_dependency.clone(),
                m.next_action.clone(),
                m.remediation_deadline.map(|d| d.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Years without a trailing `.0` for whole numbers.
pub fn format_years(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}
