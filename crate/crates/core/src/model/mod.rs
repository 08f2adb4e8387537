//! Domain types shared by every stage of the pipeline.

mod classify;
mod mechanism;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use classify::{classify_mechanism, ClassificationRow, ClassificationTable, VulnerabilityClass};
pub use mechanism::{
    parse_mechanism_label, parse_mechanism_set, CryptoMechanism, MechanismFamily, ProtocolContext, UsageRole,
};

use crate::error::{Error, Result};

/// A High/Med/Low rating on one CIA axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rating {
    Low,
    Med,
    High,
}

impl Rating {
    pub fn label(self) -> &'static str {
        match self {
            Rating::High => "High",
            Rating::Med => "Med",
            Rating::Low => "Low",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        parse_level(s).ok_or_else(|| Error::Input(format!("expected High/Med/Low, got {s:?}")))
    }
}

fn parse_level<T: From<u8>>(s: &str) -> Option<T> {
    match s.trim().to_ascii_uppercase().as_str() {
        "HIGH" | "H" => Some(T::from(2)),
        "MED" | "MEDIUM" | "M" => Some(T::from(1)),
        "LOW" | "L" => Some(T::from(0)),
        _ => None,
    }
}

impl From<u8> for Rating {
    fn from(v: u8) -> Self {
        match v {
            0 => Rating::Low,
            1 => Rating::Med,
            _ => Rating::High,
        }
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiaTriple {
    pub confidentiality: Rating,
    pub integrity: Rating,
    pub availability: Rating,
}

impl CiaTriple {
    pub const ALL_HIGH: CiaTriple = CiaTriple {
        confidentiality: Rating::High,
        integrity: Rating::High,
        availability: Rating::High,
    };

    pub fn new(confidentiality: Rating, integrity: Rating, availability: Rating) -> Self {
        CiaTriple {
            confidentiality,
            integrity,
            availability,
        }
    }

    /// Parses the register notation `High / High / Med`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(Error::Input(format!("expected C / I / A triple, got {s:?}")));
        }
        Ok(CiaTriple::new(
            Rating::parse(parts[0])?,
            Rating::parse(parts[1])?,
            Rating::parse(parts[2])?,
        ))
    }

    pub fn iter(&self) -> impl Iterator<Item = Rating> {
        [self.confidentiality, self.integrity, self.availability].into_iter()
    }
}

impl fmt::Display for CiaTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} / {} / {}",
            self.confidentiality, self.integrity, self.availability
        )
    }
}

/// Quality of the discovery evidence behind an asset. Ordered `Low < Med < High`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EvidenceConfidence {
    Low,
    Med,
    High,
}

impl EvidenceConfidence {
    pub fn label(self) -> &'static str {
        match self {
            Self::High => "High",
            Self::Med => "Med",
            Self::Low => "Low",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        parse_level::<u8>(s)
            .map(|v| match v {
                0 => Self::Low,
                1 => Self::Med,
                _ => Self::High,
            })
            .ok_or_else(|| Error::Input(format!("expected High/Med/Low, got {s:?}")))
    }
}

impl fmt::Display for EvidenceConfidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingSource {
    Static,
    Dynamic,
    Sbom,
    Dependency,
}

impl FindingSource {
    pub const ALL: [FindingSource; 4] = [Self::Static, Self::Dynamic, Self::Sbom, Self::Dependency];

    /// Static and dynamic evidence is observed directly; SBOM and dependency
    /// evidence is declared by someone else.
    pub fn is_direct(self) -> bool {
        matches!(self, Self::Static | Self::Dynamic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingKind {
    ApiCall,
    ConfigReference,
    EmbeddedKey,
    DeprecatedAlgorithm,
    TlsHandshake,
    Certificate,
    SbomDeclaration,
    DependencyEdge,
}

/// Conditions that need governance follow-up rather than scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExceptionKind {
    UnmappedEvidence,
    NoAccountableOwner,
    NoMetadata,
    ScanSkipped,
}

impl ExceptionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnmappedEvidence => "UNMAPPED_EVIDENCE",
            Self::NoAccountableOwner => "NO_ACCOUNTABLE_OWNER",
            Self::NoMetadata => "NO_METADATA",
            Self::ScanSkipped => "SCAN_SKIPPED",
        }
    }
}

/// An exception raised by a pipeline stage, before it is tracked over time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExceptionNote {
    pub kind: ExceptionKind,
    pub subject: String,
    pub detail: String,
}

/// One piece of evidence tying a mechanism to a location on an asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryFinding {
    pub source: FindingSource,
    /// Path, `host:port`, or component name used to resolve the owning asset.
    pub asset_hint: String,
    /// `file:line` or an endpoint descriptor.
    pub location: String,
    pub mechanism: CryptoMechanism,
    pub kind: FindingKind,
    pub observed_at: DateTime<Utc>,
    /// Rule id for static findings, probe id for dynamic ones.
    pub origin_id: String,
    pub raw_excerpt: String,
    /// Certificate fingerprint or SBOM component this finding came from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supplier: Option<String>,
    /// For dependency findings: the hint of the asset depended upon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depends_on: Option<String>,
}

pub const MAX_EXCERPT_CHARS: usize = 256;

impl DiscoveryFinding {
    pub fn validate(&self) -> Result<()> {
        if self.location.trim().is_empty() {
            return Err(Error::Input("finding location is empty".into()));
        }
        if self.asset_hint.trim().is_empty() {
            return Err(Error::Input(format!("finding at {} has no asset hint", self.location)));
        }
        if self.raw_excerpt.chars().count() > MAX_EXCERPT_CHARS {
            return Err(Error::Input(format!(
                "finding at {} has an excerpt over {MAX_EXCERPT_CHARS} characters",
                self.location
            )));
        }
        self.mechanism.validate()
    }
}
