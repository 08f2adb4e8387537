use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::cert::CertificateRecord;
use super::probe::Endpoint;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::model::ProtocolContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeOutcome {
    Ok,
    Timeout,
    Refused,
    HandshakeFailed,
}

/// What one handshake attempt revealed about an endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlsObservation {
    pub endpoint: Endpoint,
    #[serde(default)]
    pub negotiated_version: Option<ProtocolContext>,
    #[serde(default)]
    pub cipher_suite: Option<String>,
    #[serde(default)]
    pub key_exchange_group: Option<String>,
    #[serde(default)]
    pub certificate_chain: Vec<CertificateRecord>,
    /// Trust problems seen in the chain. Recorded, never enforced.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chain_notes: Vec<String>,
    pub observed_at: DateTime<Utc>,
    pub probe_outcome: ProbeOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TlsObservation {
    pub fn validate(&self) -> Result<()> {
        match self.probe_outcome {
            ProbeOutcome::Ok => {
                if self.negotiated_version.is_none() {
                    return Err(Error::Input("OK observation without negotiated_version".into()));
                }
                if self.cipher_suite.as_deref().is_none_or(|c| c.trim().is_empty()) {
                    return Err(Error::Input("OK observation without cipher_suite".into()));
                }
            }
            _ => {
                if !self.certificate_chain.is_empty() {
                    return Err(Error::Input(format!(
                        "{:?} observation carries a certificate chain",
                        self.probe_outcome
                    )));
                }
            }
        }
        self.certificate_chain.iter().try_for_each(CertificateRecord::validate)
    }
}

/// Parses observation records, validating each; errors name the record index.
pub fn parse_observations(context: &str, text: &str) -> Result<Vec<TlsObservation>> {
    let records: Vec<TlsObservation> = jsonl::parse(context, text)?;
    for (i, r) in records.iter().enumerate() {
        r.validate().map_err(|e| Error::format(context, i + 1, e))?;
    }
    Ok(records)
}

pub fn ingest_observation_file(path: &Path) -> Result<Vec<TlsObservation>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_observations(&path.display().to_string(), &text)
}

pub fn write_observation_file(path: &Path, observations: &[TlsObservation]) -> Result<()> {
    jsonl::write(path, observations)
}
