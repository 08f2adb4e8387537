use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use x509_parser::prelude::*;
use x509_parser::public_key::PublicKey;

use crate::error::{Error, Result};
use crate::model::{parse_mechanism_label, CryptoMechanism, MechanismFamily, UsageRole};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub subject: String,
    pub issuer: String,
    /// Serial number, lowercase hex without separators.
    pub serial: String,
    pub public_key_algorithm: CryptoMechanism,
    pub key_size_bits: u32,
    pub signature_algorithm: CryptoMechanism,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
    pub fingerprint_sha256: String,
}

impl CertificateRecord {
    pub fn validate(&self) -> Result<()> {
        if self.not_before >= self.not_after {
            return Err(Error::Input(format!(
                "certificate {}: not_before is not before not_after",
                self.fingerprint_sha256
            )));
        }
        if self.fingerprint_sha256.len() != 64 || !self.fingerprint_sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Input(format!(
                "fingerprint {:?} is not 64 hex characters",
                self.fingerprint_sha256
            )));
        }
        let bits = self.key_size_bits;
        let ok = match self.public_key_algorithm.family {
            MechanismFamily::Rsa => bits >= 512,
            MechanismFamily::Ecc => matches!(bits, 224 | 255 | 256 | 384 | 448 | 521),
            _ => bits > 0,
        };
        if !ok {
            return Err(Error::Input(format!(
                "key size {bits} is inconsistent with {}",
                self.public_key_algorithm.family
            )));
        }
        Ok(())
    }

    pub fn is_self_signed(&self) -> bool {
        self.subject == self.issuer
    }
}

/// Parses one DER or PEM encoded certificate.
pub fn parse_certificate(bytes: &[u8]) -> Result<CertificateRecord> {
    let trimmed = trim_ascii_start(bytes);
    if trimmed.starts_with(b"-----BEGIN") {
        let offset = bytes.len() - trimmed.len();
        let (_, pem) = x509_parser::pem::parse_x509_pem(trimmed).map_err(|e| Error::CertificateParse {
            offset,
            reason: format!("PEM: {e}"),
        })?;
        if pem.label != "CERTIFICATE" && pem.label != "TRUSTED CERTIFICATE" {
            return Err(Error::CertificateParse {
                offset,
                reason: format!("PEM block is {:?}, not a certificate", pem.label),
            });
        }
        parse_der(&pem.contents)
    } else {
        parse_der(bytes)
    }
}

/// Parses every certificate in a PEM bundle, in order.
pub fn parse_pem_bundle(bytes: &[u8]) -> Result<Vec<CertificateRecord>> {
    let mut out = Vec::new();
    for (i, pem) in Pem::iter_from_buffer(bytes).enumerate() {
        let pem = pem.map_err(|e| Error::CertificateParse {
            offset: i,
            reason: format!("PEM block {i}: {e}"),
        })?;
        if pem.label == "CERTIFICATE" {
            out.push(parse_der(&pem.contents)?);
        }
    }
    Ok(out)
}

fn trim_ascii_start(b: &[u8]) -> &[u8] {
    let n = b.iter().take_while(|c| c.is_ascii_whitespace()).count();
    &b[n..]
}

pub(crate) fn parse_der(der: &[u8]) -> Result<CertificateRecord> {
    if der.is_empty() {
        return Err(Error::CertificateParse {
            offset: 0,
            reason: "empty input".into(),
        });
    }
    let (rest, cert) = X509Certificate::from_der(der).map_err(|e| Error::CertificateParse {
        offset: 0,
        reason: match e {
            x509_parser::nom::Err::Incomplete(_) => "truncated DER".to_owned(),
            x509_parser::nom::Err::Error(e) | nom::Err::Failure(e) => format!("DER: {e}"),
        },
    })?;
    if !rest.is_empty() {
        return Err(Error::CertificateParse {
            offset: der.len() - rest.len(),
            reason: format!("{} trailing bytes after certificate", rest.len()),
        });
    }

    let spki = cert.public_key();
    let (family, param, key_size_bits) = public_key_info(spki)?;
    let public_key_algorithm = CryptoMechanism::new(family, param.as_deref())?;

    let sig_oid = cert.signature_algorithm.algorithm.to_id_string();
    let signature_algorithm = match signature_label(&sig_oid) {
        Some(label) => parse_mechanism_label(label)?.with_usage(UsageRole::Signing),
        None => CryptoMechanism::unknown(sig_oid),
    };

    let to_utc = |t: &ASN1Time| {
        DateTime::<Utc>::from_timestamp(t.timestamp(), 0).ok_or_else(|| Error::CertificateParse {
            offset: 0,
            reason: "validity time out of range".into(),
        })
    };
    let record = CertificateRecord {
        subject: cert.subject().to_string(),
        issuer: cert.issuer().to_string(),
        serial: hex::encode(cert.raw_serial()),
        public_key_algorithm,
        key_size_bits,
        signature_algorithm,
        not_before: to_utc(&cert.validity().not_before)?,
        not_after: to_utc(&cert.validity().not_after)?,
        fingerprint_sha256: hex::encode(Sha256::digest(der)),
    };
    record.validate().map_err(|e| Error::CertificateParse {
        offset: 0,
        reason: e.to_string(),
    })?;
    Ok(record)
}

fn public_key_info(spki: &SubjectPublicKeyInfo<'_>) -> Result<(MechanismFamily, Option<String>, u32)> {
    let alg = spki.algorithm.algorithm.to_id_string();
    let parse_err = |reason: String| Error::CertificateParse { offset: 0, reason };
    match alg.as_str() {
        // rsaEncryption, RSASSA-PSS
        "1.2.840.113549.1.1.1" | "1.2.840.113549.1.1.10" => {
            let parsed = spki.parsed().map_err(|e| parse_err(format!("RSA key: {e}")))?;
            let PublicKey::RSA(rsa) = parsed else {
                return Err(parse_err("RSA key did not decode".into()));
            };
            let bits = significant_bits(rsa.modulus);
            Ok((MechanismFamily::Rsa, Some(bits.to_string()), bits))
        }
        // id-ecPublicKey
        "1.2.840.10045.2.1" => {
            let curve = spki
                .algorithm
                .parameters
                .as_ref()
                .and_then(|p| p.as_oid().ok())
                .map(|o| o.to_id_string());
            let (name, bits) = match curve.as_deref() {
                Some("1.2.840.10045.3.1.7") => ("P-256", 256),
                Some("1.3.132.0.34") => ("P-384", 384),
                Some("1.3.132.0.35") => ("P-521", 521),
                Some("1.3.132.0.33") => ("P-224", 224),
                other => {
                    return Err(parse_err(format!("unsupported EC curve {other:?}")));
                }
            };
            Ok((MechanismFamily::Ecc, Some(name.into()), bits))
        }
        "1.3.101.112" => Ok((MechanismFamily::Ecc, Some("Ed25519".into()), 255)),
        "1.3.101.113" => Ok((MechanismFamily::Ecc, Some("Ed448".into()), 448)),
        "1.2.840.10040.4.1" => {
            let bits = match spki.parsed() {
                Ok(PublicKey::DSA(y)) => significant_bits(y),
                _ => 0,
            };
            Ok((MechanismFamily::Dsa, (bits > 0).then(|| bits.to_string()), bits))
        }
        other => Err(parse_err(format!("unsupported public key algorithm {other}"))),
    }
}

fn significant_bits(be: &[u8]) -> u32 {
    let skip = be.iter().take_while(|&&b| b == 0).count();
    match be.get(skip) {
        Some(&first) => (be.len() - skip) as u32 * 8 - first.leading_zeros(),
        None => 0,
    }
}

fn signature_label(oid: &str) -> Option<&'static str> {
    Some(match oid {
        "1.2.840.113549.1.1.4" => "RSA MD5",
        "1.2.840.113549.1.1.5" => "RSA SHA1",
        "1.2.840.113549.1.1.10" => "RSA PSS",
        "1.2.840.113549.1.1.11" => "RSA SHA256",
        "1.2.840.113549.1.1.12" => "RSA SHA384",
        "1.2.840.113549.1.1.13" => "RSA SHA512",
        "1.2.840.10045.4.1" => "ECDSA SHA1",
        "1.2.840.10045.4.3.2" => "ECDSA SHA256",
        "1.2.840.10045.4.3.3" => "ECDSA SHA384",
        "1.2.840.10045.4.3.4" => "ECDSA SHA512",
        "1.3.101.112" => "Ed25519",
        "1.3.101.113" => "Ed448",
        "1.2.840.10040.4.3" => "DSA SHA1",
        "2.16.840.1.101.3.4.3.2" => "DSA SHA256",
        "2.16.840.1.101.3.4.3.17" => "ML-DSA-44",
        "2.16.840.1.101.3.4.3.18" => "ML-DSA-65",
        "2.16.840.1.101.3.4.3.19" => "ML-DSA-87",
        _ => return None,
    })
}
