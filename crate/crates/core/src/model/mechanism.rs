//! Normalized cryptographic mechanism identity and label parsing.
//!
//! Labels come from many places: register spreadsheets ("RSA-2048 signatures,
//! TLS"), certificate signature algorithm names ("sha256WithRSAEncryption"),
//! cipher suite names, and scan rules. Parsing is case-insensitive and total
//! over nonempty input; anything unrecognized becomes [`MechanismFamily::Unknown`]
//! with the raw label preserved.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MechanismFamily {
    #[serde(rename = "RSA")]
    Rsa,
    #[serde(rename = "ECC")]
    Ecc,
    #[serde(rename = "DH")]
    Dh,
    #[serde(rename = "DSA")]
    Dsa,
    #[serde(rename = "AES")]
    Aes,
    #[serde(rename = "TDES")]
    Tdes,
    #[serde(rename = "SHA2")]
    Sha2,
    #[serde(rename = "SHA1")]
    Sha1,
    #[serde(rename = "MD5")]
    Md5,
    #[serde(rename = "ML-KEM")]
    MlKem,
    #[serde(rename = "ML-DSA")]
    MlDsa,
    #[serde(rename = "SLH-DSA")]
    SlhDsa,
    #[serde(rename = "XMSS")]
    Xmss,
    #[serde(rename = "LMS")]
    Lms,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl MechanismFamily {
    pub const ALL: [MechanismFamily; 15] = [
        Self::Rsa,
        Self::Ecc,
        Self::Dh,
        Self::Dsa,
        Self::Aes,
        Self::Tdes,
        Self::Sha2,
        Self::Sha1,
        Self::Md5,
        Self::MlKem,
        Self::MlDsa,
        Self::SlhDsa,
        Self::Xmss,
        Self::Lms,
        Self::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rsa => "RSA",
            Self::Ecc => "ECC",
            Self::Dh => "DH",
            Self::Dsa => "DSA",
            Self::Aes => "AES",
            Self::Tdes => "TDES",
            Self::Sha2 => "SHA2",
            Self::Sha1 => "SHA1",
            Self::Md5 => "MD5",
            Self::MlKem => "ML-KEM",
            Self::MlDsa => "ML-DSA",
            Self::SlhDsa => "SLH-DSA",
            Self::Xmss => "XMSS",
            Self::Lms => "LMS",
            Self::Unknown => "UNKNOWN",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let upper = name.trim().to_ascii_uppercase();
        Self::ALL.into_iter().find(|f| f.as_str() == upper)
    }

    /// Classical public-key families (broken by a large quantum computer).
    pub fn is_classical_public_key(self) -> bool {
        matches!(self, Self::Rsa | Self::Ecc | Self::Dh | Self::Dsa)
    }

    pub fn is_pqc(self) -> bool {
        matches!(self, Self::MlKem | Self::MlDsa | Self::SlhDsa | Self::Xmss | Self::Lms)
    }

    fn default_usage(self) -> UsageRole {
        match self {
            Self::Dh | Self::MlKem => UsageRole::KeyExchange,
            Self::Dsa | Self::MlDsa | Self::SlhDsa | Self::Xmss | Self::Lms => UsageRole::Signing,
            Self::Aes | Self::Tdes => UsageRole::Encryption,
            Self::Sha2 | Self::Sha1 | Self::Md5 => UsageRole::Hashing,
            Self::Rsa | Self::Ecc | Self::Unknown => UsageRole::Unknown,
        }
    }
}

impl fmt::Display for MechanismFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProtocolContext {
    /// TLS observed or declared without a specific version.
    #[serde(rename = "TLS")]
    Tls,
    #[serde(rename = "TLS1.0")]
    Tls10,
    #[serde(rename = "TLS1.1")]
    Tls11,
    #[serde(rename = "TLS1.2")]
    Tls12,
    #[serde(rename = "TLS1.3")]
    Tls13,
    #[serde(rename = "SSH")]
    Ssh,
    #[serde(rename = "IPSEC")]
    Ipsec,
    #[serde(rename = "NONE")]
    None,
}

impl ProtocolContext {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tls => "TLS",
            Self::Tls10 => "TLS1.0",
            Self::Tls11 => "TLS1.1",
            Self::Tls12 => "TLS1.2",
            Self::Tls13 => "TLS1.3",
            Self::Ssh => "SSH",
            Self::Ipsec => "IPSEC",
            Self::None => "NONE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let upper = name.trim().to_ascii_uppercase();
        [
            Self::Tls,
            Self::Tls10,
            Self::Tls11,
            Self::Tls12,
            Self::Tls13,
            Self::Ssh,
            Self::Ipsec,
            Self::None,
        ]
        .into_iter()
        .find(|p| p.as_str() == upper)
    }

    pub fn is_tls(self) -> bool {
        matches!(self, Self::Tls | Self::Tls10 | Self::Tls11 | Self::Tls12 | Self::Tls13)
    }
}

impl fmt::Display for ProtocolContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UsageRole {
    Signing,
    KeyExchange,
    Encryption,
    KeyWrapping,
    Hashing,
    Unknown,
}

/// A normalized algorithm identity.
///
/// `raw` is only populated for [`MechanismFamily::Unknown`], where it keeps
/// the label the mechanism was parsed from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CryptoMechanism {
    pub family: MechanismFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol_context: Option<ProtocolContext>,
    pub usage_role: UsageRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

impl CryptoMechanism {
    pub fn new(family: MechanismFamily, parameter: Option<&str>) -> Result<Self> {
        let m = CryptoMechanism {
            family,
            parameter: parameter.map(str::to_owned),
            protocol_context: None,
            usage_role: family.default_usage(),
            raw: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn unknown(raw: impl Into<String>) -> Self {
        CryptoMechanism {
            family: MechanismFamily::Unknown,
            parameter: None,
            protocol_context: None,
            usage_role: UsageRole::Unknown,
            raw: Some(raw.into()),
        }
    }

    pub fn with_protocol(mut self, protocol: ProtocolContext) -> Self {
        self.protocol_context = Some(protocol);
        self
    }

    pub fn with_usage(mut self, usage: UsageRole) -> Self {
        self.usage_role = usage;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.family, &self.parameter) {
            (MechanismFamily::Unknown, Some(p)) => {
                Err(Error::Input(format!("UNKNOWN mechanism cannot carry parameter {p:?}")))
            }
            (_, Some(p)) if p.is_empty() => Err(Error::Input("empty mechanism parameter".into())),
            (_, Some(p)) if p.bytes().all(|b| b.is_ascii_digit()) && numeric(p) == Some(0) => {
                Err(Error::Input(format!("numeric parameter must be positive, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// The parameter as a positive integer, when it is numeric.
    pub fn numeric_parameter(&self) -> Option<u32> {
        self.parameter.as_deref().and_then(numeric)
    }
}

fn numeric(p: &str) -> Option<u32> {
    if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    p.parse().ok()
}

impl fmt::Display for CryptoMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.family, &self.parameter, &self.raw) {
            (MechanismFamily::Unknown, _, Some(raw)) => write!(f, "UNKNOWN({raw})")?,
            (MechanismFamily::Ecc, Some(p), _) => write!(f, "ECC {p}")?,
            (family, Some(p), _) => write!(f, "{family}-{p}")?,
            (family, None, _) => write!(f, "{family}")?,
        }
        if let Some(proto) = self.protocol_context {
            write!(f, " [{proto}]")?;
        }
        Ok(())
    }
}

/// Parses one mechanism label.
///
/// The first token naming an algorithm family decides the family; parameters
/// (key sizes, curves, digest lengths) are taken from the same token or, failing
/// that, from any other token in the label.
pub fn parse_mechanism_label(label: &str) -> Result<CryptoMechanism> {
    let trimmed = label.trim();
    if trimmed.is_empty() {
        return Err(Error::Input("empty mechanism label".into()));
    }
    let tokens = tokenize(trimmed);

    let protocol = detect_protocol(&tokens);
    let usage = detect_usage(&tokens);

    let Some((family, mut parameter)) = tokens.iter().find_map(|t| family_token(t)) else {
        let mut m = CryptoMechanism::unknown(trimmed);
        m.protocol_context = protocol;
        if let Some(u) = usage {
            m.usage_role = u;
        }
        return Ok(m);
    };

    if parameter.is_none() {
        parameter = match family {
            MechanismFamily::Ecc => tokens.iter().find_map(|t| curve_name(t)),
            MechanismFamily::Rsa
            | MechanismFamily::Dh
            | MechanismFamily::Dsa
            | MechanismFamily::Aes
            | MechanismFamily::Sha2 => tokens.iter().find_map(|t| bit_length(t)),
            _ => None,
        };
    }

    let mut m = CryptoMechanism {
        family,
        parameter,
        protocol_context: protocol,
        usage_role: usage.unwrap_or_else(|| family.default_usage()),
        raw: None,
    };
    if m.validate().is_err() {
        m.parameter = None;
    }
    Ok(m)
}

/// Parses a label that may name several mechanisms ("ECC + RSA mix, mutual TLS").
///
/// Segments that name no known family are dropped unless nothing else is
/// recognized, in which case the whole label becomes one UNKNOWN mechanism.
/// A protocol named in any segment is attached to mechanisms that lack one.
pub fn parse_mechanism_set(label: &str) -> Result<Vec<CryptoMechanism>> {
    let trimmed = label.trim();
    if trimmed.is_empty() {
        return Err(Error::Input("empty mechanism label".into()));
    }
    let mut known: Vec<CryptoMechanism> = Vec::new();
    let mut protocol = None;
    for segment in split_segments(trimmed) {
        let m = parse_mechanism_label(segment)?;
        if protocol.is_none() {
            protocol = m.protocol_context;
        }
        if m.family != MechanismFamily::Unknown
            && !known.iter().any(|k| k.family == m.family && k.parameter == m.parameter)
        {
            known.push(m);
        }
    }
    if known.is_empty() {
        return Ok(vec![parse_mechanism_label(trimmed)?]);
    }
    if let Some(p) = protocol {
        for m in &mut known {
            m.protocol_context.get_or_insert(p);
        }
    }
    Ok(known)
}

fn split_segments(label: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = label;
    let separators = ["+", ",", ";", "&", " / ", " and ", " AND ", " mix", " MIX"];
    while !rest.is_empty() {
        let next = separators
            .iter()
            .filter_map(|s| rest.find(s).map(|i| (i, s.len())))
            .min();
        match next {
            Some((i, len)) => {
                out.push(&rest[..i]);
                rest = &rest[i + len..];
            }
            None => {
                out.push(rest);
                break;
            }
        }
    }
    out.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn tokenize(label: &str) -> Vec<String> {
    label
        .to_ascii_uppercase()
        .split(|c: char| {
            c.is_whitespace()
                || matches!(
                    c,
                    ',' | ';' | '(' | ')' | '[' | ']' | '+' | '/' | ':' | '_' | '|' | '"' | '\''
                )
        })
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

fn rest_param(rest: &str) -> Option<String> {
    let rest = rest.trim_matches('-');
    (!rest.is_empty()).then(|| rest.to_owned())
}

fn leading_digits(rest: &str) -> Option<String> {
    let digits: String = rest
        .trim_start_matches('-')
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    (!digits.is_empty() && numeric(&digits).is_some_and(|n| n > 0)).then_some(digits)
}

fn family_token(tok: &str) -> Option<(MechanismFamily, Option<String>)> {
    use MechanismFamily as F;

    for (prefixes, family) in [
        (&["ML-KEM", "MLKEM", "KYBER"][..], F::MlKem),
        (&["ML-DSA", "MLDSA", "DILITHIUM"][..], F::MlDsa),
        (&["SLH-DSA", "SLHDSA", "SPHINCS+", "SPHINCS"][..], F::SlhDsa),
        (&["XMSS"][..], F::Xmss),
        (&["HSS-LMS", "LMS", "HSS"][..], F::Lms),
    ] {
        for p in prefixes {
            if let Some(rest) = tok.strip_prefix(p) {
                if rest.is_empty()
                    || rest.starts_with('-')
                    || rest.starts_with(|c: char| c.is_ascii_digit())
                    || *p == "XMSS"
                {
                    return Some((family, rest_param(rest)));
                }
            }
        }
    }

    // Signature algorithm names such as SHA256WITHRSAENCRYPTION name the
    // public-key family, not the digest.
    if tok.contains("WITHRSA") || tok.contains("WITH-RSA") {
        return Some((F::Rsa, None));
    }
    if tok.starts_with("ECDSA") || tok.contains("WITHECDSA") {
        return Some((F::Ecc, None));
    }
    if tok.contains("WITHDSA") || tok.contains("WITH-DSA") {
        return Some((F::Dsa, None));
    }

    if let Some(curve) = curve_name(tok) {
        return Some((F::Ecc, Some(curve)));
    }
    match tok {
        "ECC" | "EC" | "ECDH" | "ECDHE" | "EDDSA" | "ECIES" => return Some((F::Ecc, None)),
        "ED25519" => return Some((F::Ecc, Some("Ed25519".to_owned()))),
        "X25519" => return Some((F::Ecc, Some("X25519".to_owned()))),
        "ED448" => return Some((F::Ecc, Some("Ed448".to_owned()))),
        "X448" => return Some((F::Ecc, Some("X448".to_owned()))),
        _ => {}
    }
    if tok.starts_with("ECDHE-") || tok.starts_with("ECDH-") || tok.starts_with("EC-") {
        return Some((F::Ecc, None));
    }

    if let Some(rest) = tok.strip_prefix("RSA") {
        return Some((F::Rsa, leading_digits(rest)));
    }
    if tok == "DSA" || tok.starts_with("DSA-") {
        return Some((F::Dsa, leading_digits(&tok[3..])));
    }
    if tok == "DIFFIE-HELLMAN" || tok == "DIFFIEHELLMAN" {
        return Some((F::Dh, None));
    }
    for p in ["FFDHE", "DHE", "DH"] {
        if let Some(rest) = tok.strip_prefix(p) {
            if rest.is_empty() || rest.starts_with('-') || rest.starts_with(|c: char| c.is_ascii_digit()) {
                let digits = leading_digits(rest);
                // DHE-RSA-AES... is an OpenSSL cipher name; DH is the key exchange.
                return Some((F::Dh, digits));
            }
        }
    }

    if let Some(rest) = tok.strip_prefix("AES") {
        return Some((F::Aes, leading_digits(rest)));
    }
    if matches!(
        tok,
        "3DES" | "TDES" | "TRIPLEDES" | "TRIPLE-DES" | "DES" | "DES3" | "DESEDE"
    ) || tok.starts_with("DES-EDE")
        || tok.starts_with("DES-CBC3")
        || tok.starts_with("3DES-")
    {
        return Some((F::Tdes, None));
    }
    if let Some(rest) = tok.strip_prefix("SHA") {
        let rest = rest.trim_start_matches('-');
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        return match digits.as_str() {
            "1" => Some((F::Sha1, None)),
            "2" => Some((F::Sha2, None)),
            "224" | "256" | "384" | "512" => Some((F::Sha2, Some(digits))),
            _ => None,
        };
    }
    if tok.starts_with("MD5") {
        return Some((F::Md5, None));
    }
    None
}

fn curve_name(tok: &str) -> Option<String> {
    let name = match tok {
        "P-256" | "P256" | "SECP256R1" | "PRIME256V1" | "NISTP256" => "P-256",
        "P-384" | "P384" | "SECP384R1" | "NISTP384" => "P-384",
        "P-521" | "P521" | "SECP521R1" | "NISTP521" => "P-521",
        "P-224" | "P224" | "SECP224R1" => "P-224",
        "SECP256K1" => "secp256k1",
        "BRAINPOOLP256R1" => "brainpoolP256r1",
        "BRAINPOOLP384R1" => "brainpoolP384r1",
        "BRAINPOOLP512R1" => "brainpoolP512r1",
        _ => return None,
    };
    Some(name.to_owned())
}

fn bit_length(tok: &str) -> Option<String> {
    let t = tok
        .strip_suffix("-BIT")
        .or_else(|| tok.strip_suffix("BIT"))
        .or_else(|| tok.strip_suffix("-BITS"))
        .or_else(|| tok.strip_suffix("BITS"))
        .unwrap_or(tok);
    numeric(t).filter(|n| *n >= 64).map(|n| n.to_string())
}

fn detect_protocol(tokens: &[String]) -> Option<ProtocolContext> {
    for (i, t) in tokens.iter().enumerate() {
        let version = |v: &str| match v.trim_start_matches('V') {
            "1.0" | "10" | "1" => Some(ProtocolContext::Tls10),
            "1.1" | "11" => Some(ProtocolContext::Tls11),
            "1.2" | "12" => Some(ProtocolContext::Tls12),
            "1.3" | "13" => Some(ProtocolContext::Tls13),
            _ => None,
        };
        if let Some(rest) = t.strip_prefix("TLS") {
            if rest.is_empty() {
                let next = tokens.get(i + 1).and_then(|n| version(n));
                return Some(next.unwrap_or(ProtocolContext::Tls));
            }
            if let Some(v) = version(rest) {
                return Some(v);
            }
        }
        match t.as_str() {
            "MTLS" | "HTTPS" | "SSL" => return Some(ProtocolContext::Tls),
            "SSH" | "SSHV2" | "SFTP" => return Some(ProtocolContext::Ssh),
            "IPSEC" | "IKE" | "IKEV2" => return Some(ProtocolContext::Ipsec),
            _ => {}
        }
    }
    None
}

fn detect_usage(tokens: &[String]) -> Option<UsageRole> {
    for (i, t) in tokens.iter().enumerate() {
        if t.starts_with("SIGN") {
            return Some(UsageRole::Signing);
        }
        if t.starts_with("WRAP") {
            return Some(UsageRole::KeyWrapping);
        }
        if t.starts_with("ENCRYPT") {
            return Some(UsageRole::Encryption);
        }
        if t.starts_with("HASH") || t == "DIGEST" {
            return Some(UsageRole::Hashing);
        }
        if t == "KEX" || t == "KEM" || t == "KEY-EXCHANGE" || t == "KEYEXCHANGE" {
            return Some(UsageRole::KeyExchange);
        }
        if t == "KEY" {
            match tokens.get(i + 1).map(String::as_str) {
                Some("EXCHANGE") | Some("AGREEMENT") | Some("ESTABLISHMENT") => return Some(UsageRole::KeyExchange),
                Some(n) if n.starts_with("WRAP") => return Some(UsageRole::KeyWrapping),
                _ => {}
            }
        }
    }
    None
}
