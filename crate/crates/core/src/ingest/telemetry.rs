use crate::discovery::{ProbeOutcome, TlsObservation};
use crate::model::{parse_mechanism_label, DiscoveryFinding, FindingKind, FindingSource, ProtocolContext, UsageRole};

pub const PROBE_ORIGIN: &str = "tls-probe";

/// Converts one observation into DYNAMIC findings: negotiated key exchange,
/// cipher suite, and one finding per presented certificate. Failed probes
/// carry no evidence.
pub fn findings_from_observation(obs: &TlsObservation) -> Vec<DiscoveryFinding> {
    if obs.probe_outcome != ProbeOutcome::Ok {
        return Vec::new();
    }
    let endpoint = obs.endpoint.to_string();
    let proto = obs.negotiated_version.unwrap_or(ProtocolContext::Tls);
    let base = |location: String, mechanism, kind, excerpt: String, artifact| DiscoveryFinding {
        source: FindingSource::Dynamic,
        asset_hint: endpoint.clone(),
        location,
        mechanism,
        kind,
        observed_at: obs.observed_at,
        origin_id: PROBE_ORIGIN.to_owned(),
        raw_excerpt: excerpt,
        artifact_id: artifact,
        supplier: None,
        depends_on: None,
    };

    let mut out = Vec::new();
    if let Some(group) = &obs.key_exchange_group {
        if let Ok(m) = parse_mechanism_label(group) {
            out.push(base(
                format!("tls://{endpoint}/kx"),
                m.with_protocol(proto).with_usage(UsageRole::KeyExchange),
                FindingKind::TlsHandshake,
                format!("{} {group}", proto.as_str()),
                None,
            ));
        }
    }
    if let Some(suite) = &obs.cipher_suite {
        if let Ok(m) = parse_mechanism_label(suite) {
            out.push(base(
                format!("tls://{endpoint}/cipher"),
                m.with_protocol(proto),
                FindingKind::TlsHandshake,
                format!("{} {suite}", proto.as_str()),
                None,
            ));
        }
    }
    for (i, cert) in obs.certificate_chain.iter().enumerate() {
        out.push(base(
            format!("tls://{endpoint}/cert/{i}"),
            cert.public_key_algorithm.clone().with_protocol(proto),
            FindingKind::Certificate,
            format!("subject={} sig={}", cert.subject, cert.signature_algorithm),
            Some(cert.fingerprint_sha256.clone()),
        ));
    }
    for f in &mut out {
        f.raw_excerpt = crate::scan::redact_excerpt(&f.raw_excerpt);
    }
    out
}
