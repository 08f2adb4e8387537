use std::fmt;
use std::io::{self, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::Utc;
use rayon::prelude::*;
use rustls::client::danger::{HandshakeSignatureValid, ServerCertVerified, ServerCertVerifier};
use rustls::crypto::{verify_tls12_signature, verify_tls13_signature, CryptoProvider};
use rustls::pki_types::{CertificateDer, ServerName, UnixTime};
use rustls::{ClientConfig, ClientConnection, DigitallySignedStruct, ProtocolVersion, SignatureScheme};
use serde::{Deserialize, Serialize};

use super::cert::parse_der;
use super::observation::{ProbeOutcome, TlsObservation};
use crate::error::{Error, Result};
use crate::model::ProtocolContext;

/// A `host:port` probe target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Input(format!("endpoint {s:?} is not host:port"));
        let (host, port) = if let Some(rest) = s.strip_prefix('[') {
            let (h, p) = rest.split_once("]:").ok_or_else(bad)?;
            (h, p)
        } else {
            s.rsplit_once(':').ok_or_else(bad)?
        };
        if host.is_empty() || host.contains(char::is_whitespace) || (host.contains(':') && !s.starts_with('[')) {
            return Err(bad());
        }
        let port: u16 = port.parse().map_err(|_| bad())?;
        if port == 0 {
            return Err(bad());
        }
        Ok(Endpoint {
            host: host.to_owned(),
            port,
        })
    }
}

impl TryFrom<String> for Endpoint {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Endpoint> for String {
    fn from(e: Endpoint) -> String {
        e.to_string()
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "[{}]:{}", self.host, self.port)
        } else {
            write!(f, "{}:{}", self.host, self.port)
        }
    }
}

/// Reads a targets file: one `host:port` per line, `#` starts a comment.
pub fn read_targets(text: &str) -> Result<Vec<Endpoint>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            (!l.is_empty()).then_some((i, l))
        })
        .map(|(i, l)| {
            l.parse()
                .map_err(|e: Error| Error::format("targets file", i + 1, e.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub timeout: Duration,
    /// Lowest protocol version the client offers.
    pub version_floor: ProtocolContext,
    pub parallelism: usize,
    /// Maximum new connections per second across the whole batch.
    pub rate_per_second: Option<f64>,
    /// Probe once per offerable protocol version instead of once per endpoint.
    pub deep: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            timeout: Duration::from_secs(5),
            version_floor: ProtocolContext::Tls12,
            parallelism: 8,
            rate_per_second: None,
            deep: false,
        }
    }
}

/// Accepts any chain. Handshake signatures are still checked so the
/// negotiated parameters are genuine.
#[derive(Debug)]
struct RecordingVerifier(Arc<CryptoProvider>);

impl ServerCertVerifier for RecordingVerifier {
    fn verify_server_cert(
        &self,
        _end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _server_name: &ServerName<'_>,
        _ocsp_response: &[u8],
        _now: UnixTime,
    ) -> std::result::Result<ServerCertVerified, rustls::Error> {
        Ok(ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> std::result::Result<HandshakeSignatureValid, rustls::Error> {
        verify_tls12_signature(message, cert, dss, &self.0.signature_verification_algorithms)
    }

    fn verify_tls13_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> std::result::Result<HandshakeSignatureValid, rustls::Error> {
        verify_tls13_signature(message, cert, dss, &self.0.signature_verification_algorithms)
    }

    fn supported_verify_schemes(&self) -> Vec<SignatureScheme> {
        self.0.signature_verification_algorithms.supported_schemes()
    }
}

fn client_config(versions: &[&'static rustls::SupportedProtocolVersion]) -> Result<Arc<ClientConfig>> {
    let provider = Arc::new(rustls::crypto::ring::default_provider());
    let config = ClientConfig::builder_with_provider(provider.clone())
        .with_protocol_versions(versions)
        .map_err(|e| Error::Config(format!("TLS client: {e}")))?
        .dangerous()
        .with_custom_certificate_verifier(Arc::new(RecordingVerifier(provider)))
        .with_no_client_auth();
    Ok(Arc::new(config))
}

/// Versions offered for a floor. TLS 1.0 and 1.1 cannot be offered, so lower
/// floors behave like TLS 1.2.
fn offered_versions(floor: ProtocolContext) -> Vec<&'static rustls::SupportedProtocolVersion> {
    match floor {
        ProtocolContext::Tls13 => vec![&rustls::version::TLS13],
        _ => vec![&rustls::version::TLS13, &rustls::version::TLS12],
    }
}

/// One handshake against `endpoint`. Network failures become non-OK outcomes.
pub fn probe_tls(endpoint: &Endpoint, timeout: Duration, version_floor: ProtocolContext) -> Result<TlsObservation> {
    if timeout.is_zero() {
        return Err(Error::Input("probe timeout must be positive".into()));
    }
    let config = client_config(&offered_versions(version_floor))?;
    Ok(handshake(endpoint, timeout, config))
}

/// Probes once with TLS 1.3 only and once with TLS 1.2 only, recording which
/// versions the endpoint accepts.
pub fn probe_tls_deep(endpoint: &Endpoint, timeout: Duration) -> Result<Vec<TlsObservation>> {
    if timeout.is_zero() {
        return Err(Error::Input("probe timeout must be positive".into()));
    }
    let mut out = Vec::new();
    for v in [&rustls::version::TLS13, &rustls::version::TLS12] {
        out.push(handshake(endpoint, timeout, client_config(&[v])?));
    }
    Ok(out)
}

/// Probes every endpoint with bounded parallelism; output is sorted by
/// endpoint and holds one observation per endpoint (two in deep mode).
pub fn probe_many(endpoints: &[Endpoint], options: &ProbeOptions) -> Result<Vec<TlsObservation>> {
    if options.timeout.is_zero() {
        return Err(Error::Input("probe timeout must be positive".into()));
    }
    if options.parallelism == 0 {
        return Err(Error::Input("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("probe pool: {e}")))?;
    let limiter = options.rate_per_second.map(RateLimiter::new);
    let shallow = client_config(&offered_versions(options.version_floor))?;

    let mut results: Vec<TlsObservation> = pool
        .install(|| {
            endpoints
                .par_iter()
                .map(|ep| -> Result<Vec<TlsObservation>> {
                    if options.deep {
                        let mut v = Vec::new();
                        for version in [&rustls::version::TLS13, &rustls::version::TLS12] {
                            if let Some(l) = &limiter {
                                l.wait();
                            }
                            v.push(handshake(ep, options.timeout, client_config(&[version])?));
                        }
                        Ok(v)
                    } else {
                        if let Some(l) = &limiter {
                            l.wait();
                        }
                        Ok(vec![handshake(ep, options.timeout, shallow.clone())])
                    }
                })
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();
    results.sort_by(|a, b| a.endpoint.cmp(&b.endpoint));
    Ok(results)
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(per_second: f64) -> Self {
        let per_second = if per_second > 0.0 { per_second } else { 1.0 };
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / per_second),
            next: Mutex::new(Instant::now()),
        }
    }

    fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

fn handshake(endpoint: &Endpoint, timeout: Duration, config: Arc<ClientConfig>) -> TlsObservation {
    let observed_at = Utc::now();
    let fail = |outcome: ProbeOutcome, detail: String| TlsObservation {
        endpoint: endpoint.clone(),
        negotiated_version: None,
        cipher_suite: None,
        key_exchange_group: None,
        certificate_chain: Vec::new(),
        chain_notes: Vec::new(),
        observed_at,
        probe_outcome: outcome,
        detail: Some(detail),
    };

    let addrs: Vec<SocketAddr> = match (endpoint.host.as_str(), endpoint.port).to_socket_addrs() {
        Ok(a) => a.collect(),
        Err(e) => return fail(ProbeOutcome::Refused, format!("name resolution failed: {e}")),
    };
    let Some(addr) = addrs.first() else {
        return fail(ProbeOutcome::Refused, "name resolved to no addresses".into());
    };
    let deadline = Instant::now() + timeout;
    let mut sock = match TcpStream::connect_timeout(addr, timeout) {
        Ok(s) => s,
        Err(e) if is_timeout(&e) => return fail(ProbeOutcome::Timeout, format!("connect: {e}")),
        Err(e) => return fail(ProbeOutcome::Refused, format!("connect: {e}")),
    };
    let _ = sock.set_nodelay(true);

    let server_name = match ServerName::try_from(endpoint.host.clone()) {
        Ok(n) => n,
        Err(e) => return fail(ProbeOutcome::HandshakeFailed, format!("server name: {e}")),
    };
    let mut conn = match ClientConnection::new(config, server_name) {
        Ok(c) => c,
        Err(e) => return fail(ProbeOutcome::HandshakeFailed, e.to_string()),
    };

    while conn.is_handshaking() {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return fail(ProbeOutcome::Timeout, "handshake did not complete in time".into());
        }
        let _ = sock.set_read_timeout(Some(remaining));
        let _ = sock.set_write_timeout(Some(remaining));
        match conn.complete_io(&mut sock) {
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {
                return fail(ProbeOutcome::Timeout, format!("handshake: {e}"));
            }
            Err(e) => return fail(ProbeOutcome::HandshakeFailed, format!("handshake: {e}")),
        }
    }

    let negotiated_version = conn.protocol_version().map(version_context);
    let cipher_suite = conn.negotiated_cipher_suite().map(|s| suite_name(s.suite()));
    let key_exchange_group = conn.negotiated_key_exchange_group().map(|g| format!("{:?}", g.name()));
    let mut chain = Vec::new();
    let mut notes = Vec::new();
    for (i, der) in conn.peer_certificates().unwrap_or(&[]).iter().enumerate() {
        match parse_der(der.as_ref()) {
            Ok(c) => chain.push(c),
            Err(e) => notes.push(format!("certificate {i} unparseable: {e}")),
        }
    }
    if let Some(leaf) = chain.first() {
        if leaf.is_self_signed() {
            notes.push("leaf certificate is self-signed".into());
        }
        if leaf.not_after < observed_at {
            notes.push("leaf certificate expired".into());
        }
        if leaf.not_before > observed_at {
            notes.push("leaf certificate not yet valid".into());
        }
    }

    conn.send_close_notify();
    let _ = conn.write_tls(&mut sock);
    let _ = sock.flush();
    let _ = sock.shutdown(std::net::Shutdown::Write);

    TlsObservation {
        endpoint: endpoint.clone(),
        negotiated_version,
        cipher_suite,
        key_exchange_group,
        certificate_chain: chain,
        chain_notes: notes,
        observed_at,
        probe_outcome: ProbeOutcome::Ok,
        detail: None,
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock)
}

fn version_context(v: ProtocolVersion) -> ProtocolContext {
    match v {
        ProtocolVersion::TLSv1_3 => ProtocolContext::Tls13,
        ProtocolVersion::TLSv1_2 => ProtocolContext::Tls12,
        ProtocolVersion::TLSv1_1 => ProtocolContext::Tls11,
        ProtocolVersion::TLSv1_0 => ProtocolContext::Tls10,
        _ => ProtocolContext::Tls,
    }
}

/// IANA registry name for a suite.
fn suite_name(s: rustls::CipherSuite) -> String {
    let name = format!("{s:?}");
    match name.strip_prefix("TLS13_") {
        Some(rest) => format!("TLS_{rest}"),
        None => name,
    }
}
