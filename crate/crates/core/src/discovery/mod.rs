//! Dynamic discovery: TLS probing, certificate parsing, and replay of
//! captured observation files.

mod cert;
mod observation;
mod probe;

pub use cert::{parse_certificate, parse_pem_bundle, CertificateRecord};
pub use observation::{
    ingest_observation_file, parse_observations, write_observation_file, ProbeOutcome, TlsObservation,
};
pub use probe::{probe_many, probe_tls, probe_tls_deep, read_targets, Endpoint, ProbeOptions};
