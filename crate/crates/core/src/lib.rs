//! Discovery-first post-quantum readiness tooling.
//!
//! The crate turns raw cryptographic evidence (source scans, TLS probes,
//! supplier crypto-SBOMs) into a versioned Quantum Exposure Register:
//!
//! 1. [`scan`] and [`discovery`] produce [`DiscoveryFinding`]s.
//! 2. [`ingest`] groups findings into candidate assets and fuses evidence confidence.
//! 3. [`enrich`] joins governance metadata (criticality, shelf life, ownership).
//! 4. [`exposure`] evaluates time-based exposure, priority scores, and migration waves.
//! 5. [`store`] persists immutable register versions with an audit log.
//! 6. [`report`] computes portfolio statistics, renders committee reports, and
//!    generates seeded synthetic estates.

pub mod discovery;
pub mod enrich;
pub mod error;
pub mod exposure;
pub mod fixture;
pub mod ingest;
pub mod jsonl;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod scan;
pub mod store;

pub use error::{Error, Result};
pub use model::{
    CiaTriple, CryptoMechanism, DiscoveryFinding, EvidenceConfidence, ExceptionKind, ExceptionNote, FindingKind,
    FindingSource, MechanismFamily, ProtocolContext, Rating, UsageRole, VulnerabilityClass,
};
