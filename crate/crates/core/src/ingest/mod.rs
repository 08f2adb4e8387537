//! Normalization of heterogeneous findings into candidate assets, and
//! evidence-confidence fusion.

mod assets;
mod fusion;
mod sbom;
mod telemetry;

pub use assets::{
    normalize, AssetRule, AssetRules, CandidateAsset, DependencyEdge, Normalized, Resolver, SystemContext,
    UNMAPPED_PREFIX,
};
pub use fusion::{fuse_evidence, fuse_findings};
pub use sbom::{
    ingest_crypto_sbom, load_sbom, parse_crypto_sbom, parse_dependency_map, CryptoSbomDocument, CycloneDxAdapter,
    DeclaredMechanism, SbomAdapter,
};
pub use telemetry::{findings_from_observation, PROBE_ORIGIN};
