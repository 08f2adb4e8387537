use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::PortfolioStats;
use crate::enrich::format_years;
use crate::error::{Error, Result};
use crate::exposure::{ExposureStatus, PriorityBand};
use crate::model::FindingSource;
use crate::store::{coverage_map, ExceptionRecord, RegisterVersion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReportTemplate {
    Summary,
    Committee,
}

impl ReportTemplate {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "summary" => Ok(Self::Summary),
            "committee" => Ok(Self::Committee),
            other => Err(Error::Input(format!("unknown report template {other:?}"))),
        }
    }
}

const FOOTER: &str = "Figures are aggregated from this register version alone. They summarize the \
evidence and governance data that was ingested and are not an independent measurement of the estate.";

fn pct(f: Option<f64>) -> String {
    f.map_or_else(|| "n/a".into(), |v| format!("{:.1}%", v * 100.0))
}

fn source_label(s: FindingSource) -> &'static str {
    match s {
        FindingSource::Static => "static",
        FindingSource::Dynamic => "dynamic",
        FindingSource::Sbom => "sbom",
        FindingSource::Dependency => "dependency",
    }
}

/// Plain-text report. Output depends only on the arguments.
pub fn render_report(
    version: &RegisterVersion,
    stats: &PortfolioStats,
    template: ReportTemplate,
    exceptions: &[ExceptionRecord],
) -> String {
    let mut out = String::new();
    let title = match template {
        ReportTemplate::Summary => "Quantum Exposure Register summary",
        ReportTemplate::Committee => "Quantum Exposure Register committee pack",
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "=".repeat(title.len()));
    let _ = writeln!(
        out,
        "Version {} committed {}",
        version.version_id,
        version.created_at.format("%Y-%m-%d %H:%M:%S UTC")
    );
    let _ = writeln!(
        out,
        "Threat horizon: {} years ({})",
        format_years(version.scenario.t_threat_years),
        version.scenario.scenario_label
    );
    let _ = writeln!(out);

    if stats.total_assets == 0 {
        let _ = writeln!(out, "This register version contains 0 assets.");
        let _ = writeln!(out);
        let _ = writeln!(out, "{FOOTER}");
        return out;
    }

    let _ = writeln!(out, "Assets: {}", stats.total_assets);
    let _ = writeln!(out);
    let _ = writeln!(out, "Migration waves (assigned)");
    for band in PriorityBand::ALL {
        let w = band.wave();
        let assigned = stats.wave_counts.get(&w).copied().unwrap_or(0);
        let algo = stats.algorithmic_wave_counts.get(&w).copied().unwrap_or(0);
        let _ = writeln!(out, "  Wave {w}: {assigned}  (computed {algo}, {})", band.label());
    }
    let _ = writeln!(out, "  Overridden entries: {}", stats.overridden_count);
    let _ = writeln!(out);

    let _ = writeln!(out, "Time exposure");
    let no = stats.total_assets - stats.time_exposed_count;
    let _ = writeln!(out, "  Yes: {}", stats.yes_count);
    let _ = writeln!(out, "  Borderline: {}", stats.borderline_count);
    let _ = writeln!(out, "  No: {no}");
    let _ = writeln!(
        out,
        "  Time-exposed in the critical band: {} ({})",
        stats.critical_time_exposed_count,
        pct(stats.critical_time_exposed_fraction)
    );
    let _ = writeln!(
        out,
        "  Shelf life of {} years or more: {}",
        format_years(stats.long_lived_threshold_years),
        stats.long_lived_count
    );
    let _ = writeln!(out);

    let coverage = coverage_map(&version.entries);
    let _ = writeln!(out, "Evidence coverage");
    for (src, n) in &coverage.assets_with_source {
        let _ = writeln!(
            out,
            "  {}: {n} of {} ({})",
            source_label(*src),
            coverage.total_assets,
            pct(coverage.ratio.get(src).copied())
        );
    }
    let _ = writeln!(
        out,
        "  Ownership unclear: {} ({})",
        stats.ownership_unknown_count,
        pct(stats.ownership_unknown_fraction)
    );
    let mix: Vec<String> = stats
        .mechanism_distribution
        .iter()
        .map(|(k, v)| format!("{k} {:.1}%", v * 100.0))
        .collect();
    if !mix.is_empty() {
        let _ = writeln!(out, "  Public-key mix: {}", mix.join(", "));
    }
    let _ = writeln!(
        out,
        "  Certificates: {}, endpoints: {}",
        stats.certificate_count, stats.endpoint_count
    );
    let _ = writeln!(out);

    if template == ReportTemplate::Committee {
        committee_sections(&mut out, version, exceptions);
    }

    let _ = writeln!(out, "{FOOTER}");
    out
}

fn committee_sections(out: &mut String, version: &RegisterVersion, exceptions: &[ExceptionRecord]) {
    let _ = writeln!(out, "Register extract");
    let _ = writeln!(
        out,
        "  {:<10} {:<44} {:<18} {:>5} {:>5} {:<10} {:<8} {:>5} {:<14} Owner",
        "QER ID", "Service", "C / I / A", "Shelf", "Migr", "Exposed", "Evidence", "Score", "Wave"
    );
    for e in &version.entries {
        let a = &e.enriched;
        let wave = match &e.wave_override {
            Some(_) => format!("{} (computed {})", e.assigned_wave, e.priority.algorithmic_wave),
            None => e.assigned_wave.to_string(),
        };
        let name: String = a.fields.service_name.chars().take(44).collect();
        let _ = writeln!(
            out,
            "  {:<10} {:<44} {:<18} {:>5} {:>5} {:<10} {:<8} {:>5} {:<14} {}",
            e.qer_id,
            name,
            a.metadata.criticality.to_string(),
            format_years(a.metadata.t_shelf_years),
            format_years(a.metadata.t_migration_years),
            e.exposure.label(),
            a.evidence.label(),
            e.priority.priority.to_string(),
            wave,
            a.metadata.raci.owner_label()
        );
    }
    let _ = writeln!(out);

    let overrides: Vec<_> = version
        .entries
        .iter()
        .filter_map(|e| e.wave_override.as_ref().map(|o| (e, o)))
        .collect();
    if !overrides.is_empty() {
        let _ = writeln!(out, "Governance overrides");
        for (e, o) in overrides {
            let _ = writeln!(
                out,
                "  {}: wave {} -> {} by {} at {}: {}",
                e.qer_id,
                o.from_wave,
                o.to_wave,
                o.actor,
                o.timestamp.format("%Y-%m-%d %H:%M:%S UTC"),
                o.rationale
            );
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out, "Exception register");
    if exceptions.is_empty() {
        let _ = writeln!(out, "  No open exceptions.");
    }
    for x in exceptions {
        let _ = writeln!(
            out,
            "  {} {}: {} (first seen {})",
            x.kind.as_str(),
            x.subject,
            x.detail,
            x.first_seen.format("%Y-%m-%d")
        );
    }
    let _ = writeln!(out);

    let exposed = version
        .entries
        .iter()
        .filter(|e| e.exposure != ExposureStatus::No)
        .count();
    let _ = writeln!(out, "Scenario note");
    let _ = writeln!(
        out,
        "  All entries were evaluated under a {}-year threat horizon; {exposed} of {} are time-exposed.",
        format_years(version.scenario.t_threat_years),
        version.entries.len()
    );
    if !version.scenario.source_note.is_empty() {
        let _ = writeln!(out, "  Source: {}", version.scenario.source_note);
    }
    let _ = writeln!(
        out,
        "  Re-run the scenario comparison whenever the horizon assumption changes."
    );
    let _ = writeln!(out);
}
