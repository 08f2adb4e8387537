//! Time-based exposure, priority scoring, wave assignment, overrides, and
//! threat-horizon scenarios.

mod score;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use score::{
    criticality_score, evidence_penalty, priority_score, time_exposure_score, PriorityBand, PriorityResult, Score,
    WEIGHTS_TENTHS,
};

use crate::enrich::EnrichedAsset;
use crate::error::{Error, Result};

/// The assumed number of years until a cryptographically relevant quantum
/// computer. One scenario governs a whole register version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatScenario {
    pub t_threat_years: f64,
    pub scenario_label: String,
    #[serde(default)]
    pub source_note: String,
}

impl ThreatScenario {
    pub fn new(t_threat_years: f64, label: impl Into<String>, note: impl Into<String>) -> Result<Self> {
        let s = ThreatScenario {
            t_threat_years,
            scenario_label: label.into(),
            source_note: note.into(),
        };
        s.validate()?;
        Ok(s)
    }

    /// A scenario labelled after its horizon.
    pub fn years(t_threat_years: f64) -> Result<Self> {
        Self::new(
            t_threat_years,
            format!("T_threat = {} years", crate::enrich::format_years(t_threat_years)),
            "",
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_threat_years.is_finite() || self.t_threat_years <= 0.0 {
            return Err(Error::Input(format!(
                "threat horizon must be positive, got {}",
                self.t_threat_years
            )));
        }
        Ok(())
    }
}

/// Ordered `No < Borderline < Yes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExposureStatus {
    No,
    Borderline,
    Yes,
}

impl ExposureStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Yes => "Yes",
            Self::Borderline => "Borderline",
            Self::No => "No",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Self::Yes),
            "borderline" => Ok(Self::Borderline),
            "no" => Ok(Self::No),
            other => Err(Error::Input(format!("unknown exposure status {other:?}"))),
        }
    }
}

impl fmt::Display for ExposureStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Exposed when shelf life plus migration time exceeds the horizon. An
/// exposed asset whose shelf life alone stays within the horizon is
/// BORDERLINE: only the migration duration pushes it over.
pub fn exposure_status(t_shelf: f64, t_migration: f64, t_threat: f64) -> Result<ExposureStatus> {
    for (name, v) in [("t_shelf", t_shelf), ("t_migration", t_migration)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Input(format!("{name} must be non-negative, got {v}")));
        }
    }
    if !t_threat.is_finite() || t_threat <= 0.0 {
        return Err(Error::Input(format!("t_threat must be positive, got {t_threat}")));
    }
    Ok(if t_shelf + t_migration <= t_threat {
        ExposureStatus::No
    } else if t_shelf > t_threat {
        ExposureStatus::Yes
    } else {
        ExposureStatus::Borderline
    })
}

pub fn evaluate_exposure(t_shelf: f64, t_migration: f64, scenario: &ThreatScenario) -> Result<ExposureStatus> {
    exposure_status(t_shelf, t_migration, scenario.t_threat_years)
}

/// A governance decision replacing the algorithmic wave.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveOverride {
    pub actor: String,
    pub timestamp: DateTime<Utc>,
    pub from_wave: u8,
    pub to_wave: u8,
    pub rationale: String,
}

/// One register row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QerEntry {
    pub qer_id: String,
    pub enriched: EnrichedAsset,
    pub scenario: ThreatScenario,
    pub exposure: ExposureStatus,
    pub priority: PriorityResult,
    pub assigned_wave: u8,
    #[serde(rename = "override", default, skip_serializing_if = "Option::is_none")]
    pub wave_override: Option<WaveOverride>,
}

impl QerEntry {
    pub fn validate(&self) -> Result<()> {
        match &self.wave_override {
            None if self.assigned_wave != self.priority.algorithmic_wave => Err(Error::Input(format!(
                "{}: assigned wave {} differs from algorithmic wave {} without an override",
                self.qer_id, self.assigned_wave, self.priority.algorithmic_wave
            ))),
            Some(o) if o.to_wave != self.assigned_wave || o.rationale.trim().is_empty() => Err(Error::Input(format!(
                "{}: override record is inconsistent",
                self.qer_id
            ))),
            _ => Ok(()),
        }
    }

    pub fn is_overridden(&self) -> bool {
        self.wave_override.is_some()
    }
}

/// Scores one asset under `scenario`.
pub fn evaluate_asset(asset: &EnrichedAsset, scenario: &ThreatScenario) -> Result<QerEntry> {
    let m = &asset.metadata;
    let exposure = evaluate_exposure(m.t_shelf_years, m.t_migration_years, scenario)
        .map_err(|e| Error::Input(format!("{}: {e}", asset.qer_id())))?;
    let priority = priority_score(
        criticality_score(&m.criticality),
        time_exposure_score(exposure),
        evidence_penalty(asset.evidence),
    )?;
    Ok(QerEntry {
        qer_id: asset.qer_id().to_owned(),
        enriched: asset.clone(),
        scenario: scenario.clone(),
        exposure,
        priority,
        assigned_wave: priority.algorithmic_wave,
        wave_override: None,
    })
}

/// Sort order for register output: priority descending, then QER id.
pub fn register_order(a: &QerEntry, b: &QerEntry) -> std::cmp::Ordering {
    b.priority
        .priority
        .cmp(&a.priority.priority)
        .then_with(|| a.qer_id.cmp(&b.qer_id))
}

pub fn build_entries(assets: &[EnrichedAsset], scenario: &ThreatScenario) -> Result<Vec<QerEntry>> {
    scenario.validate()?;
    let mut seen = BTreeSet::new();
    for a in assets {
        if !seen.insert(a.qer_id()) {
            return Err(Error::Input(format!("duplicate QER id {}", a.qer_id())));
        }
    }
    let mut entries = assets
        .par_iter()
        .map(|a| evaluate_asset(a, scenario))
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(register_order);
    Ok(entries)
}

/// Replaces the assigned wave; the algorithmic wave is left as computed.
pub fn apply_override(
    entry: &QerEntry,
    to_wave: u8,
    actor: &str,
    rationale: &str,
    at: DateTime<Utc>,
) -> Result<QerEntry> {
    if rationale.trim().is_empty() {
        return Err(Error::Input("override rationale must not be empty".into()));
    }
    if actor.trim().is_empty() {
        return Err(Error::Input("override actor must not be empty".into()));
    }
    if !(1..=4).contains(&to_wave) {
        return Err(Error::Input(format!("wave {to_wave} is outside 1-4")));
    }
    let mut out = entry.clone();
    out.wave_override = Some(WaveOverride {
        actor: actor.trim().to_owned(),
        timestamp: at,
        from_wave: entry.assigned_wave,
        to_wave,
        rationale: rationale.trim().to_owned(),
    });
    out.assigned_wave = to_wave;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub exposure: ExposureStatus,
    pub priority: Score,
    pub algorithmic_wave: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: ThreatScenario,
    pub outcomes: BTreeMap<String, ScenarioOutcome>,
}

impl ScenarioResult {
    pub fn count(&self, status: ExposureStatus) -> usize {
        self.outcomes.values().filter(|o| o.exposure == status).count()
    }
}

pub fn run_scenario(assets: &[EnrichedAsset], scenario: &ThreatScenario) -> Result<ScenarioResult> {
    let entries = build_entries(assets, scenario)?;
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        outcomes: entries
            .into_iter()
            .map(|e| {
                let o = ScenarioOutcome {
                    exposure: e.exposure,
                    priority: e.priority.priority,
                    algorithmic_wave: e.priority.algorithmic_wave,
                };
                (e.qer_id, o)
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioChange {
    pub qer_id: String,
    pub before: ScenarioOutcome,
    pub after: ScenarioOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDiff {
    pub t_threat_before: f64,
    pub t_threat_after: f64,
    pub changes: Vec<ScenarioChange>,
}

/// Every asset whose status, score, or wave differs, ordered by QER id.
pub fn diff_scenarios(a: &ScenarioResult, b: &ScenarioResult) -> Result<ScenarioDiff> {
    if a.outcomes.len() != b.outcomes.len() || !a.outcomes.keys().eq(b.outcomes.keys()) {
        return Err(Error::Input("scenario results cover different asset sets".into()));
    }
    let changes = a
        .outcomes
        .iter()
        .zip(b.outcomes.values())
        .filter(|((_, x), y)| x != y)
        .map(|((id, x), y)| ScenarioChange {
            qer_id: id.clone(),
            before: *x,
            after: *y,
        })
        .collect();
    Ok(ScenarioDiff {
        t_threat_before: a.scenario.t_threat_years,
        t_threat_after: b.scenario.t_threat_years,
        changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(s: f64, m: f64, t: f64) -> ExposureStatus {
        exposure_status(s, m, t).unwrap()
    }

    #[test]
    fn register_examples() {
        assert_eq!(st(15.0, 3.0, 8.0), ExposureStatus::Yes);
        assert_eq!(st(5.0, 2.0, 8.0), ExposureStatus::No);
        assert_eq!(st(7.0, 1.0, 8.0), ExposureStatus::No);
        assert_eq!(st(8.0, 3.0, 8.0), ExposureStatus::Borderline);
        assert_eq!(st(0.0, 0.0, 8.0), ExposureStatus::No);
    }

    #[test]
    fn bad_inputs() {
        assert!(exposure_status(-1.0, 0.0, 8.0).is_err());
        assert!(exposure_status(1.0, -0.5, 8.0).is_err());
        assert!(exposure_status(1.0, 1.0, 0.0).is_err());
        assert!(exposure_status(f64::NAN, 1.0, 8.0).is_err());
        assert!(ThreatScenario::years(0.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_each_argument(
            s in 0.0f64..40.0, m in 0.0f64..15.0, t in 0.1f64..40.0, d in 0.0f64..10.0,
        ) {
            let base = st(s, m, t);
            prop_assert!(st(s + d, m, t) >= base);
            prop_assert!(st(s, m + d, t) >= base);
            prop_assert!(st(s, m, t + d) <= base);
        }

        #[test]
        fn integer_inputs_agree_with_definition(s in 0u32..30, m in 0u32..10, t in 1u32..30) {
            let expected = if s + m <= t {
                ExposureStatus::No
            } else if s > t {
                ExposureStatus::Yes
            } else {
                ExposureStatus::Borderline
            };
            prop_assert_eq!(st(f64::from(s), f64::from(m), f64::from(t)), expected);
        }
    }
}
