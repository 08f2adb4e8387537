use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{CiaTriple, EvidenceConfidence, Rating};

use super::ExposureStatus;

/// A priority held as an integer number of tenths, so band boundaries are
/// compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Score(u16);

impl Score {
    pub const MIN: Score = Score(8);
    pub const MAX: Score = Score(28);

    pub const fn from_tenths(t: u16) -> Score {
        Score(t)
    }

    pub fn tenths(self) -> u16 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        let t = (v * 10.0).round();
        if !(0.0..=f64::from(u16::MAX)).contains(&t) || (v * 10.0 - t).abs() > 1e-6 {
            return Err(serde::de::Error::custom(format!("{v} is not a whole number of tenths")));
        }
        Ok(Score(t as u16))
    }
}

/// Weights in tenths: criticality 0.4, time exposure 0.4, evidence penalty 0.2.
pub const WEIGHTS_TENTHS: [u16; 3] = [4, 4, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PriorityBand {
    #[serde(rename = "CRITICAL_W1")]
    CriticalW1,
    #[serde(rename = "HIGH_W2")]
    HighW2,
    #[serde(rename = "MEDIUM_W3")]
    MediumW3,
    #[serde(rename = "LOW_W4")]
    LowW4,
}

impl PriorityBand {
    pub const ALL: [PriorityBand; 4] = [Self::CriticalW1, Self::HighW2, Self::MediumW3, Self::LowW4];

    /// Half-open bands: [0.8,1.3) [1.3,1.9) [1.9,2.4) [2.4,2.8].
    pub fn for_score(s: Score) -> Result<PriorityBand> {
        match s.tenths() {
            8..=12 => Ok(Self::LowW4),
            13..=18 => Ok(Self::MediumW3),
            19..=23 => Ok(Self::HighW2),
            24..=28 => Ok(Self::CriticalW1),
            _ => Err(Error::Input(format!("priority {s} is outside 0.8-2.8"))),
        }
    }

    pub fn wave(self) -> u8 {
        match self {
            Self::CriticalW1 => 1,
            Self::HighW2 => 2,
            Self::MediumW3 => 3,
            Self::LowW4 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::CriticalW1 => "Critical Priority (Wave 1)",
            Self::HighW2 => "High Priority (Wave 2)",
            Self::MediumW3 => "Medium Priority (Wave 3)",
            Self::LowW4 => "Low Priority (Wave 4)",
        }
    }

    /// Inclusive tenths range covered by the band.
    pub fn range_tenths(self) -> (u16, u16) {
        match self {
            Self::LowW4 => (8, 12),
            Self::MediumW3 => (13, 18),
            Self::HighW2 => (19, 23),
            Self::CriticalW1 => (24, 28),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorityResult {
    pub criticality_score: u8,
    pub time_exposure_score: u8,
    pub evidence_penalty: u8,
    pub priority: Score,
    pub band: PriorityBand,
    pub algorithmic_wave: u8,
}

/// Highest rating across C, I and A: High 3, Med 2, Low 1.
pub fn criticality_score(c: &CiaTriple) -> u8 {
    c.iter()
        .map(|r| match r {
            Rating::High => 3,
            Rating::Med => 2,
            Rating::Low => 1,
        })
        .max()
        .expect("three ratings")
}

pub fn time_exposure_score(e: ExposureStatus) -> u8 {
    match e {
        ExposureStatus::Yes => 3,
        ExposureStatus::Borderline => 2,
        ExposureStatus::No => 1,
    }
}

pub fn evidence_penalty(ev: EvidenceConfidence) -> u8 {
    match ev {
        EvidenceConfidence::High => 0,
        EvidenceConfidence::Med => 1,
        EvidenceConfidence::Low => 2,
    }
}

pub fn priority_score(crit: u8, exp: u8, pen: u8) -> Result<PriorityResult> {
    if !(1..=3).contains(&crit) || !(1..=3).contains(&exp) || pen > 2 {
        return Err(Error::Input(format!(
            "score components out of range: criticality {crit}, exposure {exp}, penalty {pen}"
        )));
    }
    let [wc, we, wp] = WEIGHTS_TENTHS;
    let priority = Score(wc * u16::from(crit) + we * u16::from(exp) + wp * u16::from(pen));
    let band = PriorityBand::for_score(priority)?;
    Ok(PriorityResult {
        criticality_score: crit,
        time_exposure_score: exp,
        evidence_penalty: pen,
        priority,
        band,
        algorithmic_wave: band.wave(),
    })
}
