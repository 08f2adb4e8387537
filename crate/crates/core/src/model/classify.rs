//! Quantum-vulnerability classification of mechanisms.
//!
//! The table is data (`data/classification.csv`) so it can be revised without
//! a code change. Rows are `(pattern, class)`; the first matching row wins.

use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::mechanism::{CryptoMechanism, MechanismFamily};
use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../../data/classification.csv");

static DEFAULT: LazyLock<ClassificationTable> =
    LazyLock::new(|| ClassificationTable::parse(DEFAULT_TABLE).expect("bundled classification table is valid"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VulnerabilityClass {
    QuantumVulnerable,
    QuantumWeakened,
    ConventionalSafe,
    Pqc,
}

impl VulnerabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::QuantumVulnerable => "QUANTUM_VULNERABLE",
            Self::QuantumWeakened => "QUANTUM_WEAKENED",
            Self::ConventionalSafe => "CONVENTIONAL_SAFE",
            Self::Pqc => "PQC",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [
            Self::QuantumVulnerable,
            Self::QuantumWeakened,
            Self::ConventionalSafe,
            Self::Pqc,
        ]
        .into_iter()
        .find(|c| c.as_str() == s.trim())
    }
}

impl fmt::Display for VulnerabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationRow {
    family: MechanismFamily,
    condition: Option<(Cmp, u32)>,
    pub class: VulnerabilityClass,
}

impl ClassificationRow {
    pub fn family(&self) -> MechanismFamily {
        self.family
    }

    pub fn is_catch_all(&self) -> bool {
        self.condition.is_none()
    }

    fn matches(&self, m: &CryptoMechanism) -> bool {
        if self.family != m.family {
            return false;
        }
        match (self.condition, m.numeric_parameter()) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((cmp, bound)), Some(v)) => match cmp {
                Cmp::Lt => v < bound,
                Cmp::Le => v <= bound,
                Cmp::Gt => v > bound,
                Cmp::Ge => v >= bound,
                Cmp::Eq => v == bound,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationTable {
    rows: Vec<ClassificationRow>,
}

impl ClassificationTable {
    /// The table shipped with the crate.
    pub fn bundled() -> &'static ClassificationTable {
        &DEFAULT
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::format("classification table", i + 1, e))?;
            let (pattern, class) = match (rec.get(0), rec.get(1)) {
                (Some(p), Some(c)) => (p, c),
                _ => return Err(Error::format("classification table", i + 1, "expected pattern,class")),
            };
            let class = VulnerabilityClass::from_name(class)
                .ok_or_else(|| Error::format("classification table", i + 1, format!("unknown class {class:?}")))?;
            let (family, condition) = parse_pattern(pattern)
                .ok_or_else(|| Error::format("classification table", i + 1, format!("bad pattern {pattern:?}")))?;
            rows.push(ClassificationRow {
                family,
                condition,
                class,
            });
        }
        for family in MechanismFamily::ALL {
            let catch_all = rows.iter().filter(|r| r.family == family && r.is_catch_all()).count();
            if catch_all != 1 {
                return Err(Error::Config(format!(
                    "classification table needs exactly one catch-all row for {family}, found {catch_all}"
                )));
            }
        }
        Ok(ClassificationTable { rows })
    }

    pub fn rows(&self) -> &[ClassificationRow] {
        &self.rows
    }

    pub fn classify(&self, m: &CryptoMechanism) -> VulnerabilityClass {
        self.rows
            .iter()
            .find(|r| r.matches(m))
            .map(|r| r.class)
            .unwrap_or(VulnerabilityClass::QuantumVulnerable)
    }
}

fn parse_pattern(pattern: &str) -> Option<(MechanismFamily, Option<(Cmp, u32)>)> {
    let pos = pattern.find(['<', '>', '=']);
    let Some(pos) = pos else {
        return MechanismFamily::from_name(pattern).map(|f| (f, None));
    };
    let family = MechanismFamily::from_name(&pattern[..pos])?;
    let rest = &pattern[pos..];
    let (cmp, num) = [
        (">=", Cmp::Ge),
        ("<=", Cmp::Le),
        ("<", Cmp::Lt),
        (">", Cmp::Gt),
        ("=", Cmp::Eq),
    ]
    .into_iter()
    .find_map(|(op, cmp)| rest.strip_prefix(op).map(|n| (cmp, n)))?;
    Some((family, Some((cmp, num.trim().parse().ok()?))))
}

/// Classifies a mechanism with the bundled table.
pub fn classify_mechanism(m: &CryptoMechanism) -> VulnerabilityClass {
    DEFAULT.classify(m)
}
