use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{parse_mechanism_label, CryptoMechanism, FindingKind};

const DEFAULT_RULES: &str = include_str!("../../data/rules.toml");

static DEFAULT_RULESET: LazyLock<RuleSet> =
    LazyLock::new(|| RuleSet::parse(DEFAULT_RULES).expect("bundled ruleset is valid"));

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RulesFile {
    version: u32,
    #[serde(default, rename = "rule")]
    rules: Vec<RuleRecord>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    id: String,
    pattern: String,
    mechanism: String,
    kind: FindingKind,
    glob: Option<String>,
}

/// One compiled lexical rule.
#[derive(Debug, Clone)]
pub struct ScanRule {
    pub id: String,
    pub pattern: Regex,
    pub mechanism_hint: CryptoMechanism,
    pub kind: FindingKind,
    pub file_glob: Option<String>,
    hint_label: String,
}

impl ScanRule {
    pub fn new(id: &str, pattern: &str, mechanism: &str, kind: FindingKind, file_glob: Option<&str>) -> Result<Self> {
        if id.trim().is_empty() {
            return Err(Error::Config("rule id must not be empty".into()));
        }
        let allowed = [
            FindingKind::ApiCall,
            FindingKind::ConfigReference,
            FindingKind::EmbeddedKey,
            FindingKind::DeprecatedAlgorithm,
        ];
        if !allowed.contains(&kind) {
            return Err(Error::Config(format!(
                "rule {id}: kind {kind:?} is not a static finding kind"
            )));
        }
        let regex =
            Regex::new(pattern).map_err(|e| Error::Config(format!("rule {id}: pattern does not compile: {e}")))?;
        let mechanism_hint = parse_mechanism_label(mechanism)?;
        Ok(ScanRule {
            id: id.to_owned(),
            pattern: regex,
            mechanism_hint,
            kind,
            file_glob: file_glob.map(str::to_owned),
            hint_label: mechanism.to_owned(),
        })
    }

    /// True when the rule applies to a file with this relative path.
    pub fn applies_to(&self, rel_path: &str) -> bool {
        let Some(globs) = &self.file_glob else {
            return true;
        };
        let name = rel_path.rsplit('/').next().unwrap_or(rel_path);
        globs.split(',').map(str::trim).filter(|g| !g.is_empty()).any(|g| {
            if g.contains('/') {
                wildcard_match(g, rel_path)
            } else {
                wildcard_match(g, name)
            }
        })
    }

    /// Mechanism for a concrete match; a `param` capture refines the hint.
    pub(crate) fn mechanism_for(&self, caps: &regex::Captures<'_>) -> CryptoMechanism {
        match caps.name("param") {
            Some(p) => parse_mechanism_label(&format!("{} {}", self.hint_label, p.as_str()))
                .unwrap_or_else(|_| self.mechanism_hint.clone()),
            None => self.mechanism_hint.clone(),
        }
    }
}

/// A versioned, validated collection of rules.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: u32,
    pub rules: Vec<ScanRule>,
}

impl RuleSet {
    /// The ruleset shipped with the crate.
    pub fn bundled() -> &'static RuleSet {
        &DEFAULT_RULESET
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: RulesFile = toml::from_str(text).map_err(|e| Error::Config(format!("rules file: {e}")))?;
        let mut seen = HashSet::new();
        let mut rules = Vec::with_capacity(file.rules.len());
        for r in file.rules {
            if !seen.insert(r.id.clone()) {
                return Err(Error::Config(format!("duplicate rule id {}", r.id)));
            }
            rules.push(ScanRule::new(
                &r.id,
                &r.pattern,
                &r.mechanism,
                r.kind,
                r.glob.as_deref(),
            )?);
        }
        Self::from_rules(file.version, rules)
    }

    pub fn from_rules(version: u32, rules: Vec<ScanRule>) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::Config("ruleset is empty".into()));
        }
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Config(format!("duplicate rule id {}", r.id)));
            }
        }
        Ok(RuleSet { version, rules })
    }
}

/// Glob match supporting `*` and `?`.
pub(crate) fn wildcard_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}
