use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CryptoMechanism, DiscoveryFinding, FindingSource};
use crate::scan::wildcard_match;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SystemContext {
    Application,
    Infrastructure,
    VendorDependency,
}

impl SystemContext {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace([' ', '-'], "_").as_str() {
            "APPLICATION" => Ok(Self::Application),
            "INFRASTRUCTURE" => Ok(Self::Infrastructure),
            "VENDOR_DEPENDENCY" | "VENDOR" => Ok(Self::VendorDependency),
            other => Err(Error::Input(format!("unknown system context {other:?}"))),
        }
    }
}

/// Maps an asset hint to an asset id. Patterns containing `*` or `?` are
/// globs over the whole hint; anything else is a prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRule {
    pub pattern: String,
    pub asset_id: String,
    pub system_context: SystemContext,
    pub third_party: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl AssetRule {
    pub fn matches(&self, hint: &str) -> bool {
        if self.pattern.contains(['*', '?']) {
            wildcard_match(&self.pattern, hint)
        } else {
            hint.starts_with(&self.pattern)
        }
    }
}

/// Ordered asset-key rules; the first match wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssetRules {
    pub rules: Vec<AssetRule>,
}

#[derive(Debug, Deserialize)]
struct AssetRuleRow {
    pattern: String,
    asset_id: String,
    system_context: String,
    third_party: String,
    #[serde(default)]
    display_name: Option<String>,
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "y" | "1" => Ok(true),
        "false" | "no" | "n" | "0" | "" => Ok(false),
        other => Err(Error::Input(format!("not a boolean: {other:?}"))),
    }
}

impl AssetRules {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    /// CSV with header `pattern,asset_id,system_context,third_party[,display_name]`.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rules = Vec::new();
        for (i, row) in rdr.deserialize::<AssetRuleRow>().enumerate() {
            let ctx = "asset rules";
            let row = row.map_err(|e| Error::format(ctx, i + 1, e))?;
            if row.pattern.is_empty() || row.asset_id.is_empty() {
                return Err(Error::format(ctx, i + 1, "pattern and asset_id are required"));
            }
            rules.push(AssetRule {
                pattern: row.pattern,
                asset_id: row.asset_id,
                system_context: SystemContext::parse(&row.system_context).map_err(|e| Error::format(ctx, i + 1, e))?,
                third_party: parse_bool(&row.third_party).map_err(|e| Error::format(ctx, i + 1, e))?,
                display_name: row.display_name.filter(|d| !d.is_empty()),
            });
        }
        Ok(AssetRules { rules })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pattern", "asset_id", "system_context", "third_party", "display_name"])
            .expect("in-memory write");
        for r in &self.rules {
            let ctx = match r.system_context {
                SystemContext::Application => "APPLICATION",
                SystemContext::Infrastructure => "INFRASTRUCTURE",
                SystemContext::VendorDependency => "VENDOR_DEPENDENCY",
            };
            w.write_record([
                r.pattern.as_str(),
                r.asset_id.as_str(),
                ctx,
                if r.third_party { "true" } else { "false" },
                r.display_name.as_deref().unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn resolve(&self, hint: &str) -> Option<&AssetRule> {
        self.rules.iter().find(|r| r.matches(hint))
    }

    /// Indexed lookup with the same first-match semantics as [`Self::resolve`].
    pub fn resolver(&self) -> Resolver<'_> {
        let mut prefixes: HashMap<&str, usize> = HashMap::new();
        let mut globs = Vec::new();
        for (i, r) in self.rules.iter().enumerate() {
            if r.pattern.contains(['*', '?']) {
                globs.push(i);
            } else {
                prefixes.entry(r.pattern.as_str()).or_insert(i);
            }
        }
        Resolver {
            rules: self,
            prefixes,
            globs,
        }
    }
}

pub struct Resolver<'a> {
    rules: &'a AssetRules,
    prefixes: HashMap<&'a str, usize>,
    globs: Vec<usize>,
}

impl<'a> Resolver<'a> {
    pub fn resolve(&self, hint: &str) -> Option<&'a AssetRule> {
        let by_prefix = hint
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(hint.len()))
            .filter_map(|end| self.prefixes.get(&hint[..end]).copied())
            .min();
        let by_glob = self
            .globs
            .iter()
            .copied()
            .take_while(|i| by_prefix.is_none_or(|p| *i < p))
            .find(|i| self.rules.rules[*i].matches(hint));
        by_glob.or(by_prefix).map(|i| &self.rules.rules[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub target: String,
    pub relation: String,
}

/// Findings grouped under one resolved asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAsset {
    pub asset_id: String,
    pub display_name: String,
    pub system_context: SystemContext,
    pub mechanisms: BTreeSet<CryptoMechanism>,
    pub findings: Vec<DiscoveryFinding>,
    #[serde(default)]
    pub dependency_edges: Vec<DependencyEdge>,
    pub third_party: bool,
    /// Synthetic asset created for a hint no rule matched.
    #[serde(default)]
    pub unmapped: bool,
}

impl CandidateAsset {
    pub fn sources(&self) -> BTreeSet<FindingSource> {
        self.findings.iter().map(|f| f.source).collect()
    }
}

/// Result of grouping findings into candidate assets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalized {
    pub assets: Vec<CandidateAsset>,
    /// Each hint that matched no rule, once, sorted.
    pub unmapped_hints: Vec<String>,
    pub duplicates_removed: usize,
}

pub const UNMAPPED_PREFIX: &str = "UNMAPPED:";

/// Groups findings by resolved asset id. Duplicates (same location, origin,
/// and mechanism) keep the earliest observation.
pub fn normalize(findings: &[DiscoveryFinding], rules: &AssetRules) -> Normalized {
    let mut earliest: BTreeMap<(&str, &str, &CryptoMechanism), &DiscoveryFinding> = BTreeMap::new();
    for f in findings {
        let key = (f.location.as_str(), f.origin_id.as_str(), &f.mechanism);
        earliest
            .entry(key)
            .and_modify(|kept| {
                if f.observed_at < kept.observed_at {
                    *kept = f;
                }
            })
            .or_insert(f);
    }
    let duplicates_removed = findings.len() - earliest.len();

    struct Group<'a> {
        rule: Option<&'a AssetRule>,
        hint: String,
        findings: Vec<DiscoveryFinding>,
    }
    let mut groups: BTreeMap<String, Group<'_>> = BTreeMap::new();
    let mut unmapped_hints = BTreeSet::new();
    let resolver = rules.resolver();
    let resolve_id = |hint: &str| match resolver.resolve(hint) {
        Some(r) => (r.asset_id.clone(), Some(r)),
        None => (format!("{UNMAPPED_PREFIX}{hint}"), None),
    };
    for f in earliest.into_values() {
        let (id, rule) = resolve_id(&f.asset_hint);
        if rule.is_none() {
            unmapped_hints.insert(f.asset_hint.clone());
        }
        groups
            .entry(id)
            .or_insert_with(|| Group {
                rule,
                hint: f.asset_hint.clone(),
                findings: Vec::new(),
            })
            .findings
            .push(f.clone());
    }

    let assets = groups
        .into_iter()
        .map(|(asset_id, mut g)| {
            g.findings.sort_by(|a, b| {
                (&a.location, &a.origin_id, &a.mechanism).cmp(&(&b.location, &b.origin_id, &b.mechanism))
            });
            let mechanisms = g.findings.iter().map(|f| f.mechanism.clone()).collect();
            let mut edges: Vec<DependencyEdge> = g
                .findings
                .iter()
                .filter_map(|f| {
                    f.depends_on.as_deref().map(|target| DependencyEdge {
                        target: resolve_id(target).0,
                        relation: f.origin_id.clone(),
                    })
                })
                .collect();
            edges.sort();
            edges.dedup();
            let supplier_flag = g.findings.iter().any(|f| {
                matches!(f.source, FindingSource::Sbom | FindingSource::Dependency)
                    && f.supplier.as_deref().is_some_and(|s| !s.trim().is_empty())
            });
            let (display_name, system_context, rule_third_party) = match g.rule {
                Some(r) => (
                    r.display_name.clone().unwrap_or_else(|| r.asset_id.clone()),
                    r.system_context,
                    r.third_party,
                ),
                None => (g.hint.clone(), context_for(&g.findings), false),
            };
            CandidateAsset {
                third_party: system_context == SystemContext::VendorDependency || rule_third_party || supplier_flag,
                unmapped: g.rule.is_none(),
                asset_id,
                display_name,
                system_context,
                mechanisms,
                findings: g.findings,
                dependency_edges: edges,
            }
        })
        .collect();

    Normalized {
        assets,
        unmapped_hints: unmapped_hints.into_iter().collect(),
        duplicates_removed,
    }
}

fn context_for(findings: &[DiscoveryFinding]) -> SystemContext {
    match findings.first().map(|f| f.source) {
        Some(FindingSource::Dynamic) => SystemContext::Infrastructure,
        Some(FindingSource::Sbom | FindingSource::Dependency) => SystemContext::VendorDependency,
        _ => SystemContext::Application,
    }
}
