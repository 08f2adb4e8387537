//! Heuristics for key material embedded in text, and excerpt redaction.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static PEM_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)-----BEGIN ([A-Z0-9 ]+)-----.*?-----END [A-Z0-9 ]+-----").unwrap());
static PEM_HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-----BEGIN ([A-Z0-9 ]+)-----").unwrap());
static BASE64_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9+/=]+").unwrap());
static MASKABLE_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z0-9+/=_\-]{17,}").unwrap());

/// Number of leading characters of a detected key blob an excerpt may keep.
pub const EXCERPT_KEEP_CHARS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SecretConfidence {
    Med,
    High,
}

/// A byte range of `content` believed to hold key material.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretSpan {
    pub start: usize,
    pub end: usize,
    pub confidence: SecretConfidence,
    /// PEM label for armored blocks, e.g. `RSA PRIVATE KEY`.
    pub label: Option<String>,
}

/// Thresholds for the high-entropy blob heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecretHeuristic {
    pub min_length: usize,
    pub min_entropy_bits: f64,
}

impl Default for SecretHeuristic {
    fn default() -> Self {
        SecretHeuristic {
            min_length: 40,
            min_entropy_bits: 4.5,
        }
    }
}

/// Shannon entropy in bits per byte.
pub fn shannon_entropy(s: &str) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let mut freq = [0u32; 256];
    for b in s.bytes() {
        freq[b as usize] += 1;
    }
    let len = s.len() as f64;
    freq.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = f64::from(c) / len;
            -p * p.log2()
        })
        .sum()
}

pub fn detect_embedded_secret(content: &str) -> Vec<SecretSpan> {
    detect_embedded_secret_with(content, &SecretHeuristic::default())
}

/// Finds PEM private-key blocks (HIGH) and high-entropy base64 runs (MED).
///
/// Spans are non-overlapping and sorted by start. Armored blocks that are not
/// private keys (certificates, public keys) are not reported, and their bodies
/// are excluded from the entropy heuristic.
pub fn detect_embedded_secret_with(content: &str, heuristic: &SecretHeuristic) -> Vec<SecretSpan> {
    let mut armored: Vec<(usize, usize, String)> = PEM_BLOCK
        .captures_iter(content)
        .map(|c| {
            let m = c.get(0).unwrap();
            (m.start(), m.end(), c[1].to_owned())
        })
        .collect();
    // Headers without a matching END still mark key material.
    for c in PEM_HEADER.captures_iter(content) {
        let m = c.get(0).unwrap();
        if !armored.iter().any(|(s, e, _)| m.start() >= *s && m.start() < *e) {
            armored.push((m.start(), m.end(), c[1].to_owned()));
        }
    }
    armored.sort();

    let mut spans: Vec<SecretSpan> = armored
        .iter()
        .filter(|(_, _, label)| label.contains("PRIVATE KEY"))
        .map(|(s, e, label)| SecretSpan {
            start: *s,
            end: *e,
            confidence: SecretConfidence::High,
            label: Some(label.clone()),
        })
        .collect();

    for run in BASE64_RUN.find_iter(content) {
        if run.len() < heuristic.min_length {
            continue;
        }
        if armored.iter().any(|(s, e, _)| run.start() < *e && *s < run.end()) {
            continue;
        }
        if shannon_entropy(run.as_str()) >= heuristic.min_entropy_bits {
            spans.push(SecretSpan {
                start: run.start(),
                end: run.end(),
                confidence: SecretConfidence::Med,
                label: None,
            });
        }
    }
    spans.sort_by_key(|s| s.start);
    spans
}

/// Produces a finding excerpt: long key-like tokens are cut to their first
/// [`EXCERPT_KEEP_CHARS`] characters and the result is capped at
/// [`crate::model::MAX_EXCERPT_CHARS`].
pub fn redact_excerpt(line: &str) -> String {
    let line = line.trim();
    let mut out = String::with_capacity(line.len().min(300));
    let mut last = 0;
    for m in MASKABLE_TOKEN.find_iter(line) {
        let tok = m.as_str();
        let has_digit = tok.bytes().any(|b| b.is_ascii_digit());
        let has_alpha = tok.bytes().any(|b| b.is_ascii_alphabetic());
        if (has_digit && has_alpha) || shannon_entropy(tok) >= 4.0 {
            out.push_str(&line[last..m.start()]);
            out.push_str(&tok[..EXCERPT_KEEP_CHARS]);
            out.push_str("…[redacted]");
            last = m.end();
        }
    }
    out.push_str(&line[last..]);
    if out.chars().count() > crate::model::MAX_EXCERPT_CHARS {
        out = out.chars().take(crate::model::MAX_EXCERPT_CHARS - 1).collect();
        out.push('…');
    }
    out
}
