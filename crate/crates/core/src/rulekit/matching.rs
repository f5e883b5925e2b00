//! Matching moderator removal reasons to specific rules.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::encoder::{cosine, SentenceEncoder};
use crate::error::{Error, Result};
use crate::types::RuleSet;

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMethod {
    NumberReference,
    EmbeddingSimilarity,
    Unmatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub rule_number: Option<u32>,
    pub method: MatchMethod,
    pub similarity: Option<f64>,
}

impl MatchResult {
    fn unmatched(best: Option<f64>) -> Self {
        MatchResult { rule_number: None, method: MatchMethod::Unmatched, similarity: best }
    }
}

// "rule 6", "Rule #6", "rule6"
static RULE_CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\brule\s*#?\s*(\d+)").unwrap());
// bare "#2", but not "r/2" or "abc#2"
static HASH_CITATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|[^\w/#])#(\d+)\b").unwrap());

/// Rule numbers cited in `reason`, in order of appearance. Bare `#N` is only
/// reported when `N <= max_rule`.
pub fn cited_numbers(reason: &str, max_rule: u32) -> Vec<u32> {
    let mut found: Vec<(usize, u32)> = RULE_CITATION
        .captures_iter(reason)
        .filter_map(|c| {
            let m = c.get(1)?;
            Some((m.start(), m.as_str().parse().ok()?))
        })
        .collect();
    found.extend(HASH_CITATION.captures_iter(reason).filter_map(|c| {
        let m = c.get(1)?;
        let n: u32 = m.as_str().parse().ok()?;
        (n >= 1 && n <= max_rule).then_some((m.start(), n))
    }));
    found.sort_by_key(|(pos, _)| *pos);
    found.dedup_by_key(|(pos, _)| *pos);
    found.into_iter().map(|(_, n)| n).collect()
}

/// Similarity of `reason` to each rule, in rule-set order.
pub fn similarities(reason: &str, rule_set: &RuleSet, encoder: &dyn SentenceEncoder) -> Result<Vec<(u32, f64)>> {
    let mut inputs: Vec<&str> = Vec::with_capacity(rule_set.len() + 1);
    inputs.push(reason);
    inputs.extend(rule_set.rules.iter().map(|r| r.text.as_str()));
    let vecs = encoder.encode(&inputs).map_err(|e| Error::Encoder(e.to_string()))?;
    if vecs.len() != inputs.len() {
        return Err(Error::Encoder(format!("encoder returned {} vectors for {} inputs", vecs.len(), inputs.len())));
    }
    Ok(rule_set.rules.iter().zip(&vecs[1..]).map(|(rule, v)| (rule.number, cosine(&vecs[0], v))).collect())
}

/// Explicit in-range citation first; otherwise the most similar rule if it
/// clears `threshold` (ties go to the lowest rule number).
pub fn match_reason(
    reason: &str,
    rule_set: &RuleSet,
    encoder: &dyn SentenceEncoder,
    threshold: f64,
) -> Result<MatchResult> {
    if rule_set.is_empty() {
        return Err(Error::invalid("cannot match a reason against an empty rule set"));
    }
    if let Some(n) = cited_numbers(reason, rule_set.max_number()).into_iter().find(|n| rule_set.get(*n).is_some()) {
        return Ok(MatchResult { rule_number: Some(n), method: MatchMethod::NumberReference, similarity: None });
    }
    let sims = similarities(reason, rule_set, encoder)?;
    let best = sims.iter().copied().fold(None::<(u32, f64)>, |acc, (n, s)| match acc {
        Some((bn, bs)) if bs > s || (bs == s && bn < n) => Some((bn, bs)),
        _ => Some((n, s)),
    });
    match best {
        Some((n, s)) if s >= threshold => {
            Ok(MatchResult { rule_number: Some(n), method: MatchMethod::EmbeddingSimilarity, similarity: Some(s) })
        }
        other => Ok(MatchResult::unmatched(other.map(|(_, s)| s))),
    }
}
