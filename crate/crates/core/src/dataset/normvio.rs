//! Importer for the NormVio Reddit moderation dataset layout.
//!
//! Each row carries a conversation (the last turn is the judged comment), its
//! subreddit, the rule text a moderator cited, and whether it was moderated.
//! Rule sets are reconstructed per subreddit from every cited rule seen.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize;
use crate::types::{ModerationRecord, RuleSet, SAFE_RULE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormVioRow {
    #[serde(default)]
    pub id: Option<String>,
    pub subreddit: String,
    /// Conversation turns, oldest first.
    pub conversation: Vec<String>,
    pub rule: String,
    pub moderated: bool,
}

#[derive(Debug, Clone, Default)]
pub struct NormVioImport {
    pub records: Vec<ModerationRecord>,
    pub rule_sets: BTreeMap<String, RuleSet>,
    pub dropped: usize,
}

/// Builds rule sets by first appearance, then resolves every row's cited
/// rule by exact normalized-string match.
pub fn import_normvio(rows: &[NormVioRow]) -> NormVioImport {
    let mut texts: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for row in rows {
        let cited = row.rule.trim();
        if cited.is_empty() {
            continue;
        }
        let entry = texts.entry(row.subreddit.clone()).or_default();
        let key = normalize(cited);
        if !entry.iter().any(|(k, _)| *k == key) {
            entry.push((key, cited.to_string()));
        }
    }
    let rule_sets: BTreeMap<String, RuleSet> = texts
        .iter()
        .map(|(sub, list)| {
            let rule_texts: Vec<&str> = list.iter().map(|(_, t)| t.as_str()).collect();
            let mut rs = RuleSet::from_texts(sub.clone(), &rule_texts);
            rs.instance = "reddit.com".into();
            (sub.clone(), rs)
        })
        .collect();

    let mut out = NormVioImport { rule_sets, ..Default::default() };
    for (i, row) in rows.iter().enumerate() {
        let Some(comment) = row.conversation.last().map(|c| c.trim()).filter(|c| !c.is_empty()) else {
            out.dropped += 1;
            continue;
        };
        let id = row.id.clone().unwrap_or_else(|| format!("normvio-{i:06}"));
        let gold = if row.moderated {
            let key = normalize(&row.rule);
            let found = texts.get(&row.subreddit).and_then(|list| list.iter().position(|(k, _)| *k == key));
            match found {
                Some(idx) => idx as u32 + 1,
                None => {
                    out.dropped += 1;
                    continue;
                }
            }
        } else {
            SAFE_RULE
        };
        out.records.push(ModerationRecord {
            id,
            community: row.subreddit.clone(),
            instance: "reddit.com".into(),
            comment_text: comment.to_string(),
            removed: row.moderated,
            reason: row.moderated.then(|| row.rule.trim().to_string()),
            gold_rule_number: gold,
            created_at: DateTime::<Utc>::UNIX_EPOCH,
            community_description: None,
            description_stale: false,
        });
    }
    out
}

#[derive(Deserialize)]
struct CsvRow {
    #[serde(default)]
    id: Option<String>,
    subreddit: String,
    conversation: String,
    rule: String,
    moderated: String,
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "moderated" => Ok(true),
        "0" | "false" | "no" | "unmoderated" | "" => Ok(false),
        other => Err(Error::invalid(format!("bad moderated flag `{other}`"))),
    }
}

/// Reads `.jsonl`/`.json` (one object per line) or `.csv`. In CSV the
/// conversation cell is either a JSON array of turns or the bare comment.
pub fn read_normvio(path: &Path) -> Result<Vec<NormVioRow>> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if !is_csv {
        return crate::dataset::io::read_jsonl(path);
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.deserialize::<CsvRow>() {
        let rec = rec?;
        let conversation = if rec.conversation.trim_start().starts_with('[') {
            serde_json::from_str(&rec.conversation)?
        } else {
            vec![rec.conversation]
        };
        rows.push(NormVioRow {
            id: rec.id.filter(|s| !s.is_empty()),
            subreddit: rec.subreddit,
            conversation,
            rule: rec.rule,
            moderated: parse_bool(&rec.moderated)?,
        });
    }
    Ok(rows)
}
