//! Turning harvested records into dataset rows: rule extraction from the
//! description in force, reason-to-rule matching, and category tagging.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rulekit::{
    categorize_rule, extract_rules, match_reason, Categorizer, MatchMethod, RuleExtractor, SentenceEncoder,
};
use crate::types::{Category, DatasetRow, ModerationRecord, RuleSet, SAFE_RULE};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub input: usize,
    pub emitted: usize,
    pub no_description: usize,
    pub no_rules: usize,
    pub extraction_errors: usize,
    pub unmatched: usize,
    pub matched_by_number: usize,
    pub matched_by_similarity: usize,
}

/// Gold categories of a row: the gold rule's tags, or `{safe}`.
pub fn gold_categories(row: &DatasetRow, categorizer: &dyn Categorizer) -> Vec<Category> {
    match (row.gold_rule_number, row.gold_rule_text()) {
        (SAFE_RULE, _) | (_, None) => vec![Category::Safe],
        (n, Some(text)) => {
            categorize_rule(&crate::types::Rule::new(n, text), categorizer).into_set().into_iter().collect()
        }
    }
}

pub fn attach_categories(rows: &mut [DatasetRow], categorizer: &dyn Categorizer) {
    for row in rows {
        row.categories = gold_categories(row, categorizer);
    }
}

pub struct RowBuilder<'a> {
    pub extractor: &'a dyn RuleExtractor,
    pub encoder: &'a dyn SentenceEncoder,
    pub categorizer: &'a dyn Categorizer,
    pub threshold: f64,
}

impl RowBuilder<'_> {
    pub fn build(&self, records: &[ModerationRecord]) -> Result<(Vec<DatasetRow>, BuildStats)> {
        let mut stats = BuildStats { input: records.len(), ..Default::default() };
        let mut cache: HashMap<(String, String), Option<RuleSet>> = HashMap::new();
        // latest description per community, for safe comments without their own
        let mut latest: HashMap<&str, (&ModerationRecord, &str)> = HashMap::new();
        for r in records {
            if let Some(desc) = r.community_description.as_deref() {
                let e = latest.entry(r.community.as_str()).or_insert((r, desc));
                if r.created_at > e.0.created_at {
                    *e = (r, desc);
                }
            }
        }

        let mut rows = Vec::new();
        for record in records {
            let desc = record
                .community_description
                .as_deref()
                .or_else(|| latest.get(record.community.as_str()).map(|(_, d)| *d));
            let Some(desc) = desc.filter(|d| !d.trim().is_empty()) else {
                stats.no_description += 1;
                continue;
            };
            let key = (record.community.clone(), desc.to_string());
            let rule_set = match cache.get(&key) {
                Some(rs) => rs.clone(),
                None => {
                    let rs = match extract_rules(desc, &record.community, self.extractor) {
                        Ok(mut rs) => {
                            rs.instance = record.instance.clone();
                            rs.snapshot_at = record.created_at;
                            Some(rs)
                        }
                        Err(e) => {
                            log::warn!("rule extraction failed for {}: {e}", record.community);
                            stats.extraction_errors += 1;
                            None
                        }
                    };
                    cache.insert(key, rs.clone());
                    rs
                }
            };
            let Some(rule_set) = rule_set.filter(|rs| !rs.is_empty()) else {
                stats.no_rules += 1;
                continue;
            };
            let mut record = record.clone();
            if record.removed {
                let reason = record.reason.clone().unwrap_or_default();
                let m = match_reason(&reason, &rule_set, self.encoder, self.threshold)?;
                match (m.rule_number, m.method) {
                    (Some(n), MatchMethod::NumberReference) => {
                        stats.matched_by_number += 1;
                        record.gold_rule_number = n;
                    }
                    (Some(n), _) => {
                        stats.matched_by_similarity += 1;
                        record.gold_rule_number = n;
                    }
                    (None, _) => {
                        stats.unmatched += 1;
                        continue;
                    }
                }
            } else {
                record.gold_rule_number = SAFE_RULE;
            }
            let mut row = DatasetRow::from_record(&record, &rule_set);
            row.categories = gold_categories(&row, self.categorizer);
            rows.push(row);
        }
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        stats.emitted = rows.len();
        Ok((rows, stats))
    }
}
