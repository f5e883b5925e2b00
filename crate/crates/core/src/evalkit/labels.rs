use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rulekit::{categorize_rule, Categorizer};
use crate::types::{Category, CategorySet, DatasetRow, SAFE_RULE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPrediction {
    pub record_id: String,
    pub gold_rule_number: u32,
    pub predicted_rule_number: u32,
    pub gold_categories: CategorySet,
    pub predicted_categories: CategorySet,
}

fn safe_set() -> CategorySet {
    CategorySet::from([Category::Safe])
}

fn rule_categories(row: &DatasetRow, rule: u32, categorizer: &dyn Categorizer) -> CategorySet {
    if rule == SAFE_RULE {
        return safe_set();
    }
    match row.rules.iter().find(|r| r.number == rule) {
        Some(r) => categorize_rule(r, categorizer).into_set(),
        // A number outside the rule set cannot be tied to a rule.
        None => CategorySet::from([Category::Other]),
    }
}

/// Stored row categories win over re-categorizing the gold rule.
fn gold_categories(row: &DatasetRow, categorizer: &dyn Categorizer) -> CategorySet {
    if row.gold_rule_number == SAFE_RULE {
        return safe_set();
    }
    let stored: CategorySet = row.categories.iter().copied().filter(|c| *c != Category::Safe).collect();
    if stored.is_empty() {
        rule_categories(row, row.gold_rule_number, categorizer)
    } else {
        stored
    }
}

/// Joins `(record_id, predicted_rule)` pairs to gold rows and maps both sides
/// to category sets. Output follows the order of `preds`.
pub fn label_predictions(
    preds: &[(String, u32)],
    gold: &[DatasetRow],
    categorizer: &dyn Categorizer,
) -> Result<Vec<LabeledPrediction>> {
    let index: HashMap<&str, &DatasetRow> = gold.iter().map(|r| (r.id.as_str(), r)).collect();
    preds
        .iter()
        .map(|(id, predicted)| {
            let row = index.get(id.as_str()).ok_or_else(|| Error::UnmatchedRecord(id.clone()))?;
            Ok(LabeledPrediction {
                record_id: id.clone(),
                gold_rule_number: row.gold_rule_number,
                predicted_rule_number: *predicted,
                gold_categories: gold_categories(row, categorizer),
                predicted_categories: rule_categories(row, *predicted, categorizer),
            })
        })
        .collect()
}

/// One line of an external prediction file. Exactly one of the two
/// prediction fields must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalPrediction {
    pub record_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_rule_number: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_categories: Option<Vec<Category>>,
}

pub fn read_external_predictions(path: &Path) -> Result<Vec<ExternalPrediction>> {
    crate::dataset::read_jsonl(path)
}

/// Labels predictions produced outside this crate. Rule-number lines are
/// mapped through the categorizer; category lines are taken as given
/// (an empty list means safe).
pub fn label_external(
    preds: &[ExternalPrediction],
    gold: &[DatasetRow],
    categorizer: &dyn Categorizer,
) -> Result<Vec<LabeledPrediction>> {
    let index: HashMap<&str, &DatasetRow> = gold.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        if !seen.insert(p.record_id.as_str()) {
            return Err(Error::invalid(format!("duplicate prediction for record `{}`", p.record_id)));
        }
        let row = index.get(p.record_id.as_str()).ok_or_else(|| Error::UnmatchedRecord(p.record_id.clone()))?;
        let (predicted_rule_number, predicted_categories) = match (&p.predicted_rule_number, &p.predicted_categories) {
            (Some(n), None) => (*n, rule_categories(row, *n, categorizer)),
            (None, Some(cats)) => {
                let set: CategorySet = cats.iter().copied().collect();
                let only_safe = set.iter().all(|c| *c == Category::Safe);
                if only_safe {
                    (SAFE_RULE, safe_set())
                } else {
                    // Category-only predictions carry no rule number; any
                    // non-zero value marks "not safe" for the binary task.
                    (u32::MAX, set.into_iter().filter(|c| *c != Category::Safe).collect())
                }
            }
            _ => {
                return Err(Error::invalid(format!(
                    "record `{}`: give exactly one of predicted_rule_number, predicted_categories",
                    p.record_id
                )))
            }
        };
        out.push(LabeledPrediction {
            record_id: p.record_id.clone(),
            gold_rule_number: row.gold_rule_number,
            predicted_rule_number,
            gold_categories: gold_categories(row, categorizer),
            predicted_categories,
        });
    }
    Ok(out)
}
