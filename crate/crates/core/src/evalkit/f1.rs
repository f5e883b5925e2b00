use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::labels::LabeledPrediction;
use crate::types::{Category, SAFE_RULE};

/// 2×2 confusion counts for one binary task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Binary {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Binary {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut b = Binary::default();
        for (gold, pred) in pairs {
            match (gold, pred) {
                (true, true) => b.tp += 1,
                (false, true) => b.fp += 1,
                (true, false) => b.fn_ += 1,
                (false, false) => b.tn += 1,
            }
        }
        b
    }

    pub fn positive_f1(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }

    pub fn negative_f1(&self) -> f64 {
        f1(self.tn, self.fn_, self.fp)
    }

    pub fn macro_f1(&self) -> f64 {
        (self.positive_f1() + self.negative_f1()) / 2.0
    }
}

/// `2tp / (2tp + fp + fn)`, defined as 0 when the denominator is 0.
pub fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Macro F1 (mean of positive- and negative-class F1) for every category of
/// the 12-value vocabulary.
pub fn category_macro_f1(labeled: &[LabeledPrediction]) -> BTreeMap<Category, f64> {
    Category::ALL
        .iter()
        .map(|&c| {
            let b = Binary::from_pairs(
                labeled.iter().map(|l| (l.gold_categories.contains(&c), l.predicted_categories.contains(&c))),
            );
            (c, b.macro_f1())
        })
        .collect()
}

/// Categories present in at least one gold set.
pub fn supported_categories(labeled: &[LabeledPrediction]) -> Vec<Category> {
    Category::ALL.iter().copied().filter(|c| labeled.iter().any(|l| l.gold_categories.contains(c))).collect()
}

/// Mean per-category macro F1 over gold-supported categories; the single
/// number used for checkpoint selection.
pub fn mean_macro_f1(labeled: &[LabeledPrediction]) -> f64 {
    let per = category_macro_f1(labeled);
    let supported = supported_categories(labeled);
    if supported.is_empty() {
        return 0.0;
    }
    supported.iter().map(|c| per[c]).sum::<f64>() / supported.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySafe {
    pub safe_f1: f64,
    pub not_safe_f1: f64,
}

impl BinarySafe {
    pub fn macro_f1(&self) -> f64 {
        (self.safe_f1 + self.not_safe_f1) / 2.0
    }
}

pub fn binary_safe_f1(labeled: &[LabeledPrediction]) -> BinarySafe {
    let b = Binary::from_pairs(
        labeled.iter().map(|l| (l.gold_rule_number == SAFE_RULE, l.predicted_rule_number == SAFE_RULE)),
    );
    BinarySafe { safe_f1: b.positive_f1(), not_safe_f1: b.negative_f1() }
}

pub fn exact_rule_accuracy(labeled: &[LabeledPrediction]) -> f64 {
    if labeled.is_empty() {
        return 0.0;
    }
    let hits = labeled.iter().filter(|l| l.gold_rule_number == l.predicted_rule_number).count();
    hits as f64 / labeled.len() as f64
}
