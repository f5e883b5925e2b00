//! Multi-label confusion matrix.
//!
//! Allocation per record:
//! - a gold category also predicted adds 1 on the diagonal;
//! - every other gold category spreads one unit uniformly over the predicted
//!   categories that were not gold (or over the whole predicted set when
//!   all predicted categories were matched);
//! - predicted categories with no gold counterpart receive mass only through
//!   the previous rule, so each gold occurrence contributes exactly one unit.
//!
//! Fractions are accumulated exactly and each row is rounded with the
//! largest-remainder method, ties going to the lower column.

use serde::{Deserialize, Serialize};

use super::labels::LabeledPrediction;
use crate::types::Category;

const N: usize = Category::ALL.len();
/// Least common multiple of 1..=12: every uniform share is an integer
/// number of these units.
const UNITS: u64 = 27_720;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<Category>,
    /// Rows indexed by gold category, columns by predicted, both in
    /// `Category::ALL` order.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: Category, predicted: Category) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Exact fractional allocation, in units of `1 / UNITS`.
pub fn fractional_allocation(labeled: &[LabeledPrediction]) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; N]; N];
    for l in labeled {
        let unmatched_pred: Vec<Category> = l.predicted_categories.difference(&l.gold_categories).copied().collect();
        let targets: Vec<Category> =
            if unmatched_pred.is_empty() { l.predicted_categories.iter().copied().collect() } else { unmatched_pred };
        for g in &l.gold_categories {
            if l.predicted_categories.contains(g) {
                m[g.index()][g.index()] += UNITS;
            } else if !targets.is_empty() {
                let share = UNITS / targets.len() as u64;
                for p in &targets {
                    m[g.index()][p.index()] += share;
                }
            }
        }
    }
    m
}

fn round_row(row: &[u64]) -> Vec<u64> {
    let total: u64 = row.iter().sum();
    let target = (total + UNITS / 2) / UNITS;
    let mut out: Vec<u64> = row.iter().map(|v| v / UNITS).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| (row[b] % UNITS).cmp(&(row[a] % UNITS)).then(a.cmp(&b)));
    for &i in order.iter().take(target.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

pub fn multilabel_confusion(labeled: &[LabeledPrediction]) -> ConfusionMatrix {
    let frac = fractional_allocation(labeled);
    ConfusionMatrix { labels: Category::ALL.to_vec(), counts: frac.iter().map(|r| round_row(r)).collect() }
}
