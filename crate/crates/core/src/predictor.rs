//! The common interface every rule predictor implements, and the
//! name-keyed registry used to load them at runtime.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::types::{DatasetRow, ModelKind, PairScore, Prediction, RuleSet, SAFE_RULE};

/// Given a comment and the full rule set of its community, name the rule
/// that applies (0 = safe).
pub trait RulePredictor: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn predict(&self, comment: &str, community: &str, rules: &RuleSet) -> Result<Prediction>;

    /// `(record_id, predicted_rule)` for every row.
    fn predict_rows(&self, rows: &[DatasetRow]) -> Result<Vec<(String, u32)>> {
        rows.iter()
            .map(|row| {
                let p = self.predict(&row.comment_text, &row.community, &row.rule_set())?;
                Ok((row.id.clone(), p.rule_number))
            })
            .collect()
    }
}

/// Loads a predictor of one kind from a path (checkpoint directory or bank file).
pub trait PredictorLoader: Send + Sync {
    fn load(&self, path: &Path) -> Result<Arc<dyn RulePredictor>>;
}

pub type LoaderRegistry = Registry<dyn PredictorLoader>;

/// Highest score wins; exact ties go to the lowest rule number.
pub fn argmax_rule(scores: &[PairScore]) -> Option<u32> {
    scores
        .iter()
        .fold(None::<PairScore>, |best, s| match best {
            Some(b) if b.score > s.score || (b.score == s.score && b.rule_number < s.rule_number) => Some(b),
            _ => Some(*s),
        })
        .map(|s| s.rule_number)
}

/// Prediction from a full score list over `{0} ∪ rules`.
pub fn prediction_from_scores(scores: Vec<PairScore>, rules: &RuleSet, model_kind: ModelKind) -> Result<Prediction> {
    let rule_number = argmax_rule(&scores).ok_or_else(|| Error::invalid("no candidate rules to score"))?;
    let rule_text = rules
        .text_of(rule_number)
        .ok_or_else(|| Error::integrity(format!("predicted rule {rule_number} not in rule set")))?
        .to_string();
    Ok(Prediction { rule_number, rule_text, span: None, scores, model_kind })
}

/// Candidate numbers of a rule set, safe first.
pub fn candidates(rules: &RuleSet) -> Vec<u32> {
    std::iter::once(SAFE_RULE).chain(rules.rules.iter().map(|r| r.number)).collect()
}
