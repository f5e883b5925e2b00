use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::context::{build_context, ContextEntry, RuleContext, COMMENT_CLOSE, COMMENT_OPEN};
use crate::error::{Error, Result};
use crate::types::{ModerationRecord, RuleSet, Span, SAFE_RULE, SAFE_RULE_TEXT};

/// Native segment separator between content and community.
pub const SEP_MARK: &str = "[SEP]";

/// Extractive QA instance: comment as question, rule list as context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractExample {
    pub id: String,
    pub question: String,
    pub context: RuleContext,
    /// Displayed number of the gold rule (0 = safe).
    pub answer_rule: u32,
    pub answer_span: Span,
    #[serde(default)]
    pub truncated: bool,
}

impl ExtractExample {
    /// Builds an example whose answer is the segment displaying `answer_rule`.
    pub fn new(id: String, question: String, context: RuleContext, answer_rule: u32) -> Result<Self> {
        let seg = context
            .segment(answer_rule)
            .ok_or_else(|| Error::integrity(format!("answer rule {answer_rule} not in context")))?;
        let answer_span = seg.span();
        Ok(ExtractExample { id, question, context, answer_rule, answer_span, truncated: false })
    }

    pub fn answer_text(&self) -> &str {
        self.context.slice(self.answer_span)
    }

    /// Original rule number of the answer.
    pub fn answer_source(&self) -> u32 {
        self.context.segment(self.answer_rule).map_or(SAFE_RULE, |s| s.source_rule)
    }

    pub fn check_invariants(&self) -> bool {
        self.context.check_invariants()
            && self.context.segment(self.answer_rule).is_some_and(|s| s.span() == self.answer_span)
    }

    /// Rebuilds the example from a new entry list, tracking the answer by
    /// its source rule. A vanished answer becomes the safe pseudo-rule.
    pub(crate) fn rebuild(&self, entries: &[ContextEntry]) -> Result<Self> {
        let source = self.answer_source();
        let context = RuleContext::from_entries(entries, self.context.includes_safe_option);
        let answer_rule = context.segment_for_source(source).map_or(SAFE_RULE, |s| s.rule_number);
        let mut out = ExtractExample::new(self.id.clone(), self.question.clone(), context, answer_rule)?;
        out.truncated = self.truncated;
        Ok(out)
    }

    /// Removes the last real rule that is not the answer, flagging the
    /// example as truncated. `None` when no such rule exists.
    pub fn drop_trailing_non_gold(&self) -> Option<Self> {
        let mut entries = self.context.entries();
        let source = self.answer_source();
        let idx = entries.iter().rposition(|e| e.source != SAFE_RULE && e.source != source)?;
        entries.remove(idx);
        let mut out = self.rebuild(&entries).ok()?;
        out.truncated = true;
        Some(out)
    }
}

pub fn format_question(comment: &str) -> String {
    format!("{COMMENT_OPEN} {comment} {COMMENT_CLOSE}")
}

fn check_gold(record: &ModerationRecord, rule_set: &RuleSet) -> Result<()> {
    if record.gold_rule_number != SAFE_RULE && rule_set.get(record.gold_rule_number).is_none() {
        return Err(Error::integrity(format!(
            "record {}: gold rule {} not in rule set of {} ({} rules)",
            record.id,
            record.gold_rule_number,
            rule_set.community,
            rule_set.len()
        )));
    }
    Ok(())
}

pub fn make_extract_example(record: &ModerationRecord, rule_set: &RuleSet) -> Result<ExtractExample> {
    check_gold(record, rule_set)?;
    let context = build_context(rule_set, true);
    ExtractExample::new(record.id.clone(), format_question(&record.comment_text), context, record.gold_rule_number)
}

/// One comment–rule candidate with a binary applicability label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoicePair {
    /// Shared by all candidates of one comment.
    pub group_id: String,
    pub content_sequence: String,
    pub rule_number: u32,
    pub rule_text: String,
    pub label: u8,
}

pub fn content_sequence(comment: &str, community: &str) -> String {
    format!("{comment} {SEP_MARK} {community}")
}

/// Safe pseudo-rule followed by every rule, label 1 only on the gold rule.
pub fn make_choice_pairs(record: &ModerationRecord, rule_set: &RuleSet) -> Result<Vec<ChoicePair>> {
    check_gold(record, rule_set)?;
    let seq = content_sequence(&record.comment_text, &record.community);
    let candidates =
        std::iter::once((SAFE_RULE, SAFE_RULE_TEXT)).chain(rule_set.rules.iter().map(|r| (r.number, r.text.as_str())));
    Ok(candidates
        .map(|(n, text)| ChoicePair {
            group_id: record.id.clone(),
            content_sequence: seq.clone(),
            rule_number: n,
            rule_text: text.to_string(),
            label: u8::from(n == record.gold_rule_number),
        })
        .collect())
}

/// Groups pairs by `group_id`, preserving first-seen order, and checks that
/// every group has exactly one positive.
pub fn group_pairs(pairs: Vec<ChoicePair>) -> Result<Vec<Vec<ChoicePair>>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<ChoicePair>> = BTreeMap::new();
    for p in pairs {
        if !groups.contains_key(&p.group_id) {
            order.push(p.group_id.clone());
        }
        groups.entry(p.group_id.clone()).or_default().push(p);
    }
    let out: Vec<Vec<ChoicePair>> = order.into_iter().map(|id| groups.remove(&id).unwrap_or_default()).collect();
    for g in &out {
        check_group(g)?;
    }
    Ok(out)
}

pub fn check_group(group: &[ChoicePair]) -> Result<()> {
    let positives = group.iter().filter(|p| p.label == 1).count();
    if positives != 1 {
        let id = group.first().map_or("<empty>", |p| p.group_id.as_str());
        return Err(Error::integrity(format!("group {id} has {positives} positive pairs")));
    }
    Ok(())
}
