//! Shared domain types: records, rule sets, categories and predictions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule number reserved for the "no rule is violated" class.
pub const SAFE_RULE: u32 = 0;

/// Display text of the safe pseudo-rule.
pub const SAFE_RULE_TEXT: &str = "No rule is violated.";

/// One comment with its community context and moderation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerationRecord {
    pub id: String,
    pub community: String,
    pub instance: String,
    pub comment_text: String,
    pub removed: bool,
    #[serde(default)]
    pub reason: Option<String>,
    /// Gold rule, 0 for safe.
    #[serde(default)]
    pub gold_rule_number: u32,
    pub created_at: DateTime<Utc>,
    /// Community description in effect when the action was taken.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community_description: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub description_stale: bool,
}

impl ModerationRecord {
    /// Checks `removed = false => gold 0 and no reason` and
    /// `removed = true => reason present`.
    pub fn validate(&self) -> Result<()> {
        if self.comment_text.trim().is_empty() {
            return Err(Error::integrity(format!("record {} has empty text", self.id)));
        }
        if !self.removed && (self.gold_rule_number != SAFE_RULE || self.reason.is_some()) {
            return Err(Error::integrity(format!("safe record {} carries a rule or reason", self.id)));
        }
        if self.removed && self.reason.as_deref().is_none_or(|r| r.trim().is_empty()) {
            return Err(Error::integrity(format!("removed record {} has no reason", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    #[serde(rename = "n")]
    pub number: u32,
    pub text: String,
}

impl Rule {
    pub fn new(number: u32, text: impl Into<String>) -> Self {
        Rule { number, text: text.into() }
    }
}

/// A community's numbered rule list at a point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub community: String,
    #[serde(default)]
    pub instance: String,
    pub rules: Vec<Rule>,
    #[serde(default = "epoch")]
    pub snapshot_at: DateTime<Utc>,
}

fn epoch() -> DateTime<Utc> {
    DateTime::<Utc>::UNIX_EPOCH
}

impl RuleSet {
    /// Builds a rule set numbered 1..k in the given order.
    pub fn from_texts<S: AsRef<str>>(community: impl Into<String>, texts: &[S]) -> Self {
        let rules = texts.iter().enumerate().map(|(i, t)| Rule::new(i as u32 + 1, t.as_ref().trim())).collect();
        RuleSet { community: community.into(), instance: String::new(), rules, snapshot_at: epoch() }
    }

    pub fn with_rules(community: impl Into<String>, rules: Vec<Rule>) -> Self {
        RuleSet { community: community.into(), instance: String::new(), rules, snapshot_at: epoch() }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn get(&self, number: u32) -> Option<&Rule> {
        self.rules.iter().find(|r| r.number == number)
    }

    pub fn max_number(&self) -> u32 {
        self.rules.iter().map(|r| r.number).max().unwrap_or(0)
    }

    /// Text of a rule number, with 0 resolving to the safe pseudo-rule.
    pub fn text_of(&self, number: u32) -> Option<&str> {
        if number == SAFE_RULE {
            Some(SAFE_RULE_TEXT)
        } else {
            self.get(number).map(|r| r.text.as_str())
        }
    }

    /// Rule numbers must be unique, positive, and texts non-empty.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for rule in &self.rules {
            if rule.number == SAFE_RULE {
                return Err(Error::invalid("rule number 0 is reserved for safe"));
            }
            if rule.text.trim().is_empty() {
                return Err(Error::invalid(format!("rule {} has empty text", rule.number)));
            }
            if !seen.insert(rule.number) {
                return Err(Error::invalid(format!("duplicate rule number {}", rule.number)));
            }
        }
        Ok(())
    }
}

/// Coarse rule taxonomy used for evaluation grouping, plus `Safe`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Incivility,
    Hate,
    Spam,
    Content,
    Doxxing,
    Format,
    Harassment,
    Meta,
    OffTopic,
    Trolling,
    Other,
    Safe,
}

impl Category {
    /// The 11 categories a rule may carry.
    pub const RULE_VOCABULARY: [Category; 11] = [
        Category::Incivility,
        Category::Hate,
        Category::Spam,
        Category::Content,
        Category::Doxxing,
        Category::Format,
        Category::Harassment,
        Category::Meta,
        Category::OffTopic,
        Category::Trolling,
        Category::Other,
    ];

    /// Rule vocabulary plus `Safe`, in report order.
    pub const ALL: [Category; 12] = [
        Category::Incivility,
        Category::Hate,
        Category::Spam,
        Category::Content,
        Category::Doxxing,
        Category::Format,
        Category::Harassment,
        Category::Meta,
        Category::OffTopic,
        Category::Trolling,
        Category::Other,
        Category::Safe,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Incivility => "incivility",
            Category::Hate => "hate",
            Category::Spam => "spam",
            Category::Content => "content",
            Category::Doxxing => "doxxing",
            Category::Format => "format",
            Category::Harassment => "harassment",
            Category::Meta => "meta",
            Category::OffTopic => "off-topic",
            Category::Trolling => "trolling",
            Category::Other => "other",
            Category::Safe => "safe",
        }
    }

    pub fn index(&self) -> usize {
        Category::ALL.iter().position(|c| c == self).expect("category in ALL")
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Unknown { kind: "category", name: s.to_string() })
    }
}

pub type CategorySet = BTreeSet<Category>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Extract,
    Select,
    Baseline,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Extract => "extract",
            ModelKind::Select => "select",
            ModelKind::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub rule_number: u32,
    pub score: f64,
}

/// Character span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Output of any rule predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub rule_number: u32,
    pub rule_text: String,
    /// Char offsets into `rule_text`, only for extractive models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default)]
    pub scores: Vec<PairScore>,
    pub model_kind: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Dev,
    Test,
    CommunitiesHoldout,
    RulesHoldout,
}

impl SplitName {
    pub const ALL: [SplitName; 5] =
        [SplitName::Train, SplitName::Dev, SplitName::Test, SplitName::CommunitiesHoldout, SplitName::RulesHoldout];

    pub fn as_str(&self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
            SplitName::CommunitiesHoldout => "communities_holdout",
            SplitName::RulesHoldout => "rules_holdout",
        }
    }
}

/// One line of a dataset file: a record together with the rules in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub id: String,
    pub community: String,
    #[serde(default)]
    pub instance: String,
    pub comment_text: String,
    pub removed: bool,
    #[serde(default)]
    pub reason: Option<String>,
    pub gold_rule_number: u32,
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub categories: Vec<Category>,
    #[serde(default)]
    pub split: Option<SplitName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<DateTime<Utc>>,
}

impl DatasetRow {
    pub fn from_record(record: &ModerationRecord, rule_set: &RuleSet) -> Self {
        DatasetRow {
            id: record.id.clone(),
            community: record.community.clone(),
            instance: record.instance.clone(),
            comment_text: record.comment_text.clone(),
            removed: record.removed,
            reason: record.reason.clone(),
            gold_rule_number: record.gold_rule_number,
            rules: rule_set.rules.clone(),
            categories: Vec::new(),
            split: None,
            created_at: Some(record.created_at),
        }
    }

    pub fn rule_set(&self) -> RuleSet {
        RuleSet {
            community: self.community.clone(),
            instance: self.instance.clone(),
            rules: self.rules.clone(),
            snapshot_at: self.created_at.unwrap_or_else(epoch),
        }
    }

    pub fn record(&self) -> ModerationRecord {
        ModerationRecord {
            id: self.id.clone(),
            community: self.community.clone(),
            instance: self.instance.clone(),
            comment_text: self.comment_text.clone(),
            removed: self.removed,
            reason: self.reason.clone(),
            gold_rule_number: self.gold_rule_number,
            created_at: self.created_at.unwrap_or_else(epoch),
            community_description: None,
            description_stale: false,
        }
    }

    pub fn gold_rule_text(&self) -> Option<&str> {
        if self.gold_rule_number == SAFE_RULE {
            Some(SAFE_RULE_TEXT)
        } else {
            self.rules.iter().find(|r| r.number == self.gold_rule_number).map(|r| r.text.as_str())
        }
    }
}
