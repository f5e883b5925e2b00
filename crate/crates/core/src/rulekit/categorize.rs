//! Rule categorization for report grouping. Categories never feed the models.

use std::sync::Arc;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::types::{Category, CategorySet, Rule};

/// Non-empty set of categories from the 11-category rule vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTag(CategorySet);

impl CategoryTag {
    /// Drops `Safe` and falls back to `{other}` when nothing remains.
    pub fn new(mut set: CategorySet) -> Self {
        set.remove(&Category::Safe);
        if set.is_empty() {
            set.insert(Category::Other);
        }
        CategoryTag(set)
    }

    pub fn categories(&self) -> &CategorySet {
        &self.0
    }

    pub fn into_set(self) -> CategorySet {
        self.0
    }
}

pub trait Categorizer: Send + Sync {
    fn name(&self) -> &str;
    fn categorize(&self, text: &str) -> CategorySet;
}

pub fn categorize_rule(rule: &Rule, categorizer: &dyn Categorizer) -> CategoryTag {
    CategoryTag::new(categorizer.categorize(&rule.text))
}

const BUNDLED_TABLE: &str = include_str!("../../data/categories.v1.tsv");

/// Keyword-pattern table: `category<TAB>regex` lines.
#[derive(Debug, Clone)]
pub struct KeywordCategorizer {
    patterns: Vec<(Category, Regex)>,
}

impl KeywordCategorizer {
    pub fn from_table(table: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for (lineno, line) in table.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (cat, pat) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid(format!("category table line {}: missing tab", lineno + 1)))?;
            let category: Category = cat.parse()?;
            if category == Category::Safe {
                return Err(Error::invalid("`safe` is not a rule category"));
            }
            let re = RegexBuilder::new(pat.trim())
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::invalid(format!("category table line {}: {e}", lineno + 1)))?;
            patterns.push((category, re));
        }
        Ok(KeywordCategorizer { patterns })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_table(&std::fs::read_to_string(path)?)
    }
}

impl Default for KeywordCategorizer {
    fn default() -> Self {
        KeywordCategorizer::from_table(BUNDLED_TABLE).expect("bundled category table parses")
    }
}

impl Categorizer for KeywordCategorizer {
    fn name(&self) -> &str {
        "keyword"
    }

    fn categorize(&self, text: &str) -> CategorySet {
        let mut set: CategorySet = self.patterns.iter().filter(|(_, re)| re.is_match(text)).map(|(c, _)| *c).collect();
        if set.is_empty() {
            set.insert(Category::Other);
        }
        set
    }
}

pub fn categorizer_registry() -> Registry<dyn Categorizer> {
    let mut reg: Registry<dyn Categorizer> = Registry::new("categorizer");
    reg.register("keyword", Arc::new(KeywordCategorizer::default()));
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(text: &str) -> CategorySet {
        categorize_rule(&Rule::new(1, text), &KeywordCategorizer::default()).into_set()
    }

    #[test]
    fn examples_from_moderation_practice() {
        assert_eq!(tag("Mark spoilers"), CategorySet::from([Category::Content]));
        assert_eq!(tag("Tag all posts"), CategorySet::from([Category::Format]));
        let attacks = tag("No personal attacks");
        assert!(!attacks.is_empty());
        assert!(attacks.iter().all(|c| Category::RULE_VOCABULARY.contains(c)));
        assert!(attacks.contains(&Category::Harassment) || attacks.contains(&Category::Incivility));
    }

    #[test]
    fn common_rules() {
        assert!(tag("No spam or self-promotion").contains(&Category::Spam));
        assert!(tag("No racist slurs").contains(&Category::Hate));
        assert!(tag("Do not share personal information").contains(&Category::Doxxing));
        assert!(tag("Stay on topic").contains(&Category::OffTopic));
        assert!(tag("No trolling").contains(&Category::Trolling));
        assert!(tag("Respect the moderators").contains(&Category::Meta));
    }

    #[test]
    fn unmappable_rule_is_other() {
        assert_eq!(tag("Have fun"), CategorySet::from([Category::Other]));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(KeywordCategorizer::from_table("spam no-tab").is_err());
        assert!(KeywordCategorizer::from_table("safe\tfoo").is_err());
        assert!(KeywordCategorizer::from_table("nonsense\tfoo").is_err());
        assert!(KeywordCategorizer::from_table("spam\t(unclosed").is_err());
    }
}
