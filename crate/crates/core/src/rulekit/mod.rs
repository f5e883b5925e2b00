//! Rule tooling: extraction from community descriptions, reason matching,
//! and categorization.

pub mod categorize;
pub mod encoder;
pub mod extract;
pub mod matching;

pub use categorize::{categorize_rule, categorizer_registry, Categorizer, CategoryTag, KeywordCategorizer};
pub use encoder::{cosine, encoder_registry, HashingEncoder, LexiconEncoder, SentenceEncoder};
pub use extract::{extract_rules, ListRuleExtractor, RemoteRuleExtractor, RuleExtractor};
pub use matching::{match_reason, MatchMethod, MatchResult, DEFAULT_MATCH_THRESHOLD};
