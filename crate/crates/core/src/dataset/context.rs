use serde::{Deserialize, Serialize};

use crate::text::{char_len, char_slice};
use crate::types::{RuleSet, Span, SAFE_RULE, SAFE_RULE_TEXT};

pub const RULES_OPEN: &str = "<rules>";
pub const RULES_CLOSE: &str = "</rules>";
pub const COMMENT_OPEN: &str = "<comment>";
pub const COMMENT_CLOSE: &str = "</comment>";
/// Marker strings that tokenizers must treat as atomic vocabulary items.
pub const MARKER_TOKENS: [&str; 4] = [RULES_OPEN, RULES_CLOSE, COMMENT_OPEN, COMMENT_CLOSE];

/// Where one rule's text sits inside [`RuleContext::text`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Number displayed in front of the rule text.
    pub rule_number: u32,
    /// Number of the rule in the community's original rule set.
    pub source_rule: u32,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// One displayed rule used to (re)build a context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextEntry {
    pub display: u32,
    pub source: u32,
    pub text: String,
}

/// Formatted rule list: `<rules> 0. No rule is violated.\n1. ... </rules>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleContext {
    pub text: String,
    pub segments: Vec<Segment>,
    pub includes_safe_option: bool,
}

impl RuleContext {
    /// Lays out `entries` in order. Segment offsets cover only the rule
    /// text, never the numeric prefix.
    pub fn from_entries(entries: &[ContextEntry], includes_safe_option: bool) -> Self {
        let mut text = String::new();
        let mut segments = Vec::with_capacity(entries.len());
        let mut pos = 0usize;
        let push = |s: &str, text: &mut String, pos: &mut usize| {
            text.push_str(s);
            *pos += char_len(s);
        };
        push(RULES_OPEN, &mut text, &mut pos);
        push(" ", &mut text, &mut pos);
        for (i, entry) in entries.iter().enumerate() {
            if i > 0 {
                push("\n", &mut text, &mut pos);
            }
            push(&format!("{}. ", entry.display), &mut text, &mut pos);
            let start = pos;
            push(&entry.text, &mut text, &mut pos);
            segments.push(Segment { rule_number: entry.display, source_rule: entry.source, start, end: pos });
        }
        push(" ", &mut text, &mut pos);
        push(RULES_CLOSE, &mut text, &mut pos);
        RuleContext { text, segments, includes_safe_option }
    }

    pub fn entries(&self) -> Vec<ContextEntry> {
        self.segments
            .iter()
            .map(|s| ContextEntry {
                display: s.rule_number,
                source: s.source_rule,
                text: self.slice(s.span()).to_string(),
            })
            .collect()
    }

    pub fn slice(&self, span: Span) -> &str {
        char_slice(&self.text, span.start, span.end)
    }

    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    pub fn segment(&self, display_number: u32) -> Option<&Segment> {
        self.segments.iter().find(|s| s.rule_number == display_number)
    }

    pub fn segment_for_source(&self, source_rule: u32) -> Option<&Segment> {
        self.segments.iter().find(|s| s.source_rule == source_rule)
    }

    /// Text of the rule displayed as `display_number`.
    pub fn rule_text(&self, display_number: u32) -> Option<&str> {
        self.segment(display_number).map(|s| self.slice(s.span()))
    }

    /// Character range strictly between the markers, i.e. the answerable region.
    pub fn inner_region(&self) -> Span {
        let start = char_len(RULES_OPEN) + 1;
        let end = self.char_len() - char_len(RULES_CLOSE) - 1;
        Span::new(start, end.max(start))
    }

    /// Segments ascending, non-overlapping, and slicing to their entry text.
    pub fn check_invariants(&self) -> bool {
        let ordered = self.segments.windows(2).all(|w| w[0].end <= w[1].start);
        let bounded = self.segments.iter().all(|s| s.start <= s.end && s.end <= self.char_len());
        let safe_first =
            !self.includes_safe_option || self.segments.first().is_some_and(|s| s.rule_number == SAFE_RULE);
        ordered && bounded && safe_first
    }
}

/// Formats a rule set as extraction context, optionally led by the safe
/// pseudo-rule `0. No rule is violated.`.
pub fn build_context(rule_set: &RuleSet, include_safe_option: bool) -> RuleContext {
    let mut entries = Vec::with_capacity(rule_set.len() + 1);
    if include_safe_option {
        entries.push(ContextEntry { display: SAFE_RULE, source: SAFE_RULE, text: SAFE_RULE_TEXT.to_string() });
    }
    entries.extend(rule_set.rules.iter().map(|r| ContextEntry {
        display: r.number,
        source: r.number,
        text: r.text.clone(),
    }));
    RuleContext::from_entries(&entries, include_safe_option)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rules_without_safe_option() {
        let rs = RuleSet::from_texts("c", &["No spam", "Be civil"]);
        let ctx = build_context(&rs, false);
        assert_eq!(ctx.text, "<rules> 1. No spam\n2. Be civil </rules>");
        assert_eq!(ctx.rule_text(1), Some("No spam"));
        assert_eq!(ctx.rule_text(2), Some("Be civil"));
        assert_eq!(ctx.segment(1).unwrap().start, 11);
        assert!(ctx.check_invariants());
    }

    #[test]
    fn safe_option_leads() {
        let rs = RuleSet::from_texts("c", &["No spam", "Be civil"]);
        let ctx = build_context(&rs, true);
        let first = ctx.segments[0];
        assert_eq!(first.rule_number, 0);
        assert_eq!(ctx.slice(first.span()), "No rule is violated.");
        assert!(ctx.text.starts_with("<rules> 0. No rule is violated.\n1. No spam"));
        assert!(ctx.check_invariants());
    }

    #[test]
    fn single_rule_and_unicode() {
        let rs = RuleSet::from_texts("c", &["Pas de pourriel, merci à tous"]);
        let ctx = build_context(&rs, false);
        assert_eq!(ctx.segments.len(), 1);
        assert_eq!(ctx.rule_text(1), Some("Pas de pourriel, merci à tous"));
        let region = ctx.inner_region();
        assert_eq!(ctx.slice(region), "1. Pas de pourriel, merci à tous");
    }
}
