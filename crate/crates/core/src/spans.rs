//! Mapping a predicted character span back to the rule it covers.

use serde::{Deserialize, Serialize};

use crate::dataset::{RuleContext, Segment};
use crate::error::{Error, Result};
use crate::types::Span;

/// What "most fully covered" is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Overlap divided by the segment length.
    #[default]
    Rule,
    /// Overlap divided by the span length.
    Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanRule {
    pub rule_number: u32,
    pub coverage: f64,
    /// The span touched no segment; `rule_number` is the nearest one.
    pub off_segment: bool,
}

pub fn overlap(a: Span, b: Span) -> usize {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

/// Characters between the span and the segment (0 when they touch or overlap).
pub fn distance(span: Span, seg: Span) -> usize {
    seg.start.saturating_sub(span.end).max(span.start.saturating_sub(seg.end))
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rule whose segment the span covers most: containment first, then the
/// highest coverage, then larger raw overlap, then the lower rule number.
/// Without any overlap the nearest segment is returned, flagged.
pub fn span_to_rule(span: Span, segments: &[Segment], mode: Coverage) -> Option<SpanRule> {
    if segments.is_empty() {
        return None;
    }
    let covered = |seg: &Segment, ov: usize| match mode {
        Coverage::Rule => ratio(ov, seg.len()),
        Coverage::Span => ratio(ov, span.len()),
    };
    if let Some(seg) = segments
        .iter()
        .filter(|s| !span.is_empty() && s.start <= span.start && span.end <= s.end)
        .min_by_key(|s| s.rule_number)
    {
        return Some(SpanRule { rule_number: seg.rule_number, coverage: covered(seg, span.len()), off_segment: false });
    }
    let mut best: Option<(&Segment, f64, usize)> = None;
    for seg in segments {
        let ov = overlap(span, seg.span());
        if ov == 0 {
            continue;
        }
        let c = covered(seg, ov);
        let better = match best {
            None => true,
            Some((b, bc, bov)) => c > bc || (c == bc && (ov > bov || (ov == bov && seg.rule_number < b.rule_number))),
        };
        if better {
            best = Some((seg, c, ov));
        }
    }
    if let Some((seg, c, _)) = best {
        return Some(SpanRule { rule_number: seg.rule_number, coverage: c, off_segment: false });
    }
    let nearest =
        segments.iter().min_by_key(|s| (distance(span, s.span()), s.rule_number)).expect("segments non-empty");
    Some(SpanRule { rule_number: nearest.rule_number, coverage: 0.0, off_segment: true })
}

pub fn span_to_rule_in(span: Span, context: &RuleContext, mode: Coverage) -> Result<SpanRule> {
    if span.start > span.end || span.end > context.char_len() {
        return Err(Error::invalid(format!(
            "span {}..{} outside context of length {}",
            span.start,
            span.end,
            context.char_len()
        )));
    }
    span_to_rule(span, &context.segments, mode).ok_or_else(|| Error::invalid("context has no rules"))
}
