mod oracles;

use modq_core::dataset::{build_context, Segment};
use modq_core::spans::{span_to_rule, span_to_rule_in, Coverage};
use modq_core::{RuleSet, Span};
use proptest::prelude::*;

#[test]
fn agrees_with_brute_force_on_random_cases() {
    assert_eq!(oracles::span_oracle_mismatches(1000, 7), 0);
}

fn arb_case() -> impl Strategy<Value = (Vec<Segment>, Span)> {
    any::<u64>().prop_map(|seed| {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (segs, len) = oracles::random_segments(&mut rng);
        let span = oracles::random_span(&mut rng, len);
        (segs, span)
    })
}

proptest! {
    #[test]
    fn result_is_a_segment_number((segs, span) in arb_case()) {
        for mode in [Coverage::Rule, Coverage::Span] {
            let r = span_to_rule(span, &segs, mode).unwrap();
            prop_assert!(segs.iter().any(|s| s.rule_number == r.rule_number));
            prop_assert!((0.0..=1.0).contains(&r.coverage));
            prop_assert_eq!((r.rule_number, r.off_segment), oracles::brute_span_rule(span, &segs, mode));
        }
    }

    #[test]
    fn whole_segment_maps_to_itself((segs, _span) in arb_case(), pick in any::<prop::sample::Index>()) {
        let s = segs[pick.index(segs.len())];
        let r = span_to_rule(s.span(), &segs, Coverage::Rule).unwrap();
        prop_assert_eq!((r.rule_number, r.coverage, r.off_segment), (s.rule_number, 1.0, false));
    }
}

#[test]
fn bounds_are_checked_against_the_context() {
    let ctx = build_context(&RuleSet::from_texts("c", &["No spam", "Be civil"]), true);
    let n = ctx.char_len();
    assert!(span_to_rule_in(Span::new(0, n + 1), &ctx, Coverage::Rule).is_err());
    assert!(span_to_rule_in(Span::new(3, 2), &ctx, Coverage::Rule).is_err());
    let seg = *ctx.segment(2).unwrap();
    assert_eq!(span_to_rule_in(seg.span(), &ctx, Coverage::Rule).unwrap().rule_number, 2);
}
