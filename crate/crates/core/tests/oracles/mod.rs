//! Brute-force reference computations shared by the integration tests and
//! the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use modq_core::baselines::{fit_cnb, fit_random, CnbOptions, RuleFrequencies};
use modq_core::dataset::{
    augment_extract, build_context, rule_key, split_dataset, AugmentOp, ExtractExample, Segment, SplitSpec, Splits,
};
use modq_core::evalkit::{category_macro_f1, label_predictions, LabeledPrediction};
use modq_core::rulekit::KeywordCategorizer;
use modq_core::spans::Coverage;
use modq_core::synth::{generate, SynthConfig};
use modq_core::{Category, CategorySet, DatasetRow, RuleSet, Span, SplitName, SAFE_RULE, SAFE_RULE_TEXT};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- spans

/// Disjoint segments in position order, numbered by a random permutation.
pub fn random_segments(rng: &mut impl Rng) -> (Vec<Segment>, usize) {
    let k = rng.random_range(1..=8);
    let mut numbers: Vec<u32> = (1..=k as u32).collect();
    numbers.shuffle(rng);
    let mut pos = rng.random_range(0..10);
    let mut segs = Vec::with_capacity(k);
    for n in numbers {
        let len = rng.random_range(1..20);
        segs.push(Segment { rule_number: n, source_rule: n, start: pos, end: pos + len });
        pos += len + rng.random_range(0..5);
    }
    (segs, pos + rng.random_range(0..5))
}

pub fn random_span(rng: &mut impl Rng, len: usize) -> Span {
    let a = rng.random_range(0..=len);
    let b = rng.random_range(0..=len);
    Span::new(a.min(b), a.max(b))
}

/// Character-by-character evaluation of the assignment rule.
pub fn brute_span_rule(span: Span, segs: &[Segment], mode: Coverage) -> (u32, bool) {
    let chars: Vec<usize> = (span.start..span.end).collect();
    let inside = |p: usize, s: &Segment| s.start <= p && p < s.end;
    let ov = |s: &Segment| chars.iter().filter(|&&p| inside(p, s)).count();

    let contained: Vec<u32> = segs
        .iter()
        .filter(|s| !chars.is_empty() && chars.iter().all(|&p| inside(p, s)))
        .map(|s| s.rule_number)
        .collect();
    if let Some(n) = contained.into_iter().min() {
        return (n, false);
    }

    // Coverage compared as exact fractions.
    let mut best: Option<(usize, usize, usize, u32)> = None; // (num, den, overlap, rule)
    for s in segs {
        let o = ov(s);
        if o == 0 {
            continue;
        }
        let den = match mode {
            Coverage::Rule => s.end - s.start,
            Coverage::Span => chars.len(),
        };
        let wins = match best {
            None => true,
            Some((bn, bd, bo, br)) => {
                let lhs = o * bd;
                let rhs = bn * den;
                lhs > rhs || (lhs == rhs && (o > bo || (o == bo && s.rule_number < br)))
            }
        };
        if wins {
            best = Some((o, den, o, s.rule_number));
        }
    }
    if let Some((_, _, _, n)) = best {
        return (n, false);
    }

    let gap = |s: &Segment| {
        let mut g = usize::MAX;
        for x in span.start..=span.end {
            for y in s.start..=s.end {
                g = g.min(x.abs_diff(y));
            }
        }
        g
    };
    let nearest = segs.iter().min_by_key(|s| (gap(s), s.rule_number)).expect("segments");
    (nearest.rule_number, true)
}

/// Number of disagreements with `span_to_rule` over `n` random cases per
/// coverage mode.
pub fn span_oracle_mismatches(n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..n {
        let (segs, len) = random_segments(&mut rng);
        let span = random_span(&mut rng, len);
        for mode in [Coverage::Rule, Coverage::Span] {
            let got = modq_core::spans::span_to_rule(span, &segs, mode).map(|r| (r.rule_number, r.off_segment));
            if got != Some(brute_span_rule(span, &segs, mode)) {
                bad += 1;
            }
        }
    }
    bad
}

// -------------------------------------------------------------- metrics

fn f1_of(tp: u64, fp: u64, fn_: u64) -> f64 {
    if 2 * tp + fp + fn_ == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Category macro F1 from an explicit 2×2 table.
pub fn brute_category_macro(labeled: &[LabeledPrediction], c: Category) -> f64 {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for l in labeled {
        match (l.gold_categories.contains(&c), l.predicted_categories.contains(&c)) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (f1_of(tp, fp, fn_) + f1_of(tn, fn_, fp)) / 2.0
}

/// `(safe F1, not-safe F1)` from an explicit 2×2 table on rule numbers.
pub fn brute_binary_safe(labeled: &[LabeledPrediction]) -> (f64, f64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for l in labeled {
        match (l.gold_rule_number == SAFE_RULE, l.predicted_rule_number == SAFE_RULE) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (f1_of(tp, fp, fn_), f1_of(tn, fn_, fp))
}

fn random_categories(rng: &mut impl Rng, rule: u32) -> CategorySet {
    if rule == SAFE_RULE {
        return CategorySet::from([Category::Safe]);
    }
    let k = rng.random_range(1..=3);
    (0..k).map(|_| Category::RULE_VOCABULARY[rng.random_range(0..11)]).collect()
}

pub fn random_labeled(rng: &mut impl Rng) -> Vec<LabeledPrediction> {
    let n = rng.random_range(1..40);
    (0..n)
        .map(|i| {
            let g = rng.random_range(0..5);
            let p = if rng.random_bool(0.5) { g } else { rng.random_range(0..5) };
            LabeledPrediction {
                record_id: format!("r{i}"),
                gold_rule_number: g,
                predicted_rule_number: p,
                gold_categories: random_categories(rng, g),
                predicted_categories: random_categories(rng, p),
            }
        })
        .collect()
}

/// Largest absolute deviation from the brute-force tables over `n` fixtures.
pub fn metric_oracle_max_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let labeled = random_labeled(&mut rng);
        let per = modq_core::evalkit::category_macro_f1(&labeled);
        for c in Category::ALL {
            worst = worst.max((per[&c] - brute_category_macro(&labeled, c)).abs());
        }
        let b = modq_core::evalkit::binary_safe_f1(&labeled);
        let (s, ns) = brute_binary_safe(&labeled);
        worst = worst.max((b.safe_f1 - s).abs()).max((b.not_safe_f1 - ns).abs());
    }
    worst
}

pub fn lp(gold: &[Category], pred: &[Category], g: u32, p: u32) -> LabeledPrediction {
    LabeledPrediction {
        record_id: String::new(),
        gold_rule_number: g,
        predicted_rule_number: p,
        gold_categories: gold.iter().copied().collect(),
        predicted_categories: pred.iter().copied().collect(),
    }
}

/// Four records where incivility has TP 1, FP 1, FN 0, TN 2.
pub fn worked_example() -> Vec<LabeledPrediction> {
    use Category::*;
    vec![
        lp(&[Incivility], &[Incivility], 1, 1),
        lp(&[Safe], &[Incivility], 0, 1),
        lp(&[Safe], &[Safe], 0, 0),
        lp(&[Spam], &[Spam], 2, 2),
    ]
}

pub type MlcmFixture = (Vec<LabeledPrediction>, Vec<(Category, Category, u64)>);

/// `(records, expected non-zero cells)` traced by hand.
pub fn mlcm_fixtures() -> Vec<MlcmFixture> {
    use Category::*;
    vec![
        // content matches, format is missed and lands on the extra safe prediction
        (vec![lp(&[Content, Format], &[Content, Safe], 1, 1)], vec![(Content, Content, 1), (Format, Safe, 1)]),
        (vec![lp(&[Content], &[Format], 1, 2)], vec![(Content, Format, 1)]),
        // 3 × one spam unit over {hate, meta}: 1.5 / 1.5 rounds to 2 / 1
        (vec![lp(&[Spam], &[Hate, Meta], 1, 2); 3], vec![(Spam, Hate, 2), (Spam, Meta, 1)]),
        // both misses go to the only prediction
        (vec![lp(&[Spam, Meta], &[Hate], 1, 2)], vec![(Spam, Hate, 1), (Meta, Hate, 1)]),
        // extra prediction with every gold category matched adds nothing
        (vec![lp(&[Hate], &[Hate, Spam], 1, 1)], vec![(Hate, Hate, 1)]),
        (vec![lp(&[Safe], &[Safe], 0, 0), lp(&[Safe], &[Trolling], 0, 3)], vec![(Safe, Safe, 1), (Safe, Trolling, 1)]),
    ]
}

pub fn mlcm_failures() -> usize {
    let mut bad = 0;
    for (records, expected) in mlcm_fixtures() {
        let m = modq_core::evalkit::multilabel_confusion(&records);
        let total: u64 = expected.iter().map(|e| e.2).sum();
        if m.total() != total || expected.iter().any(|&(g, p, v)| m.get(g, p) != v) {
            bad += 1;
        }
    }
    bad
}

// --------------------------------------------------------- augmentation

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

fn random_text(rng: &mut impl Rng) -> String {
    let words = rng.random_range(1..6);
    (0..words)
        .map(|_| {
            let n = rng.random_range(3..9);
            (0..n).map(|_| LETTERS[rng.random_range(0..26)] as char).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_extract_example(rng: &mut impl Rng, id: usize) -> (ExtractExample, String) {
    let k = rng.random_range(1..=8);
    let texts: Vec<String> = (0..k).map(|_| random_text(rng)).collect();
    let rules = RuleSet::from_texts("c", &texts);
    let gold = rng.random_range(0..=k as u32);
    let gold_text = if gold == SAFE_RULE { SAFE_RULE_TEXT.to_string() } else { texts[gold as usize - 1].clone() };
    let ex = ExtractExample::new(format!("e{id}"), "<comment> q </comment>".into(), build_context(&rules, true), gold)
        .expect("valid example");
    (ex, gold_text)
}

/// `(cases, failures)` over `n` random examples × each augmentation op.
pub fn augmentation_failures(n: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cases, mut bad) = (0, 0);
    for i in 0..n {
        let (ex, gold_text) = random_extract_example(&mut rng, i);
        let gold_source = ex.answer_source();
        for op in AugmentOp::ALL {
            cases += 1;
            let Ok(out) = augment_extract(&ex, &mut rng, &[op]) else {
                bad += 1;
                continue;
            };
            let dropped = out.context.segment_for_source(gold_source).is_none();
            let ok = out.check_invariants()
                && if dropped {
                    op == AugmentOp::DropOne && out.answer_rule == SAFE_RULE && out.answer_text() == SAFE_RULE_TEXT
                } else {
                    out.answer_text() == gold_text && out.answer_source() == gold_source
                };
            if !ok {
                bad += 1;
            }
        }
    }
    (cases, bad)
}

// ------------------------------------------------------ reason matching

pub const CITATION_RULES: [&str; 7] = [
    "No spam or self-promotion.",
    "Be civil to other members.",
    "No hate speech.",
    "Do not post personal information.",
    "Mark spoilers clearly.",
    "Posts need a flair.",
    "Stay on topic.",
];

/// Fifty `(reason, expected rule)` cases citing a rule explicitly.
pub fn citation_fixture() -> Vec<(String, u32)> {
    let templates: [fn(u32) -> String; 10] = [
        |n| format!("Rule {n}"),
        |n| format!("rule #{n}"),
        |n| format!("Removed: violates rule {n}."),
        |n| format!("RULE {n} - read the sidebar"),
        |n| format!("broke rule{n}"),
        |n| format!("#{n}"),
        |n| format!("See #{n}, please."),
        |n| format!("Breaking Rule #{n} again"),
        |n| format!("(rule {n}) removed by mod"),
        |n| format!("violation of #{n} in the sidebar"),
    ];
    let numbers = [1, 3, 5, 6, 7];
    templates.iter().flat_map(|t| numbers.iter().map(move |&n| (t(n), n))).collect()
}

// ------------------------------------------------------------------ CNB

/// Three toy classes, twenty paraphrases each. Every paraphrase index adds
/// the same neutral suffix to all three classes.
pub fn toy_cnb_corpus() -> (Vec<String>, Vec<u32>) {
    let bases = [("buy cheap pills now", 1), ("you absolute idiot", 2), ("nice weather today", 0)];
    let mut docs = Vec::new();
    let mut labels = Vec::new();
    for k in 0..20 {
        for (text, label) in bases {
            docs.push(format!("{text} w{k}"));
            labels.push(label);
        }
    }
    (docs, labels)
}

fn toks(s: &str) -> Vec<String> {
    s.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_string).collect()
}

/// Dense complement naive Bayes written out term by term.
pub fn hand_cnb_predict(docs: &[String], labels: &[u32], query: &str, alpha: f64) -> u32 {
    let vocab: Vec<String> = docs.iter().flat_map(|d| toks(d)).collect::<BTreeSet<_>>().into_iter().collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| toks(d).contains(t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let vectorize = |text: &str| {
        let words = toks(text);
        let mut v: Vec<f64> =
            vocab.iter().zip(&idf).map(|(t, w)| words.iter().filter(|x| *x == t).count() as f64 * w).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    };
    let x: Vec<Vec<f64>> = docs.iter().map(|d| vectorize(d)).collect();
    let q = vectorize(query);
    let classes: BTreeSet<u32> = labels.iter().copied().collect();
    let mut best: Option<(u32, f64)> = None;
    for c in classes {
        let comp: Vec<f64> = (0..vocab.len())
            .map(|t| alpha + x.iter().zip(labels).filter(|(_, l)| **l != c).map(|(d, _)| d[t]).sum::<f64>())
            .collect();
        let total: f64 = comp.iter().sum();
        let score: f64 = q.iter().zip(&comp).map(|(qi, ci)| qi * -(ci / total).ln()).sum();
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((c, score));
        }
    }
    best.expect("classes").0
}

// ---------------------------------------------------------------- splits

/// Partition, split tags, holdout exclusion and per-stratum fractions
/// within one record.
pub fn check_splits(rows: &[DatasetRow], spec: &SplitSpec, s: &Splits) -> Result<(), String> {
    // the five sets partition the input
    let mut seen = BTreeSet::new();
    for name in SplitName::ALL {
        for r in s.get(name) {
            if !seen.insert(r.id.clone()) {
                return Err(format!("{} appears twice", r.id));
            }
            if r.split != Some(name) {
                return Err(format!("{} carries split {:?}", r.id, r.split));
            }
        }
    }
    let input: BTreeSet<String> = rows.iter().map(|r| r.id.clone()).collect();
    if seen != input {
        return Err("splits do not cover the input exactly".into());
    }
    // holdouts absent from train/dev/test
    let held: BTreeSet<&str> = s.held_out_communities.iter().map(String::as_str).collect();
    let pairs: BTreeSet<(String, String)> = s.held_out_rules.iter().cloned().collect();
    for r in s.train.iter().chain(&s.dev).chain(&s.test) {
        if held.contains(r.community.as_str()) {
            return Err(format!("{} from held-out community {}", r.id, r.community));
        }
        if rule_key(r).is_some_and(|k| pairs.contains(&k)) {
            return Err(format!("{} carries a held-out rule", r.id));
        }
    }
    if s.communities_holdout.iter().any(|r| !held.contains(r.community.as_str())) {
        return Err("community holdout contains other communities".into());
    }
    // fractions within one record per stratum
    for removed in [false, true] {
        let count = |v: &[DatasetRow]| v.iter().filter(|r| r.removed == removed).count() as f64;
        let n = count(&s.train) + count(&s.dev) + count(&s.test);
        for (v, f) in [(&s.train, spec.train_fraction), (&s.dev, spec.dev_fraction), (&s.test, spec.test_fraction)] {
            if (count(v) - f * n).abs() > 1.0 {
                return Err(format!("stratum removed={removed}: {} rows for fraction {f} of {n}", count(v)));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- baselines

/// Largest gap between sampled and training label shares over `draws`
/// seeded draws.
pub fn random_frequency_max_deviation(labels: &[u32], draws: usize, seed: u64) -> f64 {
    let freq = RuleFrequencies::from_labels(labels.iter().copied());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(freq.sample(&mut rng, None)).or_default() += 1;
    }
    let rules: BTreeSet<u32> = labels.iter().copied().chain(counts.keys().copied()).collect();
    rules
        .into_iter()
        .map(|rule| {
            let expected = labels.iter().filter(|&&l| l == rule).count() as f64 / labels.len() as f64;
            let got = counts.get(&rule).copied().unwrap_or(0) as f64 / draws as f64;
            (got - expected).abs()
        })
        .fold(0.0, f64::max)
}

/// Categories with at least `min` gold examples in `train`.
pub fn frequent_categories(rows: &[DatasetRow], min: usize) -> Vec<Category> {
    let cat = KeywordCategorizer::default();
    let labeled =
        label_predictions(&rows.iter().map(|r| (r.id.clone(), r.gold_rule_number)).collect::<Vec<_>>(), rows, &cat)
            .unwrap();
    Category::ALL
        .into_iter()
        .filter(|c| labeled.iter().filter(|l| l.gold_categories.contains(c)).count() >= min)
        .collect()
}

/// `(category, cnb macro F1, random macro F1)` on the synthetic test split
/// for every category with at least `min` training examples.
pub fn cnb_vs_random(min: usize) -> Vec<(Category, f64, f64)> {
    let corpus = generate(&SynthConfig::default()).unwrap();
    let spec = SplitSpec { seed: 1, n_holdout_communities: 0, n_holdout_rules: 0, ..SplitSpec::default() };
    let s = split_dataset(&corpus.rows, &spec).unwrap();
    let cat = KeywordCategorizer::default();
    let cnb = fit_cnb(&s.train, CnbOptions::default()).unwrap();
    let random = fit_random(&s.train, 0).unwrap();
    let score = |preds: Vec<(String, u32)>| category_macro_f1(&label_predictions(&preds, &s.test, &cat).unwrap());
    let c = score(cnb.predict_sequence(&s.test));
    let r = score(random.predict_sequence(&s.test));
    frequent_categories(&s.train, min).into_iter().map(|k| (k, c[&k], r[&k])).collect()
}
