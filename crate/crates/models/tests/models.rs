use candle_core::{Device, Tensor};
use modq_core::dataset::{
    build_context, make_choice_pairs, make_extract_example, split_dataset, AugmentPlan, ChoicePair, ExtractExample,
    SplitSpec, Splits,
};
use modq_core::rulekit::KeywordCategorizer;
use modq_core::synth::{generate, SynthConfig};
use modq_core::{DatasetRow, ModelKind, RulePredictor, RuleSet, SAFE_RULE_TEXT};
use modq_models::checkpoint::{save_checkpoint, CheckpointConfig, FORMAT_VERSION};
use modq_models::extract::{encode, span_loss, ExtractNet, ExtractPredictor};
use modq_models::nn::{init_weights, Batch, Weights};
use modq_models::select::{encode_pair, pair_loss, EncodedPair, NetScorer, PairScorer, SelectNet};
use modq_models::tokenizer::{Tokenizer, PAD};
use modq_models::{loader_registry, train_extract, train_select, EncoderConfig, ModelError, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_enc() -> EncoderConfig {
    EncoderConfig { d_model: 16, n_layers: 1, n_heads: 2, d_ff: 32, max_positions: 128, ..EncoderConfig::default() }
}

fn tiny_splits() -> Splits {
    let cfg = SynthConfig {
        n_communities: 4,
        rules_per_community: 4,
        n_comments: 160,
        n_disjoint: 0,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg).unwrap();
    let spec = SplitSpec { seed: 2, n_holdout_communities: 0, n_holdout_rules: 0, ..SplitSpec::default() };
    split_dataset(&corpus.rows, &spec).unwrap()
}

fn extract_examples(rows: &[DatasetRow]) -> Vec<ExtractExample> {
    rows.iter().map(|r| make_extract_example(&r.record(), &r.rule_set()).unwrap()).collect()
}

fn choice_groups(rows: &[DatasetRow]) -> Vec<Vec<ChoicePair>> {
    rows.iter().map(|r| make_choice_pairs(&r.record(), &r.rule_set()).unwrap()).collect()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, max_sequence_length: 128, ..TrainConfig::default() }
}

fn random_weights(cfg: &EncoderConfig, tok: &Tokenizer, heads: Vec<(String, Vec<usize>)>, seed: u64) -> Weights {
    let mut shapes = cfg.shapes(tok.size());
    shapes.extend(heads);
    init_weights(&shapes, 0.3, seed, &Device::Cpu).unwrap()
}

fn to_rows(t: &Tensor) -> Vec<Vec<f32>> {
    t.to_vec2::<f32>().unwrap()
}

fn log_softmax_row(row: &[f32]) -> Vec<f64> {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let z: f64 = row.iter().map(|v| (*v as f64 - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|v| *v as f64 - z).collect()
}

#[test]
fn span_loss_is_cross_entropy() {
    let s = tiny_splits();
    let examples = extract_examples(&s.train[..6]);
    let texts = modq_models::extract::vocabulary_texts(&examples);
    let tok = Tokenizer::fit(&texts, 1, 8);
    let cfg = tiny_enc();
    let w = random_weights(&cfg, &tok, modq_models::extract::head_shapes(&cfg), 1);
    let net = ExtractNet::new(&cfg, &w).unwrap();
    let enc: Vec<_> =
        examples.iter().map(|e| encode(&tok, &e.id, &e.question, &e.context, Some(e.answer_span), 128)).collect();
    let refs: Vec<_> = enc.iter().collect();
    let loss = f64::from(span_loss(&net, &refs, tok.special(PAD), &Device::Cpu).unwrap().to_scalar::<f32>().unwrap());

    let seqs: Vec<(&[u32], &[u32])> = enc.iter().map(|e| (e.ids.as_slice(), e.type_ids.as_slice())).collect();
    let batch = Batch::new(&seqs, tok.special(PAD), &Device::Cpu).unwrap();
    let t = batch.ids.dims2().unwrap().1;
    let allowed: Vec<f32> = enc
        .iter()
        .flat_map(|e| (0..t).map(|j| if e.allowed.get(j).copied().unwrap_or(false) { 1.0 } else { 0.0 }))
        .collect();
    let allowed = Tensor::from_vec(allowed, (enc.len(), t), &Device::Cpu).unwrap();
    let (start, end) = net.logits(&batch, &allowed).unwrap();
    let (start, end) = (to_rows(&start), to_rows(&end));
    let mut manual = 0.0;
    for (i, e) in enc.iter().enumerate() {
        let (gs, ge) = e.gold.unwrap();
        manual -= log_softmax_row(&start[i])[gs] + log_softmax_row(&end[i])[ge];
    }
    manual /= enc.len() as f64;
    assert!((loss - manual).abs() < 1e-5, "{loss} vs {manual}");
}

#[test]
fn pair_loss_is_weighted_binary_cross_entropy() {
    let s = tiny_splits();
    let groups = choice_groups(&s.train[..4]);
    let texts = modq_models::select::vocabulary_texts(&groups);
    let tok = Tokenizer::fit(&texts, 1, 8);
    let cfg = tiny_enc();
    let w = random_weights(&cfg, &tok, modq_models::select::head_shapes(&cfg), 2);
    let net = SelectNet::new(&cfg, &w).unwrap();
    let pairs: Vec<EncodedPair> = groups
        .iter()
        .flatten()
        .map(|p| {
            let (ids, type_ids) = encode_pair(&tok, &p.content_sequence, &p.rule_text, 128);
            EncodedPair { group_id: p.group_id.clone(), ids, type_ids, label: f32::from(p.label) }
        })
        .collect();
    let refs: Vec<_> = pairs.iter().collect();
    let pw = 2.5;
    let loss =
        f64::from(pair_loss(&net, &refs, tok.special(PAD), pw, &Device::Cpu).unwrap().to_scalar::<f32>().unwrap());

    let seqs: Vec<(&[u32], &[u32])> = pairs.iter().map(|p| (p.ids.as_slice(), p.type_ids.as_slice())).collect();
    let z = net.logits(&Batch::new(&seqs, tok.special(PAD), &Device::Cpu).unwrap()).unwrap().to_vec1::<f32>().unwrap();
    let manual: f64 = pairs
        .iter()
        .zip(&z)
        .map(|(p, &z)| {
            let sig = 1.0 / (1.0 + (-(z as f64)).exp());
            if p.label > 0.5 {
                -pw * sig.ln()
            } else {
                -(1.0 - sig).ln()
            }
        })
        .sum::<f64>()
        / pairs.len() as f64;
    assert!((loss - manual).abs() < 1e-5, "{loss} vs {manual}");
}

#[test]
fn batched_select_scores_match_single() {
    let s = tiny_splits();
    let groups = choice_groups(&s.train);
    let tok = Tokenizer::fit(&modq_models::select::vocabulary_texts(&groups), 1, 8);
    let cfg = tiny_enc();
    let w = random_weights(&cfg, &tok, modq_models::select::head_shapes(&cfg), 3);
    let scorer = NetScorer::new(&cfg, &w, tok, &quick(1)).unwrap();
    let pairs: Vec<(&str, &str)> =
        groups.iter().take(10).flatten().map(|p| (p.content_sequence.as_str(), p.rule_text.as_str())).collect();
    let batched = scorer.score_pairs(&pairs).unwrap();
    for (pair, b) in pairs.iter().zip(&batched) {
        let single = scorer.score_pairs(&[*pair]).unwrap()[0];
        assert!((single - b).abs() < 1e-6, "{single} vs {b}");
    }
}

#[test]
fn untrained_spans_stay_inside_the_rule_region() {
    let s = tiny_splits();
    let examples = extract_examples(&s.train);
    let tok = Tokenizer::fit(&modq_models::extract::vocabulary_texts(&examples), 1, 8);
    let cfg = tiny_enc();
    let w = random_weights(&cfg, &tok, modq_models::extract::head_shapes(&cfg), 4);
    let p = ExtractPredictor::new(&cfg, &w, tok, &quick(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = ["spam", "idiot", "links", "flair", "hello", "topic", "mods", "buy", "now", "the"];
    for i in 0..100 {
        let comment: Vec<&str> =
            (0..rng.random_range(1..12)).map(|_| words[rng.random_range(0..words.len())]).collect();
        let n_rules = rng.random_range(1..7);
        let texts: Vec<String> =
            (0..n_rules).map(|k| format!("Rule text {k} about {}", words[(i + k) % words.len()])).collect();
        let rules = RuleSet::from_texts("c", &texts);
        let out = p.predict_many(&[(&comment.join(" "), &rules)]).unwrap().remove(0);
        let region = out.context.inner_region();
        assert!(region.start <= out.span.start_char && out.span.end_char <= region.end, "case {i}");
        assert!(out.span.start_char <= out.span.end_char);
        assert!(out.prediction.rule_number as usize <= n_rules);
    }
}

#[test]
fn same_seed_same_trajectory() {
    let s = tiny_splits();
    let examples = extract_examples(&s.train);
    let cat = KeywordCategorizer::default();
    let run = || train_extract(&examples, &s.dev, &quick(2), &tiny_enc(), &cat, |_| {}).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.best_epoch, b.best_epoch);
    for (k, v) in &a.weights {
        assert_eq!(
            v.flatten_all().unwrap().to_vec1::<f32>().unwrap(),
            b.weights[k].flatten_all().unwrap().to_vec1::<f32>().unwrap()
        );
    }

    let groups = choice_groups(&s.train);
    let run = || train_select(&groups, &s.dev, &quick(2), &tiny_enc(), &cat, |_| {}).unwrap().metrics;
    assert_eq!(run(), run());
}

#[test]
fn one_epoch_gives_one_checkpoint() {
    let s = tiny_splits();
    let cat = KeywordCategorizer::default();
    let mut seen = 0;
    let t = train_select(&choice_groups(&s.train), &s.dev, &quick(1), &tiny_enc(), &cat, |_| seen += 1).unwrap();
    assert_eq!((t.metrics.len(), t.best_epoch, seen), (1, 1, 1));
    let t = train_extract(&extract_examples(&s.train), &s.dev, &quick(1), &tiny_enc(), &cat, |_| {}).unwrap();
    assert_eq!((t.metrics.len(), t.best_epoch), (1, 1));
    assert_eq!(t.metrics[0].optimizer_steps, s.train.len().div_ceil(8 * 4));
}

#[test]
fn group_without_positive_is_an_integrity_error() {
    let s = tiny_splits();
    let mut groups = choice_groups(&s.train[..3]);
    for p in &mut groups[1] {
        p.label = 0;
    }
    let err = train_select(&groups, &s.dev, &quick(1), &tiny_enc(), &KeywordCategorizer::default(), |_| {})
        .err()
        .expect("training must refuse the group");
    assert!(matches!(err, ModelError::Core(modq_core::Error::Integrity(_))), "{err}");
}

#[test]
fn invalid_configs_are_rejected() {
    let s = tiny_splits();
    let cat = KeywordCategorizer::default();
    let groups = choice_groups(&s.train[..3]);
    for bad in [TrainConfig { epochs: 0, ..quick(1) }, TrainConfig { ema_decay: 1.0, ..quick(1) }] {
        assert!(matches!(train_select(&groups, &s.dev, &bad, &tiny_enc(), &cat, |_| {}), Err(ModelError::Config(_))));
    }
    let odd = EncoderConfig { n_heads: 3, ..tiny_enc() };
    assert!(train_select(&groups, &s.dev, &quick(1), &odd, &cat, |_| {}).is_err());
    assert!(matches!(train_extract(&[], &s.dev, &quick(1), &tiny_enc(), &cat, |_| {}), Err(ModelError::NoExamples(_))));
}

#[test]
fn checkpoints_round_trip_through_the_registry() {
    let s = tiny_splits();
    let cat = KeywordCategorizer::default();
    let dir = tempfile::tempdir().unwrap();
    let reg = loader_registry();
    let enc = tiny_enc();
    let train = quick(1);

    let sel = train_select(&choice_groups(&s.train), &s.dev, &train, &enc, &cat, |_| {}).unwrap();
    let config = |kind| CheckpointConfig {
        format_version: FORMAT_VERSION,
        model_kind: kind,
        encoder: enc.clone(),
        train: train.clone(),
        best_epoch: 1,
    };
    let sel_dir = dir.path().join("select");
    save_checkpoint(&sel_dir, &config(ModelKind::Select), &sel.weights, &sel.tokenizer, &sel.metrics).unwrap();
    let live = modq_models::SelectPredictor::new(Box::new(
        NetScorer::new(&enc, &sel.weights, sel.tokenizer.clone(), &train).unwrap(),
    ));
    let loaded = reg.get("select").unwrap().load(&sel_dir).unwrap();
    assert_eq!(loaded.kind(), ModelKind::Select);
    assert_eq!(live.predict_rows(&s.test).unwrap(), loaded.predict_rows(&s.test).unwrap());
    let row = &s.test[0];
    let a = live.predict(&row.comment_text, &row.community, &row.rule_set()).unwrap();
    let b = loaded.predict(&row.comment_text, &row.community, &row.rule_set()).unwrap();
    assert_eq!(a, b);
    assert_eq!(modq_models::checkpoint::read_metrics(&sel_dir).unwrap(), sel.metrics);
    assert!(reg.get("extract").unwrap().load(&sel_dir).is_err());

    let ext = train_extract(&extract_examples(&s.train), &s.dev, &train, &enc, &cat, |_| {}).unwrap();
    let ext_dir = dir.path().join("extract");
    save_checkpoint(&ext_dir, &config(ModelKind::Extract), &ext.weights, &ext.tokenizer, &ext.metrics).unwrap();
    let live = ExtractPredictor::new(&enc, &ext.weights, ext.tokenizer.clone(), &train).unwrap();
    let loaded = reg.get("extract").unwrap().load(&ext_dir).unwrap();
    assert_eq!(live.predict_rows(&s.test).unwrap(), loaded.predict_rows(&s.test).unwrap());
}

#[test]
fn safe_text_is_a_selectable_candidate() {
    let s = tiny_splits();
    let groups = choice_groups(&s.train[..2]);
    assert!(groups.iter().all(|g| g[0].rule_text == SAFE_RULE_TEXT && g[0].rule_number == 0));
    let ctx = build_context(&s.train[0].rule_set(), true);
    assert_eq!(ctx.rule_text(0), Some(SAFE_RULE_TEXT));
}

#[test]
fn dev_macro_f1_improves_over_the_first_two_epochs() {
    let cfg = SynthConfig { n_communities: 6, n_comments: 600, n_disjoint: 0, ..SynthConfig::default() };
    let corpus = generate(&cfg).unwrap();
    let spec = SplitSpec { seed: 3, n_holdout_communities: 0, n_holdout_rules: 0, ..SplitSpec::default() };
    let s = split_dataset(&corpus.rows, &spec).unwrap();
    let examples = AugmentPlan::default().expand(&extract_examples(&s.train)).unwrap();
    let train = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let enc = EncoderConfig { max_positions: 128, ..EncoderConfig::default() };
    let t = train_extract(&examples, &s.dev, &train, &enc, &KeywordCategorizer::default(), |_| {}).unwrap();
    assert!(t.metrics[1].dev_macro_f1 > t.metrics[0].dev_macro_f1, "{:?}", t.metrics);
}
