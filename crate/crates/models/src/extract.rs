//! Span extraction over the rule context.

use candle_core::{Device, Tensor, D};
use modq_core::dataset::{build_context, format_question, ExtractExample, RuleContext};
use modq_core::evalkit::{exact_rule_accuracy, label_predictions, mean_macro_f1};
use modq_core::rulekit::Categorizer;
use modq_core::spans::{span_to_rule_in, Coverage};
use modq_core::{DatasetRow, ModelKind, PairScore, Prediction, RulePredictor, RuleSet, Span};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{ModelError, Result};
use crate::nn::{cosine_head, init_weights, log_softmax, to_f32_vec, Batch, Encoder, EncoderConfig, Weights};
use crate::tokenizer::{Tokenizer, PAD};
use crate::train::{fit, EpochMetrics};

pub const HEAD: &str = "head.span";

pub fn head_shapes(cfg: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
    vec![(HEAD.to_string(), vec![cfg.d_model, 2])]
}

pub struct ExtractNet {
    encoder: Encoder,
    head: Tensor,
    scale: f64,
}

impl ExtractNet {
    pub fn new(cfg: &EncoderConfig, w: &Weights) -> Result<Self> {
        Ok(ExtractNet {
            encoder: Encoder::new(cfg, w)?,
            head: w.get(HEAD).cloned().ok_or_else(|| ModelError::MissingWeight(HEAD.into()))?,
            scale: cfg.head_scale,
        })
    }

    /// Start and end logits `[b, t]` each, with disallowed positions pushed
    /// to `MASK_BIAS`.
    pub fn logits(&self, batch: &Batch, allowed: &Tensor) -> Result<(Tensor, Tensor)> {
        let h = self.encoder.forward(batch)?;
        let z = cosine_head(&h, &self.head, self.scale)?;
        let bias = Batch::bias_from(allowed)?;
        let start = z.narrow(D::Minus1, 0, 1)?.squeeze(D::Minus1)?.broadcast_add(&bias)?;
        let end = z.narrow(D::Minus1, 1, 1)?.squeeze(D::Minus1)?.broadcast_add(&bias)?;
        Ok((start, end))
    }
}

/// One tokenized question/context pair.
#[derive(Debug, Clone)]
pub struct EncodedExtract {
    pub id: String,
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    /// Context char offsets per token (question and special tokens: `None`).
    pub offsets: Vec<Option<(usize, usize)>>,
    /// Tokens a span may start or end on.
    pub allowed: Vec<bool>,
    /// Gold `(start_token, end_token)`, inclusive.
    pub gold: Option<(usize, usize)>,
}

pub fn encode(
    tok: &Tokenizer,
    id: &str,
    question: &str,
    context: &RuleContext,
    answer: Option<Span>,
    max_len: usize,
) -> EncodedExtract {
    let enc = tok.encode_pair(question, &context.text, max_len);
    let inner = context.inner_region();
    let allowed: Vec<bool> =
        enc.offsets.iter().map(|o| o.is_some_and(|(s, e)| s >= inner.start && e <= inner.end)).collect();
    let gold = answer.and_then(|span| {
        let start = enc.offsets.iter().position(|o| o.is_some_and(|(_, e)| e > span.start))?;
        let end = enc.offsets.iter().rposition(|o| o.is_some_and(|(s, _)| s < span.end))?;
        let inside = |i: usize| enc.offsets[i].is_some_and(|(s, e)| s >= span.start && e <= span.end);
        (start <= end && inside(start) && inside(end)).then_some((start, end))
    });
    EncodedExtract { id: id.to_string(), ids: enc.ids, type_ids: enc.type_ids, offsets: enc.offsets, allowed, gold }
}

fn batch_of(items: &[&EncodedExtract], pad: u32, device: &Device) -> Result<(Batch, Tensor)> {
    let seqs: Vec<(&[u32], &[u32])> = items.iter().map(|e| (e.ids.as_slice(), e.type_ids.as_slice())).collect();
    let batch = Batch::new(&seqs, pad, device)?;
    let t = batch.ids.dims2()?.1;
    let mut allowed = vec![0f32; items.len() * t];
    for (i, e) in items.iter().enumerate() {
        for (j, a) in e.allowed.iter().enumerate() {
            if *a {
                allowed[i * t + j] = 1.0;
            }
        }
    }
    let allowed = Tensor::from_vec(allowed, (items.len(), t), device)?;
    Ok((batch, allowed))
}

/// Mean over the batch of start CE + end CE at the gold positions.
pub fn span_loss(net: &ExtractNet, items: &[&EncodedExtract], pad: u32, device: &Device) -> Result<Tensor> {
    let (batch, allowed) = batch_of(items, pad, device)?;
    let (start, end) = net.logits(&batch, &allowed)?;
    let gold: Vec<(usize, usize)> = items
        .iter()
        .map(|e| e.gold.ok_or_else(|| ModelError::NoExamples(format!("example {} has no gold span", e.id))))
        .collect::<Result<_>>()?;
    let gs = Tensor::from_vec(gold.iter().map(|g| g.0 as u32).collect::<Vec<_>>(), (items.len(), 1), device)?;
    let ge = Tensor::from_vec(gold.iter().map(|g| g.1 as u32).collect::<Vec<_>>(), (items.len(), 1), device)?;
    let ls = log_softmax(&start)?.gather(&gs, D::Minus1)?;
    let le = log_softmax(&end)?.gather(&ge, D::Minus1)?;
    Ok(((ls + le)?.mean_all()? * -1.0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub start_char: usize,
    pub end_char: usize,
    pub start_score: f64,
    pub end_score: f64,
    pub rule_number: u32,
    pub off_segment: bool,
}

/// A decoded span with the raw start and end logits and the encoding they
/// were computed over.
pub type DecodedSpan = (SpanPrediction, Vec<f32>, Vec<f32>, EncodedExtract);

/// Best `(start, end)` token pair, inclusive, by summed logits with
/// `start <= end <= start + max_answer_tokens`, both allowed.
pub fn best_span(start: &[f32], end: &[f32], allowed: &[bool], max_answer_tokens: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f32)> = None;
    for s in 0..allowed.len() {
        if !allowed[s] {
            continue;
        }
        for e in s..allowed.len().min(s + max_answer_tokens + 1) {
            if !allowed[e] {
                continue;
            }
            let score = start[s] + end[e];
            if best.is_none_or(|(_, _, b)| score > b) {
                best = Some((s, e, score));
            }
        }
    }
    best.map(|(s, e, _)| (s, e))
}

pub struct ExtractPredictor {
    net: ExtractNet,
    tokenizer: Tokenizer,
    max_len: usize,
    max_answer_tokens: usize,
    coverage: Coverage,
    device: Device,
}

/// Prediction plus the decoded span details.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOutput {
    pub prediction: Prediction,
    pub span: SpanPrediction,
    pub context: RuleContext,
}

impl ExtractPredictor {
    pub fn new(cfg: &EncoderConfig, weights: &Weights, tokenizer: Tokenizer, train: &TrainConfig) -> Result<Self> {
        Ok(ExtractPredictor {
            net: ExtractNet::new(cfg, weights)?,
            tokenizer,
            max_len: train.max_sequence_length.min(cfg.max_positions),
            max_answer_tokens: train.max_answer_tokens,
            coverage: train.coverage,
            device: Device::Cpu,
        })
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// Decodes every `(question, context)` in one batch.
    pub fn predict_spans(&self, inputs: &[(&str, &RuleContext)]) -> Result<Vec<DecodedSpan>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let encoded: Vec<EncodedExtract> =
            inputs.iter().map(|(q, c)| encode(&self.tokenizer, "", q, c, None, self.max_len)).collect();
        let refs: Vec<&EncodedExtract> = encoded.iter().collect();
        let (batch, allowed) = batch_of(&refs, self.tokenizer.special(PAD), &self.device)?;
        let (start, end) = self.net.logits(&batch, &allowed)?;
        let t = batch.ids.dims2()?.1;
        let start = to_f32_vec(&start)?;
        let end = to_f32_vec(&end)?;
        let mut out = Vec::with_capacity(inputs.len());
        for (i, (enc, (_, context))) in encoded.into_iter().zip(inputs).enumerate() {
            if context.segments.is_empty() {
                return Err(ModelError::Core(modq_core::Error::invalid("context has no rules")));
            }
            let n = enc.ids.len();
            let s_row = start[i * t..i * t + n].to_vec();
            let e_row = end[i * t..i * t + n].to_vec();
            let (s, e) = best_span(&s_row, &e_row, &enc.allowed, self.max_answer_tokens)
                .ok_or_else(|| ModelError::Core(modq_core::Error::invalid("context was truncated away")))?;
            let (start_char, _) = enc.offsets[s].expect("allowed tokens have offsets");
            let (_, end_char) = enc.offsets[e].expect("allowed tokens have offsets");
            let mapped = span_to_rule_in(Span::new(start_char, end_char), context, self.coverage)?;
            let source = context.segment(mapped.rule_number).map_or(mapped.rule_number, |seg| seg.source_rule);
            let span = SpanPrediction {
                start_char,
                end_char,
                start_score: f64::from(s_row[s]),
                end_score: f64::from(e_row[e]),
                rule_number: source,
                off_segment: mapped.off_segment,
            };
            out.push((span, s_row, e_row, enc));
        }
        Ok(out)
    }

    pub fn predict_many(&self, queries: &[(&str, &RuleSet)]) -> Result<Vec<ExtractOutput>> {
        let contexts: Vec<RuleContext> = queries.iter().map(|(_, r)| build_context(r, true)).collect();
        let questions: Vec<String> = queries.iter().map(|(c, _)| format_question(c)).collect();
        let inputs: Vec<(&str, &RuleContext)> = questions.iter().map(String::as_str).zip(contexts.iter()).collect();
        let spans = self.predict_spans(&inputs)?;
        let mut out = Vec::with_capacity(queries.len());
        for ((span, s_row, e_row, enc), ((_, rules), context)) in spans.into_iter().zip(queries.iter().zip(contexts)) {
            let ps = softmax_vec(&s_row);
            let pe = softmax_vec(&e_row);
            // Score of a rule: mean of start and end probability mass on its tokens.
            let scores: Vec<PairScore> = context
                .segments
                .iter()
                .map(|seg| {
                    let inside = |i: usize| enc.offsets[i].is_some_and(|(s, e)| s >= seg.start && e <= seg.end);
                    let ms: f64 = (0..ps.len()).filter(|&i| inside(i)).map(|i| ps[i]).sum();
                    let me: f64 = (0..pe.len()).filter(|&i| inside(i)).map(|i| pe[i]).sum();
                    PairScore { rule_number: seg.source_rule, score: ((ms + me) / 2.0).clamp(0.0, 1.0) }
                })
                .collect();
            let rule_text = rules.text_of(span.rule_number).unwrap_or_default().to_string();
            let local = relative_span(&span, &context, rule_text.chars().count());
            let prediction = Prediction {
                rule_number: span.rule_number,
                rule_text,
                span: Some(local),
                scores,
                model_kind: ModelKind::Extract,
            };
            out.push(ExtractOutput { prediction, span, context });
        }
        Ok(out)
    }
}

/// The predicted span clipped to its rule's segment, in char offsets into
/// that rule's text. A span that misses the segment covers the whole rule.
fn relative_span(span: &SpanPrediction, context: &RuleContext, rule_len: usize) -> Span {
    let Some(seg) = context.segments.iter().find(|s| s.source_rule == span.rule_number) else {
        return Span::new(0, rule_len);
    };
    let start = span.start_char.clamp(seg.start, seg.end);
    let end = span.end_char.clamp(seg.start, seg.end);
    if start >= end {
        return Span::new(0, rule_len);
    }
    Span::new(start - seg.start, end - seg.start)
}

fn softmax_vec(x: &[f32]) -> Vec<f64> {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f64> = x.iter().map(|v| f64::from(v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

const PREDICT_CHUNK: usize = 32;

impl RulePredictor for ExtractPredictor {
    fn kind(&self) -> ModelKind {
        ModelKind::Extract
    }

    fn predict(&self, comment: &str, _community: &str, rules: &RuleSet) -> modq_core::Result<Prediction> {
        let mut out = self.predict_many(&[(comment, rules)])?;
        Ok(out.remove(0).prediction)
    }

    fn predict_rows(&self, rows: &[DatasetRow]) -> modq_core::Result<Vec<(String, u32)>> {
        let sets: Vec<RuleSet> = rows.iter().map(DatasetRow::rule_set).collect();
        let mut out = Vec::with_capacity(rows.len());
        for (chunk, chunk_sets) in rows.chunks(PREDICT_CHUNK).zip(sets.chunks(PREDICT_CHUNK)) {
            let queries: Vec<(&str, &RuleSet)> =
                chunk.iter().map(|r| r.comment_text.as_str()).zip(chunk_sets.iter()).collect();
            for (row, o) in chunk.iter().zip(self.predict_many(&queries)?) {
                out.push((row.id.clone(), o.prediction.rule_number));
            }
        }
        Ok(out)
    }
}

/// Dev-set macro F1 and exact-rule accuracy of a predictor.
pub fn dev_metrics(model: &dyn RulePredictor, dev: &[DatasetRow], categorizer: &dyn Categorizer) -> Result<(f64, f64)> {
    if dev.is_empty() {
        return Ok((0.0, 0.0));
    }
    let preds = model.predict_rows(dev)?;
    let labeled = label_predictions(&preds, dev, categorizer)?;
    Ok((mean_macro_f1(&labeled), exact_rule_accuracy(&labeled)))
}

pub struct TrainedExtract {
    pub weights: Weights,
    pub tokenizer: Tokenizer,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    /// Examples dropped because truncation destroyed the gold span.
    pub skipped: usize,
}

pub fn vocabulary_texts(train: &[ExtractExample]) -> Vec<String> {
    train.iter().flat_map(|e| [e.question.clone(), e.context.text.clone()]).collect()
}

pub fn train_extract(
    train: &[ExtractExample],
    dev: &[DatasetRow],
    cfg: &TrainConfig,
    enc_cfg: &EncoderConfig,
    categorizer: &dyn Categorizer,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedExtract> {
    cfg.validate()?;
    enc_cfg.validate()?;
    let device = Device::Cpu;
    let tokenizer = Tokenizer::fit(&vocabulary_texts(train), cfg.min_word_freq, enc_cfg.oov_buckets);
    let max_len = cfg.max_sequence_length.min(enc_cfg.max_positions);
    let mut skipped = 0;
    let encoded: Vec<EncodedExtract> = train
        .iter()
        .filter_map(|ex| {
            let e = encode(&tokenizer, &ex.id, &ex.question, &ex.context, Some(ex.answer_span), max_len);
            if e.gold.is_none() {
                skipped += 1;
            }
            e.gold.is_some().then_some(e)
        })
        .collect();
    if skipped > 0 {
        log::warn!("skipped {skipped} examples whose gold span was truncated away");
    }
    let mut shapes = enc_cfg.shapes(tokenizer.size());
    shapes.extend(head_shapes(enc_cfg));
    let init = init_weights(&shapes, enc_cfg.init_std, cfg.seed, &device)?;
    let pad = tokenizer.special(PAD);
    let outcome = fit(
        cfg,
        &init,
        &encoded,
        |e| e.id.as_str(),
        |w, chunk| span_loss(&ExtractNet::new(enc_cfg, w)?, chunk, pad, &device),
        |w| {
            let p = ExtractPredictor::new(enc_cfg, w, tokenizer.clone(), cfg)?;
            dev_metrics(&p, dev, categorizer)
        },
        on_epoch,
    )?;
    Ok(TrainedExtract {
        weights: outcome.best,
        tokenizer,
        metrics: outcome.metrics,
        best_epoch: outcome.best_epoch,
        skipped,
    })
}
