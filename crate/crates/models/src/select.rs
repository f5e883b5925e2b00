//! Comment–rule pair scoring with a single sigmoid logit.

use candle_core::{Device, Tensor, D};
use modq_core::dataset::{check_group, content_sequence, ChoicePair};
use modq_core::rulekit::Categorizer;
use modq_core::{
    candidates, prediction_from_scores, DatasetRow, ModelKind, PairScore, Prediction, RulePredictor, RuleSet,
    SAFE_RULE_TEXT,
};

use crate::config::TrainConfig;
use crate::error::{ModelError, Result};
use crate::extract::dev_metrics;
use crate::nn::{cosine_head, init_weights, pool, to_f32_vec, Batch, Encoder, EncoderConfig, Pooling, Weights};
use crate::tokenizer::{Tokenizer, PAD};
use crate::train::{fit, EpochMetrics};

pub const HEAD_W: &str = "head.pair.w";
pub const HEAD_B: &str = "head.pair.b";

pub fn head_shapes(cfg: &EncoderConfig) -> Vec<(String, Vec<usize>)> {
    vec![(HEAD_W.to_string(), vec![cfg.d_model, 1]), (HEAD_B.to_string(), vec![1])]
}

pub struct SelectNet {
    encoder: Encoder,
    w: Tensor,
    b: Tensor,
    scale: f64,
    pooling: Pooling,
}

impl SelectNet {
    pub fn new(cfg: &EncoderConfig, weights: &Weights) -> Result<Self> {
        let get = |n: &str| weights.get(n).cloned().ok_or_else(|| ModelError::MissingWeight(n.into()));
        Ok(SelectNet {
            encoder: Encoder::new(cfg, weights)?,
            w: get(HEAD_W)?,
            b: get(HEAD_B)?,
            scale: cfg.head_scale,
            pooling: cfg.pooling,
        })
    }

    /// One logit per sequence; `[b]`.
    pub fn logits(&self, batch: &Batch) -> Result<Tensor> {
        let h = self.encoder.forward(batch)?;
        let pooled = pool(&h, &batch.mask, self.pooling)?;
        let z = cosine_head(&pooled, &self.w, self.scale)?.squeeze(D::Minus1)?;
        Ok(z.broadcast_add(&self.b)?)
    }
}

#[derive(Debug, Clone)]
pub struct EncodedPair {
    pub group_id: String,
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    pub label: f32,
}

pub fn encode_pair(tok: &Tokenizer, content: &str, rule_text: &str, max_len: usize) -> (Vec<u32>, Vec<u32>) {
    let enc = tok.encode_pair(content, rule_text, max_len);
    (enc.ids, enc.type_ids)
}

/// Weighted binary cross-entropy on logits, averaged over the batch.
pub fn pair_loss(
    net: &SelectNet,
    items: &[&EncodedPair],
    pad: u32,
    positive_weight: f64,
    device: &Device,
) -> Result<Tensor> {
    let seqs: Vec<(&[u32], &[u32])> = items.iter().map(|p| (p.ids.as_slice(), p.type_ids.as_slice())).collect();
    let batch = Batch::new(&seqs, pad, device)?;
    let z = net.logits(&batch)?;
    let y = Tensor::from_vec(items.iter().map(|p| p.label).collect::<Vec<_>>(), items.len(), device)?;
    let weight = Tensor::from_vec(
        items.iter().map(|p| if p.label > 0.5 { positive_weight as f32 } else { 1.0 }).collect::<Vec<_>>(),
        items.len(),
        device,
    )?;
    // max(z, 0) - z·y + log(1 + exp(-|z|))
    let per = ((z.relu()? - (&z * &y)?)? + ((z.abs()?.neg()?.exp()? + 1.0)?.log()?))?;
    Ok(((per * weight)?.sum_all()? / items.len() as f64)?)
}

/// Anything that maps `(content_sequence, rule_text)` pairs to
/// probabilities in one call.
pub trait PairScorer: Send + Sync {
    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>>;
}

pub struct NetScorer {
    net: SelectNet,
    tokenizer: Tokenizer,
    max_len: usize,
    device: Device,
}

impl NetScorer {
    pub fn new(cfg: &EncoderConfig, weights: &Weights, tokenizer: Tokenizer, train: &TrainConfig) -> Result<Self> {
        Ok(NetScorer {
            net: SelectNet::new(cfg, weights)?,
            tokenizer,
            max_len: train.max_sequence_length.min(cfg.max_positions),
            device: Device::Cpu,
        })
    }
}

impl PairScorer for NetScorer {
    fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let enc: Vec<(Vec<u32>, Vec<u32>)> =
            pairs.iter().map(|(a, b)| encode_pair(&self.tokenizer, a, b, self.max_len)).collect();
        let seqs: Vec<(&[u32], &[u32])> = enc.iter().map(|(i, t)| (i.as_slice(), t.as_slice())).collect();
        let batch = Batch::new(&seqs, self.tokenizer.special(PAD), &self.device)?;
        let z = to_f32_vec(&self.net.logits(&batch)?)?;
        Ok(z.into_iter().map(|v| 1.0 / (1.0 + (-f64::from(v)).exp())).collect())
    }
}

pub struct SelectPredictor {
    scorer: Box<dyn PairScorer>,
}

impl SelectPredictor {
    pub fn new(scorer: Box<dyn PairScorer>) -> Self {
        SelectPredictor { scorer }
    }

    /// One score per candidate (safe first), all in a single batch.
    pub fn score_rules(&self, comment: &str, community: &str, rules: &RuleSet) -> Result<Vec<PairScore>> {
        if rules.is_empty() {
            return Err(ModelError::Core(modq_core::Error::invalid("rule set is empty")));
        }
        let content = content_sequence(comment, community);
        let texts: Vec<&str> =
            std::iter::once(SAFE_RULE_TEXT).chain(rules.rules.iter().map(|r| r.text.as_str())).collect();
        let pairs: Vec<(&str, &str)> = texts.iter().map(|t| (content.as_str(), *t)).collect();
        let scores = self.scorer.score_pairs(&pairs)?;
        Ok(candidates(rules)
            .into_iter()
            .zip(scores)
            .map(|(rule_number, score)| PairScore { rule_number, score })
            .collect())
    }
}

impl RulePredictor for SelectPredictor {
    fn kind(&self) -> ModelKind {
        ModelKind::Select
    }

    fn predict(&self, comment: &str, community: &str, rules: &RuleSet) -> modq_core::Result<Prediction> {
        let scores = self.score_rules(comment, community, rules)?;
        prediction_from_scores(scores, rules, ModelKind::Select)
    }
}

pub struct TrainedSelect {
    pub weights: Weights,
    pub tokenizer: Tokenizer,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
}

pub fn vocabulary_texts(groups: &[Vec<ChoicePair>]) -> Vec<String> {
    groups
        .iter()
        .flat_map(|g| {
            let head = g.first().map(|p| p.content_sequence.clone());
            head.into_iter().chain(g.iter().map(|p| p.rule_text.clone()))
        })
        .collect()
}

pub fn train_select(
    train: &[Vec<ChoicePair>],
    dev: &[DatasetRow],
    cfg: &TrainConfig,
    enc_cfg: &EncoderConfig,
    categorizer: &dyn Categorizer,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainedSelect> {
    cfg.validate()?;
    enc_cfg.validate()?;
    for g in train {
        check_group(g)?;
    }
    let device = Device::Cpu;
    let tokenizer = Tokenizer::fit(&vocabulary_texts(train), cfg.min_word_freq, enc_cfg.oov_buckets);
    let max_len = cfg.max_sequence_length.min(enc_cfg.max_positions);
    let pairs: Vec<EncodedPair> = train
        .iter()
        .flatten()
        .map(|p| {
            let (ids, type_ids) = encode_pair(&tokenizer, &p.content_sequence, &p.rule_text, max_len);
            EncodedPair { group_id: p.group_id.clone(), ids, type_ids, label: f32::from(p.label) }
        })
        .collect();
    let mut shapes = enc_cfg.shapes(tokenizer.size());
    shapes.extend(head_shapes(enc_cfg));
    let mut init = init_weights(&shapes, enc_cfg.init_std, cfg.seed, &device)?;
    init.insert(HEAD_B.to_string(), Tensor::zeros(1, candle_core::DType::F32, &device)?);
    let pad = tokenizer.special(PAD);
    let outcome = fit(
        cfg,
        &init,
        &pairs,
        |p| p.group_id.as_str(),
        |w, chunk| pair_loss(&SelectNet::new(enc_cfg, w)?, chunk, pad, cfg.positive_weight, &device),
        |w| {
            let scorer = NetScorer::new(enc_cfg, w, tokenizer.clone(), cfg)?;
            dev_metrics(&SelectPredictor::new(Box::new(scorer)), dev, categorizer)
        },
        on_epoch,
    )?;
    Ok(TrainedSelect { weights: outcome.best, tokenizer, metrics: outcome.metrics, best_epoch: outcome.best_epoch })
}
