//! Per-community baselines: frequency-random and Complement Naive Bayes.
//! Rule 0 is the safe class; unseen communities predict 0.

pub mod cnb;
pub mod tfidf;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cnb::ComplementNb;
pub use tfidf::TfIdf;

use crate::error::{Error, Result};
use crate::predictor::{candidates, PredictorLoader, RulePredictor};
use crate::text::fnv1a;
use crate::types::{DatasetRow, ModelKind, PairScore, Prediction, RuleSet, SAFE_RULE};

pub const BANK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankKind {
    Random,
    Cnb,
}

/// Empirical distribution over gold rule numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleFrequencies {
    /// `(rule_number, count)`, ascending by rule number.
    pub counts: Vec<(u32, u64)>,
}

impl RuleFrequencies {
    pub fn from_labels(labels: impl IntoIterator<Item = u32>) -> Self {
        let mut map: BTreeMap<u32, u64> = BTreeMap::new();
        for l in labels {
            *map.entry(l).or_default() += 1;
        }
        RuleFrequencies { counts: map.into_iter().collect() }
    }

    pub fn probability(&self, rule: u32) -> f64 {
        let total: u64 = self.counts.iter().map(|(_, c)| c).sum();
        let c = self.counts.iter().find(|(r, _)| *r == rule).map_or(0, |(_, c)| *c);
        if total == 0 {
            0.0
        } else {
            c as f64 / total as f64
        }
    }

    /// Draws a rule number, restricted to `allowed` when given. Falls back
    /// to 0 when no mass remains.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, allowed: Option<&[u32]>) -> u32 {
        let usable: Vec<(u32, u64)> =
            self.counts.iter().copied().filter(|(r, _)| allowed.is_none_or(|a| a.contains(r))).collect();
        let total: u64 = usable.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return SAFE_RULE;
        }
        let mut pick = rng.random_range(0..total);
        for (r, c) in usable {
            if pick < c {
                return r;
            }
            pick -= c;
        }
        unreachable!("pick < total")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CommunityModel {
    Random(RuleFrequencies),
    Cnb(ComplementNb),
}

/// One fitted model per training community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityModelBank {
    pub version: u32,
    pub kind: BankKind,
    pub seed: u64,
    pub models: BTreeMap<String, CommunityModel>,
}

fn by_community(train: &[DatasetRow]) -> BTreeMap<&str, Vec<&DatasetRow>> {
    let mut map: BTreeMap<&str, Vec<&DatasetRow>> = BTreeMap::new();
    for r in train {
        map.entry(r.community.as_str()).or_default().push(r);
    }
    map
}

pub fn fit_random(train: &[DatasetRow], seed: u64) -> Result<CommunityModelBank> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit on an empty training set"));
    }
    let models = by_community(train)
        .into_iter()
        .map(|(c, rows)| {
            let freq = RuleFrequencies::from_labels(rows.iter().map(|r| r.gold_rule_number));
            (c.to_string(), CommunityModel::Random(freq))
        })
        .collect();
    Ok(CommunityModelBank { version: BANK_FORMAT_VERSION, kind: BankKind::Random, seed, models })
}

#[derive(Debug, Clone, Copy)]
pub struct CnbOptions {
    pub alpha: f64,
    pub bigrams: bool,
}

impl Default for CnbOptions {
    fn default() -> Self {
        CnbOptions { alpha: 1.0, bigrams: false }
    }
}

pub fn fit_cnb(train: &[DatasetRow], options: CnbOptions) -> Result<CommunityModelBank> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit on an empty training set"));
    }
    let models = by_community(train)
        .into_iter()
        .map(|(c, rows)| {
            let docs: Vec<&str> = rows.iter().map(|r| r.comment_text.as_str()).collect();
            let labels: Vec<u32> = rows.iter().map(|r| r.gold_rule_number).collect();
            let model = ComplementNb::fit(&docs, &labels, options.alpha, options.bigrams);
            (c.to_string(), CommunityModel::Cnb(model))
        })
        .collect();
    Ok(CommunityModelBank { version: BANK_FORMAT_VERSION, kind: BankKind::Cnb, seed: 0, models })
}

impl CommunityModelBank {
    /// Prediction restricted to `allowed` candidates (all when `None`),
    /// drawing random-baseline samples from `rng`.
    pub fn predict_with<R: Rng + ?Sized>(
        &self,
        comment: &str,
        community: &str,
        allowed: Option<&[u32]>,
        rng: &mut R,
    ) -> u32 {
        match self.models.get(community) {
            None => SAFE_RULE,
            Some(CommunityModel::Random(freq)) => freq.sample(rng, allowed),
            Some(CommunityModel::Cnb(model)) => model.predict_among(comment, allowed).unwrap_or(SAFE_RULE),
        }
    }

    /// Rng seeded from the bank seed and the query, so identical requests
    /// get identical answers.
    fn query_rng(&self, comment: &str, community: &str) -> ChaCha8Rng {
        let h = fnv1a(format!("{community}\u{0}{comment}").as_bytes());
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }

    /// Predicts a whole evaluation set from one seeded stream.
    pub fn predict_sequence(&self, rows: &[DatasetRow]) -> Vec<(String, u32)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rows.iter()
            .map(|r| {
                let allowed = candidates(&r.rule_set());
                (r.id.clone(), self.predict_with(&r.comment_text, &r.community, Some(&allowed), &mut rng))
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut bytes = serde_json::to_vec(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bank: CommunityModelBank = serde_json::from_slice(&std::fs::read(path)?)?;
        if bank.version != BANK_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "bank format version {} (expected {BANK_FORMAT_VERSION})",
                bank.version
            )));
        }
        Ok(bank)
    }

    fn scores(&self, comment: &str, community: &str, allowed: &[u32]) -> Vec<PairScore> {
        match self.models.get(community) {
            Some(CommunityModel::Random(freq)) => {
                allowed.iter().map(|&r| PairScore { rule_number: r, score: freq.probability(r) }).collect()
            }
            Some(CommunityModel::Cnb(model)) => {
                let raw = model.scores(comment);
                allowed
                    .iter()
                    .map(|&r| {
                        let s = model.classes.iter().position(|c| *c == r).map_or(0.0, |i| raw[i]);
                        PairScore { rule_number: r, score: s }
                    })
                    .collect()
            }
            None => allowed
                .iter()
                .map(|&r| PairScore { rule_number: r, score: f64::from(u8::from(r == SAFE_RULE)) })
                .collect(),
        }
    }
}

impl RulePredictor for CommunityModelBank {
    fn kind(&self) -> ModelKind {
        ModelKind::Baseline
    }

    fn predict(&self, comment: &str, community: &str, rules: &RuleSet) -> Result<Prediction> {
        let allowed = candidates(rules);
        let mut rng = self.query_rng(comment, community);
        let rule_number = self.predict_with(comment, community, Some(&allowed), &mut rng);
        let rule_text = rules.text_of(rule_number).unwrap_or_default().to_string();
        Ok(Prediction {
            rule_number,
            rule_text,
            span: None,
            scores: self.scores(comment, community, &allowed),
            model_kind: ModelKind::Baseline,
        })
    }

    fn predict_rows(&self, rows: &[DatasetRow]) -> Result<Vec<(String, u32)>> {
        Ok(self.predict_sequence(rows))
    }
}

pub struct BankLoader;

impl PredictorLoader for BankLoader {
    fn load(&self, path: &Path) -> Result<Arc<dyn RulePredictor>> {
        Ok(Arc::new(CommunityModelBank::load(path)?))
    }
}
