//! Sentence encoders used to align free-text removal reasons with rules.

use std::collections::HashSet;
use std::sync::{Arc, LazyLock};

use crate::error::Result;
use crate::registry::Registry;
use crate::text::{fnv1a, words};

/// Maps sentences to fixed-dimension vectors. Implementations must be safe
/// for concurrent read-only use.
pub trait SentenceEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn encode(&self, sentences: &[&str]) -> Result<Vec<Vec<f32>>>;
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "of", "to", "in", "on", "for", "with", "at", "by", "from", "is", "are", "be", "was",
    "were", "been", "it", "its", "this", "that", "these", "those", "no", "not", "don't", "do", "does", "any", "all",
    "your", "you", "our", "we", "us", "my", "i", "me", "please", "will", "can", "must", "should", "may", "as", "so",
    "if", "but", "removed", "remove", "removal", "comment", "comments", "post", "posts", "rule", "rules", "here",
    "there", "other", "others", "allowed", "keep", "only", "such",
];

static STOPWORD_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| STOPWORDS.iter().copied().collect());

/// Light suffix stripping, enough to conflate "spamming" with "spam".
pub fn stem(word: &str) -> String {
    const SUFFIXES: &[&str] = &[
        "ational", "ations", "ation", "ments", "ment", "ings", "ing", "ness", "ers", "er", "ies", "ed", "es", "s", "ly",
    ];
    let mut w = word.to_string();
    for suf in SUFFIXES {
        if w.len() > suf.len() + 2 && w.ends_with(suf) {
            w.truncate(w.len() - suf.len());
            if *suf == "ies" {
                w.push('y');
            }
            break;
        }
    }
    let bytes = w.as_bytes();
    if bytes.len() > 3 {
        let (a, b) = (bytes[bytes.len() - 1], bytes[bytes.len() - 2]);
        if a == b && !b"aeiouls".contains(&a) {
            w.pop();
        }
    }
    w
}

/// Hashing-trick vector over weighted string features.
fn hashed(features: &[(String, f32)], dim: usize) -> Vec<f32> {
    let mut v = vec![0.0f32; dim];
    for (feat, weight) in features {
        let h = fnv1a(feat.as_bytes());
        let idx = (h % dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        v[idx] += sign * weight;
    }
    v
}

fn trigrams(token: &str) -> Vec<String> {
    let padded: Vec<char> = format!("<{token}>").chars().collect();
    padded.windows(3).map(|w| w.iter().collect()).collect()
}

fn content_tokens(text: &str) -> Vec<String> {
    let all = words(text);
    let content: Vec<String> = all.iter().filter(|w| !STOPWORD_SET.contains(w.as_str())).cloned().collect();
    if content.is_empty() {
        all
    } else {
        content
    }
}

/// Character-trigram bag-of-stems encoder.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    pub dim: usize,
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder { dim: 1024 }
    }
}

impl HashingEncoder {
    fn features(text: &str) -> Vec<(String, f32)> {
        let tokens = content_tokens(text);
        if tokens.is_empty() {
            return trigrams(text.trim()).into_iter().map(|g| (format!("g:{g}"), 1.0)).collect();
        }
        let mut feats = Vec::new();
        for tok in tokens {
            let s = stem(&tok);
            let grams = trigrams(&s);
            let w = 1.0 / grams.len() as f32;
            feats.push((format!("w:{s}"), 1.0));
            feats.extend(grams.into_iter().map(|g| (format!("g:{g}"), w)));
        }
        feats
    }
}

impl SentenceEncoder for HashingEncoder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, sentences: &[&str]) -> Result<Vec<Vec<f32>>> {
        Ok(sentences.iter().map(|s| hashed(&Self::features(s), self.dim)).collect())
    }
}

/// Concept-lexicon encoder: words listed in a concept table contribute a
/// shared concept feature, so "spamming links" and "self-promotion" land
/// close together; other words contribute weak lexical features.
#[derive(Debug, Clone)]
pub struct LexiconEncoder {
    dim: usize,
    concepts: Vec<(String, Vec<String>)>,
    pub concept_weight: f32,
    pub lexical_weight: f32,
}

const BUNDLED_CONCEPTS: &str = include_str!("../../data/concepts.v1.tsv");

impl Default for LexiconEncoder {
    fn default() -> Self {
        LexiconEncoder::from_table(BUNDLED_CONCEPTS, 1024)
    }
}

impl LexiconEncoder {
    /// Parses `concept<TAB>stem stem ...` lines; `#` starts a comment line.
    pub fn from_table(table: &str, dim: usize) -> Self {
        let concepts = table
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once('\t'))
            .map(|(c, stems)| (c.trim().to_string(), stems.split_whitespace().map(str::to_string).collect()))
            .collect();
        LexiconEncoder { dim, concepts, concept_weight: 1.0, lexical_weight: 0.3 }
    }

    fn concepts_of(&self, stemmed: &str, raw: &str) -> Vec<&str> {
        self.concepts
            .iter()
            .filter(|(_, stems)| {
                stems.iter().any(|s| {
                    let hit = |w: &str| if s.len() >= 4 { w.starts_with(s.as_str()) } else { w == s };
                    hit(stemmed) || hit(raw)
                })
            })
            .map(|(c, _)| c.as_str())
            .collect()
    }

    fn features(&self, text: &str) -> Vec<(String, f32)> {
        let tokens = content_tokens(text);
        if tokens.is_empty() {
            return trigrams(text.trim()).into_iter().map(|g| (format!("g:{g}"), 1.0)).collect();
        }
        let mut feats = Vec::new();
        for tok in tokens {
            let s = stem(&tok);
            for c in self.concepts_of(&s, &tok) {
                feats.push((format!("c:{c}"), self.concept_weight));
            }
            feats.push((format!("w:{s}"), self.lexical_weight));
        }
        feats
    }
}

impl SentenceEncoder for LexiconEncoder {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, sentences: &[&str]) -> Result<Vec<Vec<f32>>> {
        Ok(sentences.iter().map(|s| hashed(&self.features(s), self.dim)).collect())
    }
}

/// Built-in encoders by name: `lexicon` (default) and `hashing`.
pub fn encoder_registry() -> Registry<dyn SentenceEncoder> {
    let mut reg: Registry<dyn SentenceEncoder> = Registry::new("sentence encoder");
    reg.register("lexicon", Arc::new(LexiconEncoder::default()));
    reg.register("hashing", Arc::new(HashingEncoder::default()));
    reg
}
