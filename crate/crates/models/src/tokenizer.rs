//! Word-level tokenizer with character offsets.
//!
//! Known words map to vocabulary ids; unknown words fall into a fixed
//! number of hash buckets so unseen rule wording still gets stable ids.
//! The four context markers and `[SEP]` are atomic.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use modq_core::dataset::{MARKER_TOKENS, SEP_MARK};
use modq_core::text::fnv1a;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// One pre-tokenized piece, with char offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn atomic_at(chars: &[char], i: usize) -> Option<&'static str> {
    MARKER_TOKENS.iter().copied().chain([SEP_MARK]).find(|m| {
        let n = m.chars().count();
        i + n <= chars.len() && chars[i..i + n].iter().copied().eq(m.chars())
    })
}

/// Splits into lowercase alphanumeric runs (inner apostrophes kept), single
/// punctuation characters and atomic markers. Whitespace is dropped.
pub fn pre_tokenize(text: &str) -> Vec<Piece> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if let Some(m) = atomic_at(&chars, i) {
            let n = m.chars().count();
            out.push(Piece { text: m.to_string(), start: i, end: i + n });
            i += n;
        } else if chars[i].is_alphanumeric() {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric()
                    || (chars[i] == '\'' && i + 1 < chars.len() && chars[i + 1].is_alphanumeric() && i > start))
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect::<String>().to_lowercase();
            out.push(Piece { text: word, start, end: i });
        } else if chars[i].is_whitespace() {
            i += 1;
        } else {
            out.push(Piece { text: chars[i].to_string(), start: i, end: i + 1 });
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenizer {
    vocab: Vec<String>,
    n_buckets: u32,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    fn specials() -> Vec<String> {
        [PAD, UNK, CLS, SEP].iter().chain(MARKER_TOKENS.iter()).map(|s| s.to_string()).collect()
    }

    /// Vocabulary of every piece seen at least `min_freq` times, most
    /// frequent first (ties alphabetical), after the special tokens.
    pub fn fit<S: AsRef<str>>(texts: &[S], min_freq: usize, n_buckets: u32) -> Self {
        let specials = Self::specials();
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for p in pre_tokenize(t.as_ref()) {
                *freq.entry(p.text).or_default() += 1;
            }
        }
        let mut words: Vec<(String, usize)> =
            freq.into_iter().filter(|(w, c)| *c >= min_freq && !specials.contains(w)).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let vocab: Vec<String> = specials.into_iter().chain(words.into_iter().map(|(w, _)| w)).collect();
        Self::from_vocab(vocab, n_buckets)
    }

    pub fn from_vocab(vocab: Vec<String>, n_buckets: u32) -> Self {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Tokenizer { vocab, n_buckets, index }
    }

    /// Total embedding rows: vocabulary plus hash buckets.
    pub fn size(&self) -> usize {
        self.vocab.len() + self.n_buckets as usize
    }

    pub fn id(&self, piece: &str) -> u32 {
        match self.index.get(piece) {
            Some(&i) => i,
            None if self.n_buckets == 0 => self.index[UNK],
            None => self.vocab.len() as u32 + (fnv1a(piece.as_bytes()) % u64::from(self.n_buckets)) as u32,
        }
    }

    pub fn special(&self, token: &str) -> u32 {
        self.index[token]
    }

    pub fn encode(&self, text: &str) -> Vec<(u32, Piece)> {
        pre_tokenize(text)
            .into_iter()
            .map(|p| {
                let id = if p.text == SEP_MARK { self.special(SEP) } else { self.id(&p.text) };
                (id, p)
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw: Tokenizer = serde_json::from_slice(&std::fs::read(path)?)?;
        Ok(Self::from_vocab(raw.vocab, raw.n_buckets))
    }
}

/// Token ids of a `[CLS] a [SEP] b [SEP]` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEncoding {
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    /// Char offsets into `b` for tokens of the second segment.
    pub offsets: Vec<Option<(usize, usize)>>,
    /// Token index range `[start, end)` of the second segment.
    pub second: (usize, usize),
    /// The second segment had to be cut.
    pub truncated_second: bool,
}

impl Tokenizer {
    /// Fits into `max_len` by cutting the first segment first (keeping at
    /// least one token of it), then the tail of the second.
    pub fn encode_pair(&self, a: &str, b: &str, max_len: usize) -> PairEncoding {
        let mut ta = self.encode(a);
        let mut tb = self.encode(b);
        let budget = max_len.saturating_sub(3).max(2);
        let before = tb.len();
        if ta.len() + tb.len() > budget {
            let keep_a = budget.saturating_sub(tb.len()).max(1).min(ta.len());
            ta.truncate(keep_a);
            tb.truncate(budget - ta.len());
        }
        let mut ids = vec![self.special(CLS)];
        let mut type_ids = vec![0];
        let mut offsets = vec![None];
        for (id, _) in &ta {
            ids.push(*id);
            type_ids.push(0);
            offsets.push(None);
        }
        ids.push(self.special(SEP));
        type_ids.push(0);
        offsets.push(None);
        let start = ids.len();
        for (id, p) in &tb {
            ids.push(*id);
            type_ids.push(1);
            offsets.push(Some((p.start, p.end)));
        }
        let end = ids.len();
        ids.push(self.special(SEP));
        type_ids.push(1);
        offsets.push(None);
        PairEncoding { ids, type_ids, offsets, second: (start, end), truncated_second: tb.len() < before }
    }
}
