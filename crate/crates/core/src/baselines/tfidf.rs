use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::words;

/// Smoothed TF-IDF over lowercase word unigrams (optionally bigrams),
/// rows L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdf {
    pub bigrams: bool,
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

pub fn terms(text: &str, bigrams: bool) -> Vec<String> {
    let toks = words(text);
    let mut out = toks.clone();
    if bigrams {
        out.extend(toks.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    }
    out
}

impl TfIdf {
    pub fn fit<S: AsRef<str>>(docs: &[S], bigrams: bool) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let mut seen: Vec<String> = terms(doc.as_ref(), bigrams);
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let mut vocab = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            vocab.insert(term, i);
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        }
        TfIdf { bigrams, vocab, idf }
    }

    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    /// Sparse `(feature, weight)` vector, sorted by feature index.
    pub fn transform(&self, text: &str) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in terms(text, self.bigrams) {
            if let Some(&i) = self.vocab.get(&t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut v: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut v {
                *w /= norm;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idf_and_normalization() {
        let tf = TfIdf::fit(&["a b", "a c"], false);
        // idf(a) = ln(3/3)+1 = 1, idf(b) = ln(3/2)+1
        let v = tf.transform("a b");
        let (wa, wb) = (1.0, (1.5f64).ln() + 1.0);
        let norm = (wa * wa + wb * wb).sqrt();
        assert!((v[0].1 - wa / norm).abs() < 1e-12);
        assert!((v[1].1 - wb / norm).abs() < 1e-12);
        assert!(tf.transform("zzz").is_empty());
        assert_eq!(TfIdf::fit(&["a b"], true).n_features(), 3);
    }
}
