use serde::{Deserialize, Serialize};

use super::tfidf::TfIdf;

/// Complement Naive Bayes over TF-IDF features. Each class is scored with
/// weights estimated from the documents of every *other* class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementNb {
    pub alpha: f64,
    pub classes: Vec<u32>,
    /// `-log θ_ci`, one row per class.
    weights: Vec<Vec<f64>>,
    vectorizer: TfIdf,
}

impl ComplementNb {
    /// `labels[i]` is the class of `docs[i]`. Classes are kept sorted.
    pub fn fit<S: AsRef<str>>(docs: &[S], labels: &[u32], alpha: f64, bigrams: bool) -> Self {
        assert_eq!(docs.len(), labels.len(), "one label per document");
        let vectorizer = TfIdf::fit(docs, bigrams);
        let mut classes: Vec<u32> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let nf = vectorizer.n_features();
        let mut per_class = vec![vec![0.0f64; nf]; classes.len()];
        for (doc, label) in docs.iter().zip(labels) {
            let ci = classes.binary_search(label).expect("label is a class");
            for (f, w) in vectorizer.transform(doc.as_ref()) {
                per_class[ci][f] += w;
            }
        }
        let total: Vec<f64> = (0..nf).map(|f| per_class.iter().map(|row| row[f]).sum()).collect();
        let weights = per_class
            .iter()
            .map(|row| {
                let comp: Vec<f64> = (0..nf).map(|f| total[f] + alpha - row[f]).collect();
                let denom: f64 = comp.iter().sum();
                comp.iter().map(|c| -(c / denom).ln()).collect()
            })
            .collect();
        ComplementNb { alpha, classes, weights, vectorizer }
    }

    /// Score per class, in `classes` order.
    pub fn scores(&self, text: &str) -> Vec<f64> {
        let x = self.vectorizer.transform(text);
        self.weights.iter().map(|w| x.iter().map(|(f, v)| v * w[*f]).sum()).collect()
    }

    /// Best class among `allowed` (all classes when `None`); ties go to the
    /// lower class number.
    pub fn predict_among(&self, text: &str, allowed: Option<&[u32]>) -> Option<u32> {
        let scores = self.scores(text);
        let mut best: Option<(u32, f64)> = None;
        for (c, s) in self.classes.iter().zip(scores) {
            if allowed.is_some_and(|a| !a.contains(c)) {
                continue;
            }
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((*c, s));
            }
        }
        best.map(|(c, _)| c)
    }

    pub fn predict(&self, text: &str) -> u32 {
        self.predict_among(text, None).expect("fitted model has at least one class")
    }
}
