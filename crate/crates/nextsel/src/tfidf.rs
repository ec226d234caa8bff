//! TF-IDF vectorization and cosine similarity over token sequences.
//!
//! Term frequency is the raw in-document count; inverse document frequency
//! is `ln(N / (1 + df)) + 1`, which stays positive for every df <= N.
//! Vectors are L2-normalized, so cosine similarity is a sparse dot product.

use std::collections::{BTreeMap, HashMap};

/// Sparse vector sorted by term index, L2-normalized at construction.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct TfidfModel {
    vocab: BTreeMap<String, usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfidfModel {
    /// Learns vocabulary and document frequencies from one token sequence
    /// per document.
    pub fn fit<'a, I>(docs: I) -> TfidfModel
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let mut n_docs = 0;
        let docs: Vec<&[String]> = docs.into_iter().collect();
        for doc in &docs {
            n_docs += 1;
            let mut seen: Vec<&str> = doc.iter().map(|t| t.as_str()).collect();
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let mut vocab = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            vocab.insert(term.to_string(), i);
            idf.push(((n_docs as f64) / (1.0 + count as f64)).ln() + 1.0);
        }
        TfidfModel { vocab, idf, n_docs }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    /// Maps tokens to a normalized TF-IDF vector. Out-of-vocabulary tokens
    /// are dropped; an all-OOV input yields the empty vector.
    pub fn vector(&self, tokens: &[String]) -> SparseVec {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for token in tokens {
            if let Some(&idx) = self.vocab.get(token) {
                *counts.entry(idx).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: SparseVec = counts
            .into_iter()
            .map(|(idx, tf)| (idx, tf * self.idf[idx]))
            .collect();
        entries.sort_unstable_by_key(|(idx, _)| *idx);
        let norm: f64 = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in entries.iter_mut() {
                *w /= norm;
            }
        }
        entries
    }
}

/// Dot product of two normalized sparse vectors.
pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut dot = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(|t| t.to_string()).collect()
    }

    #[test]
    fn identical_documents_have_cosine_one() {
        let docs = [toks("alpha beta gamma"), toks("delta epsilon")];
        let model = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        let a = model.vector(&toks("alpha beta gamma"));
        let b = model.vector(&toks("alpha beta gamma"));
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_vocabulary_scores_zero() {
        let docs = [toks("alpha beta"), toks("gamma delta")];
        let model = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        let a = model.vector(&toks("alpha beta"));
        let b = model.vector(&toks("gamma delta"));
        assert_eq!(cosine(&a, &b), 0.0);
    }

    #[test]
    fn idf_is_positive() {
        let docs = [toks("shared rare"), toks("shared"), toks("shared")];
        let model = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        for &w in &model.idf {
            assert!(w > 0.0);
        }
    }

    #[test]
    fn weights_are_non_negative_and_normalized() {
        let docs = [toks("a b c a"), toks("b c d"), toks("e f")];
        let model = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        let v = model.vector(&toks("a b e unseen"));
        assert!(v.iter().all(|(_, w)| *w >= 0.0));
        let norm: f64 = v.iter().map(|(_, w)| w * w).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_oov_input_is_empty_vector() {
        let docs = [toks("a b")];
        let model = TfidfModel::fit(docs.iter().map(|d| d.as_slice()));
        assert!(model.vector(&toks("x y z")).is_empty());
    }
}
