//! Okapi BM25 over document titles.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::retrieval::Relevance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Inverted index: term -> postings of (document index, term frequency),
/// postings sorted by document index.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_ids: Vec<String>,
    doc_index: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_len: Vec<u32>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build<'a, I>(docs: I, params: Bm25Params) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a [String])>,
    {
        let mut doc_ids = Vec::new();
        let mut doc_index = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::new();
        for (idx, (id, tokens)) in docs.into_iter().enumerate() {
            doc_ids.push(id.to_string());
            doc_index.insert(id.to_string(), idx);
            doc_len.push(tokens.len() as u32);
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (t, f) in tf {
                postings.entry(t.to_string()).or_default().push((idx, f));
            }
        }
        // documents were visited in index order, so each postings list is sorted
        let total: u64 = doc_len.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if doc_len.is_empty() {
            0.0
        } else {
            total as f64 / doc_len.len() as f64
        };
        Bm25Index {
            params,
            doc_ids,
            doc_index,
            postings,
            doc_len,
            avgdl,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.n_docs() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, df: usize, tf: u32, dl: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        // avgdl is 0 only when every document is empty, in which case tf is 0
        let norm = if self.avgdl > 0.0 {
            f64::from(dl) / self.avgdl
        } else {
            1.0
        };
        self.idf(df) * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Score of one document. Repeated query terms contribute once per
    /// occurrence.
    pub fn score(&self, query: &[String], doc_id: &str) -> Result<f64> {
        let idx = *self
            .doc_index
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))?;
        let dl = self.doc_len[idx];
        let mut s = 0.0;
        for t in query {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            if let Ok(pos) = list.binary_search_by_key(&idx, |p| p.0) {
                s += self.term_weight(list.len(), list[pos].1, dl);
            }
        }
        Ok(s)
    }
}

impl Relevance for Bm25Index {
    fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    fn score_all(&self, query: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_docs()];
        for t in query {
            if let Some(list) = self.postings.get(t) {
                for &(idx, tf) in list {
                    scores[idx] += self.term_weight(list.len(), tf, self.doc_len[idx]);
                }
            }
        }
        scores
    }
}
