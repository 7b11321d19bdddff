//! Relevance backends and exhaustive ranking lists.
//!
//! Every query is scored against every document; lists are sorted by score
//! descending with ascending `doc_id` breaking ties.

pub mod bm25;
pub mod dense;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::SearchLog;
use crate::error::{Error, Result};

pub use bm25::{Bm25Index, Bm25Params};
pub use dense::{train_dual_encoder, DenseIndex, DualEncoder, DualEncoderConfig};

/// Scores a query against a fixed document table.
pub trait Relevance: Sync {
    fn doc_ids(&self) -> &[String];

    /// One score per entry of [`Relevance::doc_ids`].
    fn score_all(&self, query: &[String]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Bm25,
    #[default]
    Dense,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(Backend::Bm25),
            "dense" => Ok(Backend::Dense),
            other => Err(Error::InvalidArgument(format!("unknown backend `{other}`"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Bm25 => "bm25",
            Backend::Dense => "dense",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingList {
    pub query_id: String,
    /// Best first.
    pub doc_ids: Vec<String>,
    pub scores: Vec<f64>,
}

impl RankingList {
    /// Sorts `(doc_id, score)` pairs into a list.
    pub fn from_scored(query_id: impl Into<String>, mut scored: Vec<(String, f64)>) -> Self {
        scored.sort_by(|a, b| cmp_scored(&a.0, a.1, &b.0, b.1));
        let (doc_ids, scores) = scored.into_iter().unzip();
        RankingList {
            query_id: query_id.into(),
            doc_ids,
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// 1-based rank of a document.
    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id).map(|i| i + 1)
    }
}

/// Score descending, then doc id ascending.
pub fn cmp_scored(a_id: &str, a_score: f64, b_id: &str, b_score: f64) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// Full ranking list for each `(query_id, tokens)` query. Scoring runs in
/// parallel; the result is keyed by query id.
pub fn build_ranking_lists<R: Relevance + ?Sized>(
    backend: &R,
    queries: &[(String, Vec<String>)],
) -> Result<BTreeMap<String, RankingList>> {
    if backend.doc_ids().is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let lists: Vec<RankingList> = queries
        .par_iter()
        .map(|(qid, tokens)| {
            let scores = backend.score_all(tokens);
            let scored = backend.doc_ids().iter().cloned().zip(scores).collect();
            RankingList::from_scored(qid.clone(), scored)
        })
        .collect();
    Ok(lists.into_iter().map(|l| (l.query_id.clone(), l)).collect())
}

/// Documents of a tokenized log in `doc_id` order.
pub fn doc_table(log: &SearchLog) -> impl Iterator<Item = (&str, &[String])> {
    log.documents
        .values()
        .map(|d| (d.doc_id.as_str(), d.title_tokens.as_slice()))
}

/// Every turn with a first click, as `(query_id, tokens)`.
pub fn clicked_queries(log: &SearchLog) -> Vec<(String, Vec<String>)> {
    log.sessions
        .iter()
        .flat_map(|s| &s.turns)
        .filter(|t| t.first_click.is_some())
        .map(|t| (t.query_id.clone(), t.tokens.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    struct Fixed {
        ids: Vec<String>,
        scores: Vec<f64>,
    }

    impl Relevance for Fixed {
        fn doc_ids(&self) -> &[String] {
            &self.ids
        }
        fn score_all(&self, _: &[String]) -> Vec<f64> {
            self.scores.clone()
        }
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_query_contract_and_tiebreak() {
        let b = Fixed {
            ids: ids(&["c", "a", "b"]),
            scores: vec![0.5, 0.5, 0.9],
        };
        let lists = build_ranking_lists(&b, &[("q".into(), vec![])]).unwrap();
        let l = &lists["q"];
        assert_eq!(l.doc_ids, ["b", "a", "c"]);
        assert!(l.scores.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(l.rank_of("c"), Some(3));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let b = Fixed {
            ids: vec![],
            scores: vec![],
        };
        assert!(matches!(build_ranking_lists(&b, &[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn bm25_lists_match_brute_force_sort() {
        let mut rng = seeded(17);
        let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let docs: Vec<(String, Vec<String>)> = (0..100)
            .map(|i| {
                let n = rng.gen_range(1..6);
                let toks = (0..n).map(|_| words[rng.gen_range(0..30)].clone()).collect();
                (format!("d{i:03}"), toks)
            })
            .collect();
        let index = Bm25Index::build(
            docs.iter().map(|(id, t)| (id.as_str(), t.as_slice())),
            Bm25Params::default(),
        );
        let queries: Vec<(String, Vec<String>)> = (0..10)
            .map(|i| {
                let toks = (0..3).map(|_| words[rng.gen_range(0..30)].clone()).collect();
                (format!("q{i}"), toks)
            })
            .collect();
        let lists = build_ranking_lists(&index, &queries).unwrap();
        for (qid, q) in &queries {
            // score each doc independently, then selection-sort by the rule
            let mut rest: Vec<(String, f64)> = docs
                .iter()
                .map(|(id, _)| (id.clone(), index.score(q, id).unwrap()))
                .collect();
            let mut expect = Vec::new();
            while !rest.is_empty() {
                let mut best = 0;
                for i in 1..rest.len() {
                    let (bi, bs) = (&rest[best].0, rest[best].1);
                    let (ci, cs) = (&rest[i].0, rest[i].1);
                    if cs > bs || (cs == bs && ci < bi) {
                        best = i;
                    }
                }
                expect.push(rest.remove(best).0);
            }
            assert_eq!(lists[qid].doc_ids, expect);
            let mut sorted = lists[qid].doc_ids.clone();
            sorted.sort();
            let mut all: Vec<String> = docs.iter().map(|d| d.0.clone()).collect();
            all.sort();
            assert_eq!(sorted, all);
        }
    }

    #[test]
    fn backend_parses() {
        assert_eq!("bm25".parse::<Backend>().unwrap(), Backend::Bm25);
        assert_eq!(Backend::Dense.to_string(), "dense");
        assert!("faiss".parse::<Backend>().is_err());
    }
}
