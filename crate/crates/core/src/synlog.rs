//! Synthetic session logs where the right click needs both the history and
//! the current query.
//!
//! Every session sticks to one topic. Each turn picks a subtopic; subtopic
//! words are shared by all topics, so the query alone is ambiguous about the
//! topic, which is only revealed by earlier clicked titles. The clicked
//! title carries words of both the session topic and the turn subtopic. Half
//! of the distractors share only the topic, the other half only the subtopic.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Candidate, Document, QueryTurn, SearchLog, Session};
use crate::error::{Error, Result};
use crate::evalkit::{compute_mrr, EvalRun, QueryEval};
use crate::retrieval::RankingList;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct SynConfig {
    pub n_topics: usize,
    pub n_subtopics: usize,
    pub n_sessions: usize,
    /// Proportions of short (2 queries), medium (3-4) and long (5-7) sessions.
    pub length_mix: [f64; 3],
    /// Distinct words per topic and per subtopic.
    pub words_per_topic: usize,
    /// Title variants per (topic, subtopic) cell.
    pub doc_variants: usize,
    pub candidates: usize,
    /// Chance that a query also names a topic word.
    pub topic_in_query: f64,
    pub seed: u64,
}

impl Default for SynConfig {
    fn default() -> Self {
        SynConfig {
            n_topics: 8,
            n_subtopics: 8,
            n_sessions: 2000,
            length_mix: [0.665, 0.2724, 0.0626],
            words_per_topic: 6,
            doc_variants: 4,
            candidates: 5,
            topic_in_query: 0.2,
            seed: 0,
        }
    }
}

impl SynConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_topics < 2 || self.n_subtopics < 2 {
            return bad("need at least 2 topics and 2 subtopics");
        }
        if self.n_sessions == 0 || self.words_per_topic < 2 || self.doc_variants == 0 {
            return bad("session, word and variant counts must be positive");
        }
        if self.doc_variants > self.words_per_topic * (self.words_per_topic - 1) / 2 {
            return bad("doc_variants exceeds the distinct word pairs of a subtopic");
        }
        let same_topic = self.candidates / 2;
        let same_pair = (self.candidates - 1) / 2;
        if self.candidates < 1
            || same_topic > (self.n_subtopics - 1) * self.doc_variants
            || same_pair > self.n_topics - 1
        {
            return bad("candidates must be at least 1 and fit the distractor pools");
        }
        if self.length_mix.iter().any(|&p| p < 0.0) || (self.length_mix.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return bad("length_mix must be non-negative and sum to 1");
        }
        if !(0.0..=1.0).contains(&self.topic_in_query) {
            return bad("topic_in_query must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub topic: usize,
    pub subtopic: usize,
}

#[derive(Debug, Clone)]
pub struct SynLog {
    pub log: SearchLog,
    pub doc_labels: BTreeMap<String, Label>,
    pub turn_labels: BTreeMap<String, Label>,
}

/// Distinct pronounceable words, deterministic for a given count.
fn words(n: usize) -> Vec<String> {
    const SYL: [&str; 16] = [
        "ka", "lo", "mi", "ne", "ru", "so", "ta", "vi", "ze", "po", "du", "fe", "gar", "hil", "jun", "bex",
    ];
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    while out.len() < n {
        let (a, b, c) = (i % 16, (i / 16) % 16, i / 256);
        let mut w = format!("{}{}", SYL[a], SYL[b]);
        if c > 0 {
            w.push_str(SYL[(c - 1) % 16]);
            w.push_str(&(c / 16).to_string());
        }
        out.push(w);
        i += 1;
    }
    out
}

fn pick<'a, R: Rng>(pool: &'a [String], n: usize, rng: &mut R) -> Vec<&'a str> {
    pool.choose_multiple(rng, n.min(pool.len())).map(String::as_str).collect()
}

/// A draw from `0..n` other than `skip`.
fn other<R: Rng>(n: usize, skip: usize, rng: &mut R) -> usize {
    let x = rng.gen_range(0..n - 1);
    if x >= skip {
        x + 1
    } else {
        x
    }
}

pub fn generate(cfg: &SynConfig) -> Result<SynLog> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let w = cfg.words_per_topic;
    let all = words(w * (cfg.n_topics + cfg.n_subtopics));
    let topic_words: Vec<&[String]> = (0..cfg.n_topics).map(|t| &all[t * w..(t + 1) * w]).collect();
    let sub_base = cfg.n_topics * w;
    let sub_words: Vec<&[String]> = (0..cfg.n_subtopics)
        .map(|s| &all[sub_base + s * w..sub_base + (s + 1) * w])
        .collect();

    // each (subtopic, variant) owns a distinct word pair, shared by all topics
    let mut pairs: Vec<Vec<[&str; 2]>> = Vec::with_capacity(cfg.n_subtopics);
    for pool in &sub_words {
        let mut all_pairs: Vec<[&str; 2]> = (0..w)
            .flat_map(|i| (i + 1..w).map(move |j| (i, j)))
            .map(|(i, j)| [pool[i].as_str(), pool[j].as_str()])
            .collect();
        all_pairs.shuffle(&mut rng);
        all_pairs.truncate(cfg.doc_variants);
        pairs.push(all_pairs);
    }

    let mut documents = BTreeMap::new();
    let mut doc_labels = BTreeMap::new();
    let mut cells: Vec<String> = Vec::with_capacity(cfg.n_topics * cfg.n_subtopics * cfg.doc_variants);
    for t in 0..cfg.n_topics {
        for s in 0..cfg.n_subtopics {
            for pair in &pairs[s] {
                let mut title = pick(topic_words[t], 2, &mut rng);
                title.extend(pair);
                title.shuffle(&mut rng);
                let doc_id = format!("d{:05}", cells.len());
                documents.insert(
                    doc_id.clone(),
                    Document {
                        doc_id: doc_id.clone(),
                        title_text: title.join(" "),
                        title_tokens: Vec::new(),
                    },
                );
                doc_labels.insert(doc_id.clone(), Label { topic: t, subtopic: s });
                cells.push(doc_id);
            }
        }
    }
    let nv = cfg.doc_variants;
    let cell = |t: usize, s: usize, v: usize| &cells[(t * cfg.n_subtopics + s) * nv + v];

    let mut sessions = Vec::with_capacity(cfg.n_sessions);
    let mut turn_labels = BTreeMap::new();
    for i in 0..cfg.n_sessions {
        let u: f64 = rng.gen();
        let len = if u < cfg.length_mix[0] {
            2
        } else if u < cfg.length_mix[0] + cfg.length_mix[1] {
            rng.gen_range(3..=4)
        } else {
            rng.gen_range(5..=7)
        };
        let topic = rng.gen_range(0..cfg.n_topics);
        let session_id = format!("s{i:05}");
        // subtopics do not repeat within a session while any are left
        let mut order: Vec<usize> = (0..cfg.n_subtopics).collect();
        order.shuffle(&mut rng);
        let mut turns = Vec::with_capacity(len);
        let mut prev = 0;
        for j in 0..len {
            let s = if j < order.len() {
                order[j]
            } else {
                other(cfg.n_subtopics, prev, &mut rng)
            };
            prev = s;
            let v = rng.gen_range(0..nv);
            let mut q: Vec<&str> = pairs[s][v].to_vec();
            if rng.gen_bool(cfg.topic_in_query) {
                q.push(topic_words[topic].choose(&mut rng).unwrap());
            }
            q.shuffle(&mut rng);
            let clicked = cell(topic, s, v).clone();
            let mut cands = vec![(clicked, true)];
            let mut used: HashSet<String> = HashSet::new();
            for k in 1..cfg.candidates {
                // alternate: same topic other subtopic, then other topic same word pair
                let d = loop {
                    let d = if k % 2 == 1 {
                        cell(topic, other(cfg.n_subtopics, s, &mut rng), rng.gen_range(0..nv))
                    } else {
                        cell(other(cfg.n_topics, topic, &mut rng), s, v)
                    };
                    if used.insert(d.clone()) {
                        break d.clone();
                    }
                };
                cands.push((d, false));
            }
            cands.shuffle(&mut rng);
            let query_id = format!("{session_id}q{j}");
            turn_labels.insert(query_id.clone(), Label { topic, subtopic: s });
            let first_click = Some(cands.iter().find(|c| c.1).unwrap().0.clone());
            let candidates = cands
                .into_iter()
                .map(|(doc_id, clicked)| {
                    let l = doc_labels[&doc_id];
                    let relevance = Some((l.topic == topic) as u8 + (l.subtopic == s) as u8);
                    Candidate {
                        doc_id,
                        clicked,
                        relevance,
                    }
                })
                .collect();
            turns.push(QueryTurn {
                query_id,
                text: q.join(" "),
                tokens: Vec::new(),
                candidates,
                first_click,
            });
        }
        sessions.push(Session { session_id, turns });
    }
    // only documents that some impression shows survive a round trip
    let shown: HashSet<&str> = sessions
        .iter()
        .flat_map(|s| &s.turns)
        .flat_map(|t| &t.candidates)
        .map(|c| c.doc_id.as_str())
        .collect();
    documents.retain(|id, _| shown.contains(id.as_str()));
    doc_labels.retain(|id, _| shown.contains(id.as_str()));
    let mut log = SearchLog { sessions, documents };
    log.tokenize_all();
    Ok(SynLog {
        log,
        doc_labels,
        turn_labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfTest {
    pub oracle_mrr: f64,
    pub lexical_mrr: f64,
}

fn mrr_with(syn: &SynLog, score: impl Fn(&QueryTurn, &str) -> f64) -> Result<f64> {
    let queries = syn
        .log
        .sessions
        .iter()
        .flat_map(|s| &s.turns)
        .map(|t| {
            let scored = t.candidates.iter().map(|c| (c.doc_id.clone(), score(t, &c.doc_id))).collect();
            let list = RankingList::from_scored(t.query_id.clone(), scored);
            let clicked: Vec<&str> = t.clicked().collect();
            QueryEval::from_ranking(&list, &clicked, None)
        })
        .collect();
    compute_mrr(&EvalRun::new(queries))
}

/// Label oracle vs. current-query word overlap. Fails unless the oracle is
/// perfect and the overlap scorer strictly worse.
pub fn self_test(syn: &SynLog) -> Result<SelfTest> {
    let oracle_mrr = mrr_with(syn, |t, d| {
        let want = syn.turn_labels[&t.query_id];
        let got = syn.doc_labels[d];
        ((want.topic == got.topic) as u8 + (want.subtopic == got.subtopic) as u8) as f64
    })?;
    let lexical_mrr = mrr_with(syn, |t, d| {
        let title = &syn.log.documents[d].title_tokens;
        t.tokens.iter().filter(|w| title.contains(w)).count() as f64
    })?;
    let r = SelfTest { oracle_mrr, lexical_mrr };
    if oracle_mrr != 1.0 || lexical_mrr >= oracle_mrr {
        return Err(Error::InvalidArgument(format!("generator self-test failed: {r:?}")));
    }
    Ok(r)
}
