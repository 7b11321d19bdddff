use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sessrank::augment::{build_training_set, AugmentConfig, AugmentSources, PairKind, QueryPool, Strategy as Aug};
use sessrank::corpus::{derive_contexts, SearchLog};
use sessrank::evalkit::{compute_map, compute_mrr, compute_ndcg, EvalRun, Gain, LogBase, QueryEval};
use sessrank::mining::{ambiguous_margin, mine_all, Band, WindowIndex};
use sessrank::ranker::{
    assemble_sequence, hinge_loss, query_loss, train, EncodedPair, RankerModel, TrainConfig, DEFAULT_HIDDEN,
};
use sessrank::retrieval::dense::DualEncoder;
use sessrank::retrieval::{build_ranking_lists, doc_table, Bm25Index, Bm25Params, Relevance};
use sessrank::textproc::{tokenize, Vocabulary};

const WORDS: [&str; 12] = [
    "river", "stone", "maple", "harbor", "lantern", "copper", "meadow", "signal", "orchard", "glacier", "velvet",
    "summit",
];

fn title(doc: usize) -> String {
    format!("{} {}", WORDS[doc % 12], WORDS[(doc * 5 + 3) % 12])
}

/// Turn layout: (query word indices, (doc, clicked) candidates).
type Turn = (Vec<usize>, Vec<(usize, bool)>);

fn turn() -> impl Strategy<Value = Turn> {
    (
        prop::collection::vec(0..12usize, 1..4),
        prop::sample::subsequence((0..15usize).collect::<Vec<_>>(), 1..6),
        prop::collection::vec(any::<bool>(), 5),
    )
        .prop_map(|(q, docs, clicks)| (q, docs.into_iter().zip(clicks).collect()))
}

fn log_layout() -> impl Strategy<Value = Vec<Vec<Turn>>> {
    prop::collection::vec(prop::collection::vec(turn(), 1..5), 1..7)
}

fn build_log(layout: &[Vec<Turn>]) -> SearchLog {
    let lines: Vec<String> = layout
        .iter()
        .enumerate()
        .map(|(s, turns)| {
            let turns: Vec<String> = turns
                .iter()
                .enumerate()
                .map(|(t, (q, cands))| {
                    let text: Vec<&str> = q.iter().map(|&w| WORDS[w]).collect();
                    let cands: Vec<String> = cands
                        .iter()
                        .map(|&(d, c)| {
                            format!(r#"{{"clicked":{c},"doc_id":"d{d:02}","relevance":null,"title":"{}"}}"#, title(d))
                        })
                        .collect();
                    format!(
                        r#"{{"candidates":[{}],"query_id":"s{s}q{t}","text":"{}"}}"#,
                        cands.join(","),
                        text.join(" ")
                    )
                })
                .collect();
            format!(r#"{{"session_id":"s{s}","turns":[{}]}}"#, turns.join(","))
        })
        .collect();
    let mut log = SearchLog::from_reader(lines.join("\n").as_bytes()).unwrap();
    log.tokenize_all();
    log
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn history_docs_are_first_clicks(layout in log_layout()) {
        let log = build_log(&layout);
        let first: BTreeMap<&str, Option<&str>> = log
            .sessions
            .iter()
            .flat_map(|s| &s.turns)
            .map(|t| (t.query_id.as_str(), t.first_click.as_deref()))
            .collect();
        for ctx in derive_contexts(&log, false).contexts {
            for h in &ctx.history {
                prop_assert_eq!(first[h.query_id.as_str()], Some(h.doc_id.as_str()));
            }
        }
    }

    #[test]
    fn history_contexts_are_a_subset(layout in log_layout()) {
        let log = build_log(&layout);
        let all = derive_contexts(&log, false).contexts;
        for c in derive_contexts(&log, true).contexts {
            prop_assert!(!c.history.is_empty());
            prop_assert!(all.contains(&c));
        }
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical(layout in log_layout()) {
        let text = build_log(&layout).to_jsonl();
        let again = SearchLog::from_reader(text.as_bytes()).unwrap().to_jsonl();
        prop_assert_eq!(text, again);
    }

    #[test]
    fn tokenize_is_idempotent(s in "\\PC{0,40}") {
        let once = tokenize(&s);
        prop_assert_eq!(tokenize(&once.join(" ")), once);
    }

    #[test]
    fn bm25_is_additive_over_query_terms(
        layout in log_layout(),
        a in prop::collection::vec(0..12usize, 0..4),
        b in prop::collection::vec(0..12usize, 0..4),
    ) {
        let log = build_log(&layout);
        let idx = Bm25Index::build(doc_table(&log), Bm25Params::default());
        let words = |v: &[usize]| v.iter().map(|&w| WORDS[w].to_string()).collect::<Vec<_>>();
        let (qa, qb) = (words(&a), words(&b));
        let both: Vec<String> = qa.iter().chain(&qb).cloned().collect();
        for d in log.documents.keys() {
            let sum = idx.score(&qa, d).unwrap() + idx.score(&qb, d).unwrap();
            prop_assert!((idx.score(&both, d).unwrap() - sum).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_score_is_symmetric(
        seed in any::<u64>(),
        q in prop::collection::vec(0..20u32, 1..6),
        d in prop::collection::vec(0..20u32, 1..6),
    ) {
        let enc = DualEncoder::init(20, 8, seed).unwrap();
        prop_assert_eq!(enc.score(&q, &d), enc.score(&d, &q));
    }

    #[test]
    fn ranking_lists_are_permutations(layout in log_layout()) {
        let log = build_log(&layout);
        let idx = Bm25Index::build(doc_table(&log), Bm25Params::default());
        let queries: Vec<(String, Vec<String>)> = log
            .sessions
            .iter()
            .flat_map(|s| &s.turns)
            .map(|t| (t.query_id.clone(), t.tokens.clone()))
            .collect();
        let mut want: Vec<&String> = idx.doc_ids().iter().collect();
        want.sort();
        for list in build_ranking_lists(&idx, &queries).unwrap().values() {
            let mut got: Vec<&String> = list.doc_ids.iter().collect();
            got.sort();
            prop_assert_eq!(&got, &want);
            prop_assert!(list.scores.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn bands_partition_qualifying_windows(layout in log_layout(), w_half in 1..5usize) {
        let log = build_log(&layout);
        let w = 2 * w_half;
        let idx = Bm25Index::build(doc_table(&log), Bm25Params::default());
        let queries: Vec<(String, Vec<String>)> = sessrank::retrieval::clicked_queries(&log);
        let lists = build_ranking_lists(&idx, &queries).unwrap();
        let windows = WindowIndex::build(&lists, &log, w).unwrap();
        let contexts = derive_contexts(&log, false).contexts;
        let mut seen = HashSet::new();
        let mut total = 0;
        for band in Band::ALL {
            for m in mine_all(&contexts, &windows, usize::MAX, band, 0.2).unwrap().into_values().flatten() {
                prop_assert!(seen.insert((m.source.clone(), m.matched.clone())), "match in two bands");
                prop_assert!(m.pos >= 1 && m.pos <= w);
                prop_assert!(m.margin > 0.0 && m.margin <= 0.4);
                total += 1;
            }
        }
        // every window of another session, other query and other text that
        // contains the first click
        let owner_info: BTreeMap<&str, (&str, &[String])> = log
            .sessions
            .iter()
            .flat_map(|s| s.turns.iter().map(move |t| (t.query_id.as_str(), (s.session_id.as_str(), t.tokens.as_slice()))))
            .collect();
        let mut expected = 0;
        for c in &contexts {
            for win in windows.windows() {
                let (sid, toks) = owner_info[win.owner.as_str()];
                if win.owner != c.current.query_id
                    && sid != c.session_id
                    && toks != c.current.tokens.as_slice()
                    && win.member(c.primary_click()).is_some()
                {
                    expected += 1;
                }
            }
        }
        prop_assert_eq!(total, expected);
    }

    #[test]
    fn ambiguous_margin_is_increasing(w_half in 1..40usize, mean in 0.01..0.5f64) {
        let w = 2 * w_half;
        let v: Vec<f64> = (1..=w).map(|p| ambiguous_margin(p, w, mean).unwrap()).collect();
        prop_assert!(v.windows(2).all(|p| p[0] < p[1]));
        prop_assert!((v[w - 1] - 2.0 * mean).abs() < 1e-12);
    }

    #[test]
    fn augmentation_invariants(layout in log_layout(), seed in any::<u64>()) {
        let log = build_log(&layout);
        let vocab = Vocabulary::build(&log, 1).unwrap();
        let pool = QueryPool::new(&log);
        let idx = Bm25Index::build(doc_table(&log), Bm25Params::default());
        let lists = build_ranking_lists(&idx, &sessrank::retrieval::clicked_queries(&log)).unwrap();
        let windows = WindowIndex::build(&lists, &log, 4).unwrap();
        let contexts = derive_contexts(&log, false).contexts;
        let mined = mine_all(&contexts, &windows, 4, Band::Medium, 0.2).unwrap();
        let src = AugmentSources { log: &log, vocab: &vocab, pool: &pool, mined: &mined };
        let cfg = AugmentConfig { seed, ..AugmentConfig::aol() };
        let set = build_training_set(&contexts, &cfg, &src).unwrap();
        let no_history: HashSet<&str> = contexts
            .iter()
            .filter(|c| c.history.is_empty())
            .map(|c| c.current.query_id.as_str())
            .collect();
        let mut hard_max: f64 = 0.0;
        let mut medium = Vec::new();
        let mut easy = Vec::new();
        for p in set.pairs.iter().filter(|p| p.kind == PairKind::Constructed) {
            prop_assert!(!no_history.contains(p.query_id.as_str()));
            prop_assert_eq!(&p.positive.doc_id, &p.negative.doc_id);
            prop_assert_eq!(&p.positive.doc, &p.negative.doc);
            let (q, n) = (&p.positive.query, &p.negative.query);
            match p.strategy.unwrap() {
                Aug::Mask | Aug::Replace => {
                    prop_assert_eq!(q.len(), n.len());
                    prop_assert_eq!(q.iter().zip(n).filter(|(a, b)| a != b).count(), 1);
                }
                Aug::Add => {
                    prop_assert_eq!(n.len(), q.len() + 1);
                    let gap = (0..n.len()).find(|&i| i == q.len() || q[i] != n[i]).unwrap();
                    prop_assert_eq!(&n[..gap], &q[..gap]);
                    prop_assert_eq!(&n[gap + 1..], &q[gap..]);
                }
                _ => {}
            }
            match p.strategy.unwrap() {
                Aug::Ambiguous => hard_max = hard_max.max(p.margin),
                Aug::Random => easy.push(p.margin),
                _ => medium.push(p.margin),
            }
        }
        for &m in &medium {
            prop_assert!(hard_max < m);
            for &e in &easy {
                prop_assert!(m < e);
            }
        }
        // history shared by pointer with the original pairs of the context
        for p in &set.pairs {
            let ctx = contexts.iter().find(|c| c.current.query_id == p.query_id).unwrap();
            prop_assert_eq!(&p.history[..], &ctx.history[..]);
        }
    }

    #[test]
    fn hinge_is_nonnegative_and_zero_iff_separated(pos in -5.0..5.0f64, neg in -5.0..5.0f64, m in 0.01..2.0f64) {
        let h = hinge_loss(pos, neg, m);
        prop_assert!(h >= 0.0);
        prop_assert_eq!(h == 0.0, pos - neg >= m);
    }

    #[test]
    fn query_loss_ignores_pair_order(seed in any::<u64>(), n in 1..12usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = RankerModel::init(30, 6, 4, seed).unwrap();
        let seq = |rng: &mut ChaCha8Rng| {
            let ids: Vec<u32> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(0..30)).collect();
            sessrank::ranker::SequenceInput { ids, history_pairs: 0, query_start: 0, doc_start: 0 }
        };
        let mut pairs: Vec<EncodedPair> = (0..n)
            .map(|_| EncodedPair {
                group: 0,
                margin: rng.gen_range(0.1..1.0),
                term_level: false,
                pos: seq(&mut rng),
                neg: seq(&mut rng),
            })
            .collect();
        let before = query_loss(&model, &pairs);
        pairs.shuffle(&mut rng);
        let after = query_loss(&model, &pairs);
        prop_assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
    }

    #[test]
    fn metrics_are_bounded_and_perfect_on_top_clicks(
        queries in prop::collection::vec((1..10usize, prop::collection::btree_set(1..10usize, 1..4)), 1..10),
    ) {
        let run = EvalRun::new(
            queries
                .iter()
                .map(|(extra, clicks)| {
                    let len = clicks.iter().max().unwrap() + extra;
                    QueryEval::new("q", len, clicks.iter().copied().collect()).unwrap()
                })
                .collect(),
        );
        let top = EvalRun::new(
            queries
                .iter()
                .map(|(extra, clicks)| QueryEval::new("q", clicks.len() + extra, (1..=clicks.len()).collect()).unwrap())
                .collect(),
        );
        for k in [1, 3, 5, 10] {
            let v = compute_ndcg(&run, k, Gain::BinaryClick, LogBase::Natural).unwrap().value;
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            let t = compute_ndcg(&top, k, Gain::BinaryClick, LogBase::Natural).unwrap().value;
            prop_assert!((t - 1.0).abs() < 1e-12);
        }
        for f in [compute_map, compute_mrr] {
            prop_assert!((0.0..=1.0).contains(&f(&run).unwrap()));
            prop_assert!((f(&top).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_a_click_up_never_hurts(
        clicks in prop::collection::btree_set(2..12usize, 1..4),
        pick in any::<prop::sample::Index>(),
    ) {
        let clicks: Vec<usize> = clicks.into_iter().collect();
        let i = pick.index(clicks.len());
        let p = clicks[i];
        let mut moved = clicks.clone();
        moved[i] = p - 1;
        moved.sort();
        moved.dedup();
        prop_assume!(moved.len() == clicks.len());
        let one = |c: Vec<usize>| EvalRun::new(vec![QueryEval::new("q", 12, c).unwrap()]);
        let (a, b) = (one(clicks.clone()), one(moved));
        prop_assert!(compute_map(&b).unwrap() >= compute_map(&a).unwrap() - 1e-12);
        prop_assert!(compute_mrr(&b).unwrap() >= compute_mrr(&a).unwrap() - 1e-12);
        for k in [1, 3, 5, 10] {
            let na = compute_ndcg(&a, k, Gain::BinaryClick, LogBase::Natural).unwrap().value;
            let nb = compute_ndcg(&b, k, Gain::BinaryClick, LogBase::Natural).unwrap().value;
            prop_assert!(nb >= na - 1e-12);
        }
    }
}

/// Four intents with disjoint vocabularies; a doc of the query's own intent
/// must beat a doc of any other intent. 2400 pairs give 750 optimizer steps
/// under the default batch size and epochs.
#[test]
fn separable_set_ends_with_inactive_hinges() {
    let intents: Vec<Vec<String>> = (0..4)
        .map(|i| (0..6).map(|j| format!("w{i}x{j}")).collect())
        .collect();
    let texts: Vec<&[String]> = intents.iter().map(Vec::as_slice).collect();
    let vocab = Vocabulary::from_texts(texts, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(95);
    let pick = |i: usize, n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        intents[i].choose_multiple(rng, n).cloned().collect()
    };
    let pairs: Vec<EncodedPair> = (0..2400)
        .map(|n| {
            let i = n % 4;
            let j = (i + 1 + rng.gen_range(0..3)) % 4;
            let q = pick(i, 2, &mut rng);
            let pos_doc = pick(i, 3, &mut rng);
            let neg_doc = pick(j, 3, &mut rng);
            EncodedPair {
                group: n / 4,
                margin: 1.0,
                term_level: false,
                pos: assemble_sequence(&vocab, &[], &q, &pos_doc, 64).unwrap(),
                neg: assemble_sequence(&vocab, &[], &q, &neg_doc, 64).unwrap(),
            }
        })
        .collect();
    let model = RankerModel::init(vocab.len(), 64, DEFAULT_HIDDEN, 1).unwrap();
    let trained = train(model, &pairs, &TrainConfig::default()).unwrap();
    let inactive = pairs
        .iter()
        .filter(|p| hinge_loss(trained.score(&p.pos), trained.score(&p.neg), p.margin) == 0.0)
        .count();
    let frac = inactive as f64 / pairs.len() as f64;
    assert!(frac >= 0.95, "inactive fraction {frac}");
}

#[test]
fn training_is_bit_reproducible() {
    let vocab = Vocabulary::from_texts([&["a".to_string(), "b".to_string(), "c".to_string()][..]], 1).unwrap();
    let seq = |q: &str, d: &str| assemble_sequence(&vocab, &[], &[q.to_string()], &[d.to_string()], 16).unwrap();
    let pairs: Vec<EncodedPair> = (0..30)
        .map(|i| EncodedPair {
            group: i / 3,
            margin: 1.0,
            term_level: i % 5 == 0,
            pos: seq("a", "b"),
            neg: seq("a", "c"),
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 4,
        seed: 9,
        curriculum: true,
        ..Default::default()
    };
    let m = RankerModel::init(vocab.len(), 8, 4, 2).unwrap();
    let a = train(m.clone(), &pairs, &cfg).unwrap();
    let b = train(m, &pairs, &cfg).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_checkpoint(&mut ca).unwrap();
    b.write_checkpoint(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a, b);
}
