//! Metrics, session-length and position breakdowns, and TREC export for a
//! simple lexical-overlap run on a synthetic log.
//!
//! ```bash
//! cargo run --release --example evaluation
//! ```

use std::collections::HashSet;

use sessrank::corpus::derive_contexts;
use sessrank::evalkit::{
    breakdown, breakdown_tsv, evaluate, qrels_from_log, trace_queries, write_qrels, write_run, BreakdownMode,
    EvalOptions, EvalRun, Gain, LogBase,
};
use sessrank::retrieval::RankingList;
use sessrank::synlog::{generate, SynConfig};

fn main() -> anyhow::Result<()> {
    let syn = generate(&SynConfig {
        n_sessions: 300,
        ..Default::default()
    })?;
    let log = &syn.log;

    // score each candidate by term overlap with the current query only
    let lists: Vec<RankingList> = derive_contexts(log, true)
        .contexts
        .iter()
        .map(|c| {
            let q: HashSet<&String> = c.current.tokens.iter().collect();
            let scored = c
                .current
                .candidates
                .iter()
                .map(|cand| {
                    let doc = &log.documents[&cand.doc_id].title_tokens;
                    (cand.doc_id.clone(), doc.iter().filter(|t| q.contains(t)).count() as f64)
                })
                .collect();
            RankingList::from_scored(c.query_id(), scored)
        })
        .collect();
    let run = EvalRun::from_lists(&lists, log)?;

    let opts = EvalOptions::default();
    print!("{}", evaluate(&run, &opts)?);
    let log2 = EvalOptions {
        base: LogBase::Two,
        ..opts.clone()
    };
    println!("NDCG@3 with log2 discount: {:.6}", evaluate(&run, &log2)?.ndcg[&3]);

    let trace = trace_queries(log);
    println!("\nby session length:\n{}", breakdown_tsv(&breakdown(&run, &trace, BreakdownMode::Length, &opts)?));
    println!("by position:\n{}", breakdown_tsv(&breakdown(&run, &trace, BreakdownMode::Position, &opts)?));

    let mut out = Vec::new();
    write_run(&lists[..1], "overlap", &mut out)?;
    println!("TREC run, first query:\n{}", String::from_utf8(out)?);
    let qrels = qrels_from_log(log, opts.gain == Gain::Graded);
    let mut out = Vec::new();
    write_qrels(&qrels[..3], &mut out)?;
    println!("qrels:\n{}", String::from_utf8(out)?);
    Ok(())
}
