//! Negative windows around clicked documents and ambiguous-query mining in
//! each band.
//!
//! ```bash
//! cargo run --release --example ambiguous_mining
//! ```

use sessrank::corpus::derive_contexts;
use sessrank::mining::{mine_ambiguous, Band, WindowIndex};
use sessrank::retrieval::{build_ranking_lists, clicked_queries, doc_table, Bm25Index, Bm25Params};
use sessrank::synlog::{generate, SynConfig};

fn main() -> anyhow::Result<()> {
    let syn = generate(&SynConfig {
        n_sessions: 300,
        ..Default::default()
    })?;
    let log = &syn.log;
    let index = Bm25Index::build(doc_table(log), Bm25Params::default());
    let lists = build_ranking_lists(&index, &clicked_queries(log))?;
    let windows = WindowIndex::build(&lists, log, 50)?;
    println!("{} windows of nominal size {}", windows.len(), windows.w_size());

    let contexts = derive_contexts(log, true).contexts;
    let ctx = contexts
        .iter()
        .find(|c| Band::ALL.iter().all(|&b| !mine_ambiguous(c, &windows, 1, b, 0.2).unwrap().is_empty()))
        .unwrap_or(&contexts[0]);
    let text = |qid: &str| {
        log.sessions
            .iter()
            .flat_map(|s| &s.turns)
            .find(|t| t.query_id == qid)
            .map(|t| t.text.clone())
            .unwrap_or_default()
    };
    println!("\ncurrent query {} {:?}, clicked {}", ctx.query_id(), ctx.current.text, ctx.primary_click());
    for band in Band::ALL {
        println!("{band} band:");
        for m in mine_ambiguous(ctx, &windows, 4, band, 0.2)? {
            println!(
                "  {:<10} {:<28} pos {:>2}  ambiguity {:>2}  margin {:.3}",
                m.matched,
                format!("{:?}", text(&m.matched)),
                m.pos,
                m.ambiguity,
                m.margin
            );
        }
    }
    Ok(())
}
