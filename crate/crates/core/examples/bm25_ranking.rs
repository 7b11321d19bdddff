//! Exhaustive BM25 ranking lists over a synthetic log's documents.
//!
//! ```bash
//! cargo run --release --example bm25_ranking
//! ```

use sessrank::retrieval::{build_ranking_lists, clicked_queries, doc_table, Bm25Index, Bm25Params};
use sessrank::synlog::{generate, SynConfig};

fn main() -> anyhow::Result<()> {
    let syn = generate(&SynConfig {
        n_sessions: 200,
        ..Default::default()
    })?;
    let log = &syn.log;
    let index = Bm25Index::build(doc_table(log), Bm25Params { k1: 1.2, b: 0.75 });
    println!("{} documents, avgdl {:.2}", index.n_docs(), index.avgdl());

    let queries = clicked_queries(log);
    let lists = build_ranking_lists(&index, &queries)?;
    let mut rank_sum = 0;
    for (qid, tokens) in &queries {
        let click = log
            .sessions
            .iter()
            .flat_map(|s| &s.turns)
            .find(|t| &t.query_id == qid)
            .and_then(|t| t.first_click.clone())
            .unwrap();
        rank_sum += lists[qid].rank_of(&click).unwrap();
        if rank_sum < 40 {
            let top: Vec<String> = lists[qid]
                .doc_ids
                .iter()
                .zip(&lists[qid].scores)
                .take(3)
                .map(|(d, s)| format!("{d} {s:.3}"))
                .collect();
            println!("{qid} {:?}: click {click}, top3 {}", tokens.join(" "), top.join(", "));
        }
    }
    println!(
        "\nmean rank of the clicked document: {:.2} of {}",
        rank_sum as f64 / queries.len() as f64,
        index.n_docs()
    );
    Ok(())
}
