//! Train the shared-table dual encoder with in-batch negatives on click
//! pairs and compare its ranking lists against BM25.
//!
//! ```bash
//! cargo run --release --example dense_retrieval
//! ```

use sessrank::retrieval::dense::click_pairs;
use sessrank::retrieval::{
    build_ranking_lists, clicked_queries, doc_table, train_dual_encoder, Bm25Index, Bm25Params, DenseIndex,
    DualEncoderConfig, RankingList,
};
use sessrank::synlog::{generate, SynConfig};
use sessrank::textproc::Vocabulary;
use std::collections::BTreeMap;

fn mean_click_rank(lists: &BTreeMap<String, RankingList>, clicks: &BTreeMap<String, String>) -> f64 {
    let total: usize = clicks.iter().map(|(q, d)| lists[q].rank_of(d).unwrap()).sum();
    total as f64 / clicks.len() as f64
}

fn main() -> anyhow::Result<()> {
    let syn = generate(&SynConfig {
        n_sessions: 400,
        ..Default::default()
    })?;
    let log = &syn.log;
    let vocab = Vocabulary::build(log, 1)?;
    let pairs = click_pairs(log, &vocab);

    let base = DualEncoderConfig::default();
    let untrained = train_dual_encoder(&pairs, vocab.len(), &DualEncoderConfig { epochs: 0, ..base.clone() })?;
    println!("in-batch loss on the first 32 pairs, untrained: {:.4}", untrained.batch_loss(&pairs[..32]));
    // the default step size barely moves the table away from its initialization
    let configs = [("default lr", base.clone()), ("lr 5", DualEncoderConfig { lr: 5.0, ..base })];
    let mut encoders = Vec::new();
    for (name, config) in &configs {
        let encoder = train_dual_encoder(&pairs, vocab.len(), config)?;
        println!("{name} ({}), {} epochs: {:.4}", config.lr, config.epochs, encoder.batch_loss(&pairs[..32]));
        encoders.push(encoder);
    }

    let clicks: BTreeMap<String, String> = log
        .sessions
        .iter()
        .flat_map(|s| &s.turns)
        .filter_map(|t| Some((t.query_id.clone(), t.first_click.clone()?)))
        .collect();
    let queries = clicked_queries(log);
    println!("\nmean rank of the clicked document among {} docs:", log.documents.len());
    for ((name, _), encoder) in configs.iter().zip(&encoders) {
        let dense = build_ranking_lists(&DenseIndex::build(encoder, &vocab, doc_table(log)), &queries)?;
        println!("  dense, {name:<10} {:.2}", mean_click_rank(&dense, &clicks));
    }
    let bm25 = build_ranking_lists(&Bm25Index::build(doc_table(log), Bm25Params::default()), &queries)?;
    println!("  bm25               {:.2}", mean_click_rank(&bm25, &clicks));
    Ok(())
}
