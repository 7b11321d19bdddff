//! The six query-oriented strategies on one search context, then a full
//! margin-tagged training set with per-strategy counts.
//!
//! ```bash
//! cargo run --release --example augmentation
//! ```

use sessrank::augment::{
    historical_queries, mask_term, replace_term, add_term, sample_random_queries, AugmentConfig, QueryPool,
    StrategyGroup,
};
use sessrank::corpus::derive_contexts;
use sessrank::pipeline;
use sessrank::retrieval::{Backend, DualEncoderConfig};
use sessrank::rng::derived;
use sessrank::synlog::{generate, SynConfig};
use sessrank::textproc::Vocabulary;

fn main() -> anyhow::Result<()> {
    let syn = generate(&SynConfig {
        n_sessions: 300,
        ..Default::default()
    })?;
    let log = &syn.log;
    let vocab = Vocabulary::build(log, 1)?;
    let cfg = AugmentConfig::aol();
    let ctx = &derive_contexts(log, true).contexts[0];
    let q = &ctx.current.tokens;
    println!("q_c = {:?}, history of {}", q.join(" "), ctx.history.len());

    let mut rng = derived(cfg.seed, ctx.query_id());
    let pool = QueryPool::new(log);
    let mut shown = vec![
        mask_term(q, &mut rng, &cfg)?,
        replace_term(q, &vocab, &mut rng, &cfg)?,
        add_term(q, &vocab, &mut rng, &cfg)?,
    ];
    shown.extend(sample_random_queries(&pool, cfg.n_random, &ctx.session_id, &mut rng, &cfg)?);
    shown.extend(historical_queries(ctx, &cfg));
    for a in &shown {
        println!("  {:<10} {:<6?} m={:.2}  {:?}", a.strategy.name(), a.difficulty, a.margin, a.tokens.join(" "));
    }

    let lists = pipeline::ranking_lists(log, &vocab, Backend::Bm25, &DualEncoderConfig::default())?;
    let mined = pipeline::mine(log, &lists, &Default::default())?;
    for (name, c) in [
        ("full", cfg.clone()),
        ("without AQ", cfg.clone().without(StrategyGroup::AQ)),
        ("original only", cfg.clone().original_only()),
    ] {
        let set = pipeline::augment(log, &vocab, &mined, &c)?;
        let s = &set.stats;
        println!(
            "\n{name}: {} pairs ({} original), {} contexts without history",
            set.pairs.len(),
            s.original_pairs,
            s.contexts_without_history
        );
        for (strategy, n) in &s.constructed_pairs {
            println!("  {:<10} {n}", strategy.name());
        }
        for (strategy, n) in &s.shortfall {
            println!("  short of {:<10} {n}", strategy.name());
        }
    }
    Ok(())
}
