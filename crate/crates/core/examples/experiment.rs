//! End-to-end experiment: augmented training against original pairs only,
//! plus one ablation, on a synthetic log.
//!
//! ```bash
//! cargo run --release --example experiment -- 2000 bm25
//! ```

use sessrank::augment::StrategyGroup;
use sessrank::pipeline::{run_experiment, split_log, PipelineConfig};
use sessrank::retrieval::Backend;
use sessrank::synlog::{generate, SynConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_sessions = args.next().map(|a| a.parse()).transpose()?.unwrap_or(1000);
    let backend: Backend = args.next().map(|a| a.parse()).transpose()?.unwrap_or(Backend::Dense);
    let seed = 0;

    let syn = generate(&SynConfig {
        n_sessions,
        seed,
        ..Default::default()
    })?;
    let (train, test) = split_log(&syn.log, 0.2, seed);
    let full = PipelineConfig {
        backend,
        ..Default::default()
    }
    .with_seed(seed);
    let runs = [
        ("augmented", full.clone()),
        (
            "without AQ",
            PipelineConfig {
                augment: full.augment.clone().without(StrategyGroup::AQ),
                ..full.clone()
            },
        ),
        (
            "original only",
            PipelineConfig {
                augment: full.augment.clone().original_only(),
                ..full.clone()
            },
        ),
    ];
    println!("{n_sessions} sessions, {backend} backend, {} epochs\n", full.train.epochs);
    println!("{:<14} {:>7} {:>8} {:>8} {:>8}", "run", "pairs", "MAP", "MRR", "NDCG@1");
    for (name, cfg) in runs {
        let e = run_experiment(&train, &test, &cfg)?;
        let r = &e.evaluation.report;
        println!(
            "{name:<14} {:>7} {:>8.4} {:>8.4} {:>8.4}",
            e.training.pairs.len(),
            r.map,
            r.mrr,
            r.ndcg[&1]
        );
    }
    Ok(())
}
