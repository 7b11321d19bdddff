//! Train the session ranker on augmented pairs, check the hinge on held-out
//! candidates and round-trip the checkpoint.
//!
//! ```bash
//! cargo run --release --example ranker_training
//! ```

use std::collections::BTreeMap;

use sessrank::augment::AugmentConfig;
use sessrank::corpus::derive_contexts;
use sessrank::pipeline::{self, split_log, PipelineConfig};
use sessrank::ranker::{encode_pairs, rank_candidates, total_loss, RankerModel, TrainConfig};
use sessrank::synlog::{generate, SynConfig};
use sessrank::textproc::Vocabulary;

fn main() -> anyhow::Result<()> {
    let syn = generate(&SynConfig {
        n_sessions: 600,
        seed: 1,
        ..Default::default()
    })?;
    let (train_log, test_log) = split_log(&syn.log, 0.2, 1);
    let vocab = Vocabulary::build(&train_log, 1)?;
    let augment = AugmentConfig {
        n_ambiguous: 0,
        ..AugmentConfig::aol()
    };
    let set = pipeline::augment(&train_log, &vocab, &BTreeMap::new(), &augment)?;
    let cfg = PipelineConfig {
        train: TrainConfig {
            epochs: 10,
            ..Default::default()
        },
        ..Default::default()
    };
    let encoded = encode_pairs(&set.pairs, &vocab, cfg.max_len)?;
    let init = RankerModel::init(vocab.len(), cfg.dim, cfg.hidden, cfg.seed)?;
    println!("{} pairs, {} parameters", encoded.len(), init.param_count());
    println!("loss before: {:.2}", total_loss(&init, &encoded));
    let model = sessrank::ranker::train(init, &encoded, &cfg.train)?;
    println!("loss after {} epochs: {:.2}", cfg.train.epochs, total_loss(&model, &encoded));

    let ctx = &derive_contexts(&test_log, true).contexts[0];
    let list = rank_candidates(&model, &vocab, &test_log, ctx, cfg.max_len)?;
    println!("\nheld-out {} {:?}, clicked {:?}", ctx.query_id(), ctx.current.text, ctx.clicked);
    for (d, s) in list.doc_ids.iter().zip(&list.scores) {
        println!("  {d} {s:+.3}  {}", test_log.document(d)?.title_text);
    }

    let path = std::env::temp_dir().join("sessrank_example.ckpt");
    model.save(&path)?;
    let back = RankerModel::load(&path)?;
    let same = (0..model.param_count()).all(|i| back.param(i) == model.param(i) as f32 as f64);
    println!("\ncheckpoint {} bytes, f32 round trip exact: {same}", std::fs::metadata(&path)?.len());
    std::fs::remove_file(path)?;
    Ok(())
}
