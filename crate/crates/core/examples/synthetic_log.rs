//! Generate a synthetic session log, run its self-test and save it as JSONL.
//!
//! ```bash
//! cargo run --release --example synthetic_log -- /tmp/sessions.jsonl
//! ```

use std::collections::BTreeMap;

use sessrank::synlog::{generate, self_test, SynConfig};

fn main() -> anyhow::Result<()> {
    let cfg = SynConfig {
        n_sessions: 500,
        seed: 42,
        ..Default::default()
    };
    let syn = generate(&cfg)?;
    let log = &syn.log;
    let mut lengths: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &log.sessions {
        *lengths.entry(s.turns.len()).or_default() += 1;
    }
    println!(
        "{} sessions, {} queries, {} documents; sessions by length {lengths:?}",
        log.sessions.len(),
        log.n_turns(),
        log.documents.len()
    );

    let s = log.sessions.iter().find(|s| s.turns.len() >= 3).unwrap();
    println!("\nsession {}:", s.session_id);
    for t in &s.turns {
        let label = syn.turn_labels[&t.query_id];
        println!("  {:?} (topic {}, subtopic {})", t.text, label.topic, label.subtopic);
        for c in &t.candidates {
            let l = syn.doc_labels[&c.doc_id];
            let mark = if c.clicked { '*' } else { ' ' };
            println!("    {mark} {} {:<32} rel {:?} ({}/{})", c.doc_id, log.documents[&c.doc_id].title_text, c.relevance, l.topic, l.subtopic);
        }
    }

    let check = self_test(&syn)?;
    println!(
        "\nself-test: label oracle MRR {:.4}, query-only lexical MRR {:.4}",
        check.oracle_mrr, check.lexical_mrr
    );
    if let Some(path) = std::env::args().nth(1) {
        log.save(path.as_ref())?;
        println!("saved to {path}");
    }
    Ok(())
}
