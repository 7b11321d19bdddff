//! Tokenization, vocabulary construction and uniform term sampling.
//!
//! ```bash
//! cargo run --example vocabulary
//! ```

use std::collections::BTreeMap;

use sessrank::rng::seeded;
use sessrank::textproc::{tokenize, Vocabulary};

fn main() -> anyhow::Result<()> {
    for text in ["Burlington, Wisconsin!", "  racine   COUNTY history ", "[empty_q]", "it's 2 p.m."] {
        println!("{text:?} -> {:?}", tokenize(text));
    }

    let texts: Vec<Vec<String>> = ["racine county history", "burlington wisconsin", "burlington county jobs"]
        .iter()
        .map(|t| tokenize(t))
        .collect();
    let vocab = Vocabulary::from_texts(texts.iter().map(Vec::as_slice), 1)?;
    println!("\n{} ids, {} terms", vocab.len(), vocab.n_terms());
    for t in vocab.terms() {
        println!("  {:>2} {t:<12} freq {}", vocab.id(t).unwrap(), vocab.frequency(t));
    }
    let q = tokenize("burlington zoo");
    println!("encode {q:?} -> {:?}  (unknown terms map to [UNK])", vocab.encode(&q));

    let mut rng = seeded(7);
    let mut hist: BTreeMap<&str, usize> = BTreeMap::new();
    for _ in 0..6000 {
        *hist.entry(vocab.sample_term(&mut rng, Some("county"))?).or_default() += 1;
    }
    println!("\n6000 draws excluding \"county\": {hist:?}");
    Ok(())
}
