//! Parse a session log, derive search contexts and render one as a ranker
//! input sequence.
//!
//! ```bash
//! cargo run --example session_log
//! ```

use sessrank::corpus::{derive_contexts, SearchLog};
use sessrank::ranker::{assemble_sequence, DEFAULT_MAX_LEN};
use sessrank::textproc::Vocabulary;

const LOG: &str = r#"{"session_id":"s1","turns":[{"candidates":[{"clicked":true,"doc_id":"d1","relevance":null,"title":"Racine County History Museum"},{"clicked":false,"doc_id":"d2","relevance":null,"title":"Racine weather"}],"query_id":"s1q1","text":"racine county history"},{"candidates":[{"clicked":false,"doc_id":"d3","relevance":null,"title":"Burlington Coat Factory"},{"clicked":true,"doc_id":"d4","relevance":null,"title":"Burlington, Wisconsin city guide"},{"clicked":false,"doc_id":"d5","relevance":null,"title":"Burlington county jobs"}],"query_id":"s1q2","text":"burlington wisconsin"}]}
{"session_id":"s2","turns":[{"candidates":[{"clicked":false,"doc_id":"d4","relevance":null,"title":"Burlington, Wisconsin city guide"},{"clicked":true,"doc_id":"d5","relevance":null,"title":"Burlington county jobs"}],"query_id":"s2q1","text":"burlington county jobs"}]}"#;

fn main() -> anyhow::Result<()> {
    let mut log = SearchLog::from_reader(LOG.as_bytes())?;
    log.tokenize_all();
    println!("{} sessions, {} queries, {} documents", log.sessions.len(), log.n_turns(), log.documents.len());

    let all = derive_contexts(&log, false);
    let with_history = derive_contexts(&log, true);
    println!("contexts: {} ({} with history)\n", all.contexts.len(), with_history.contexts.len());

    let vocab = Vocabulary::build(&log, 1)?;
    for ctx in &with_history.contexts {
        println!("session {} position {}/{}", ctx.session_id, ctx.position, ctx.session_len);
        for h in &ctx.history {
            println!("  history: {:?} -> {}", h.query_tokens.join(" "), h.doc_id);
        }
        println!("  clicked {:?}, skipped {:?}", ctx.clicked, ctx.skipped);
        let doc = &log.document(ctx.primary_click())?.title_tokens;
        let seq = assemble_sequence(&vocab, &ctx.history, &ctx.current.tokens, doc, DEFAULT_MAX_LEN)?;
        println!("  sequence: {}", seq.render(&vocab));
    }
    print!("\ncanonical JSONL:\n{}", log.to_jsonl());
    Ok(())
}
