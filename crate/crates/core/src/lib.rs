//! Session search toolkit.
//!
//! Loads click logs organised as sessions, derives per-query search
//! contexts, and adds negative training pairs built by altering only the
//! current query; the session history and the clicked document stay fixed.
//! A small context-aware ranker is trained on original and constructed pairs
//! with a pairwise hinge loss whose margin depends on how the negative was
//! made, and evaluated with click-based MAP, MRR and NDCG@k.
//!
//! Module map:
//!
//! - [`corpus`]: session log data model, JSONL ingestion, search contexts
//! - [`textproc`]: tokenizer, vocabulary, random term sampling
//! - [`retrieval`]: BM25, the dual-encoder retriever, full ranking lists
//! - [`mining`]: negative windows and ambiguous-query mining
//! - [`augment`]: the six query alteration strategies and training pairs
//! - [`ranker`]: sequence assembly, scoring model, hinge training, checkpoints
//! - [`evalkit`]: metrics, session breakdowns, TREC run/qrels files
//! - [`synlog`]: deterministic synthetic session logs
//! - [`cli`]: the `sessrank` command surface
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod augment;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod mining;
pub mod pipeline;
pub mod ranker;
pub mod retrieval;
pub mod rng;
pub mod synlog;
pub mod textproc;

pub use error::{Error, Result};
