//! Session log data model, JSONL ingestion and search-context derivation.
//!
//! One JSON object per line:
//!
//! ```text
//! {"session_id":"s1","turns":[{"candidates":[{"clicked":true,"doc_id":"d1","relevance":null,"title":"..."}],"query_id":"q1","text":"..."}]}
//! ```
//!
//! Keys are written in alphabetical order so that re-serializing a loaded log
//! reproduces the input byte for byte.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::tokenize;

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub title_text: String,
    pub title_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub doc_id: String,
    pub clicked: bool,
    /// Graded label in `[0, 4]`, when the log carries one.
    pub relevance: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryTurn {
    pub query_id: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Impression order.
    pub candidates: Vec<Candidate>,
    pub first_click: Option<String>,
}

impl QueryTurn {
    pub fn clicked(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().filter(|c| c.clicked).map(|c| c.doc_id.as_str())
    }

    pub fn skipped(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().filter(|c| !c.clicked).map(|c| c.doc_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub turns: Vec<QueryTurn>,
}

/// Sessions in file order plus the document table they reference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchLog {
    pub sessions: Vec<Session>,
    pub documents: BTreeMap<String, Document>,
}

// Wire records. Field order is the canonical (alphabetical) key order.

#[derive(Serialize, Deserialize)]
struct SessionRecord {
    session_id: String,
    turns: Vec<TurnRecord>,
}

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    candidates: Vec<CandidateRecord>,
    query_id: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct CandidateRecord {
    clicked: bool,
    doc_id: String,
    #[serde(default)]
    relevance: Option<i64>,
    title: String,
}

impl SearchLog {
    /// Parses JSONL from a reader. Blank lines are ignored.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut log = SearchLog::default();
        let mut session_ids = HashSet::new();
        let mut query_ids = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SessionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if !session_ids.insert(rec.session_id.clone()) {
                return Err(Error::DuplicateSession(rec.session_id));
            }
            let mut turns = Vec::with_capacity(rec.turns.len());
            for t in rec.turns {
                if t.candidates.is_empty() {
                    return Err(Error::NoCandidates {
                        session_id: rec.session_id,
                        query_id: t.query_id,
                    });
                }
                if !query_ids.insert(t.query_id.clone()) {
                    return Err(Error::DuplicateQuery(t.query_id));
                }
                let mut candidates = Vec::with_capacity(t.candidates.len());
                for c in t.candidates {
                    let relevance = match c.relevance {
                        None => None,
                        Some(r @ 0..=4) => Some(r as u8),
                        Some(value) => {
                            return Err(Error::RelevanceOutOfRange {
                                doc_id: c.doc_id,
                                value,
                            })
                        }
                    };
                    log.insert_document(&c.doc_id, c.title)?;
                    candidates.push(Candidate {
                        doc_id: c.doc_id,
                        clicked: c.clicked,
                        relevance,
                    });
                }
                let first_click = candidates.iter().find(|c| c.clicked).map(|c| c.doc_id.clone());
                turns.push(QueryTurn {
                    query_id: t.query_id,
                    text: t.text,
                    tokens: Vec::new(),
                    candidates,
                    first_click,
                });
            }
            log.sessions.push(Session {
                session_id: rec.session_id,
                turns,
            });
        }
        Ok(log)
    }

    fn insert_document(&mut self, doc_id: &str, title: String) -> Result<()> {
        match self.documents.get(doc_id) {
            Some(d) if d.title_text != title => Err(Error::ConflictingTitle {
                doc_id: doc_id.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.documents.insert(
                    doc_id.to_string(),
                    Document {
                        doc_id: doc_id.to_string(),
                        title_text: title,
                        title_tokens: Vec::new(),
                    },
                );
                Ok(())
            }
        }
    }

    /// Reads a JSONL session log. Token fields are left empty; see
    /// [`SearchLog::tokenize_all`].
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.sessions {
            let rec = SessionRecord {
                session_id: s.session_id.clone(),
                turns: s
                    .turns
                    .iter()
                    .map(|t| TurnRecord {
                        candidates: t
                            .candidates
                            .iter()
                            .map(|c| CandidateRecord {
                                clicked: c.clicked,
                                doc_id: c.doc_id.clone(),
                                relevance: c.relevance.map(i64::from),
                                title: self
                                    .documents
                                    .get(&c.doc_id)
                                    .map(|d| d.title_text.clone())
                                    .unwrap_or_default(),
                            })
                            .collect(),
                        query_id: t.query_id.clone(),
                        text: t.text.clone(),
                    })
                    .collect(),
            };
            let line = serde_json::to_string(&rec).expect("session record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON output is UTF-8")
    }

    /// Fills query and title token fields.
    pub fn tokenize_all(&mut self) {
        for s in &mut self.sessions {
            for t in &mut s.turns {
                t.tokens = tokenize(&t.text);
            }
        }
        for d in self.documents.values_mut() {
            d.title_tokens = tokenize(&d.title_text);
        }
    }

    pub fn document(&self, doc_id: &str) -> Result<&Document> {
        self.documents
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))
    }

    pub fn n_turns(&self) -> usize {
        self.sessions.iter().map(|s| s.turns.len()).sum()
    }

    /// Splits sessions into two logs; each keeps only the documents its
    /// sessions reference.
    pub fn partition(&self, mut keep_left: impl FnMut(&Session) -> bool) -> (SearchLog, SearchLog) {
        let (mut left, mut right) = (SearchLog::default(), SearchLog::default());
        for s in &self.sessions {
            let target = if keep_left(s) { &mut left } else { &mut right };
            for t in &s.turns {
                for c in &t.candidates {
                    if let Some(d) = self.documents.get(&c.doc_id) {
                        target.documents.entry(c.doc_id.clone()).or_insert_with(|| d.clone());
                    }
                }
            }
            target.sessions.push(s.clone());
        }
        (left, right)
    }
}

/// One `(q_i, d_i)` pair of a search history, `d_i` being the first click.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTurn {
    pub query_id: String,
    pub query_tokens: Vec<String>,
    pub doc_id: String,
    pub doc_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchContext {
    pub session_id: String,
    /// 1-based position of the current turn in its session.
    pub position: usize,
    pub session_len: usize,
    pub history: Vec<HistoryTurn>,
    pub current: QueryTurn,
    /// Clicked candidates in impression order.
    pub clicked: Vec<String>,
    pub skipped: Vec<String>,
}

impl SearchContext {
    pub fn query_id(&self) -> &str {
        &self.current.query_id
    }

    /// First clicked candidate.
    pub fn primary_click(&self) -> &str {
        &self.clicked[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextSet {
    pub contexts: Vec<SearchContext>,
    /// Turns that produced no context.
    pub dropped: usize,
}

/// One context per turn with at least one click whose preceding turns all
/// have a first click. With `require_history`, turns at position 1 are
/// dropped as well. Expects a tokenized log.
pub fn derive_contexts(log: &SearchLog, require_history: bool) -> ContextSet {
    let mut out = ContextSet::default();
    for s in &log.sessions {
        let mut history: Vec<HistoryTurn> = Vec::new();
        let mut history_ok = true;
        for (i, turn) in s.turns.iter().enumerate() {
            let has_click = turn.first_click.is_some();
            let emit = has_click && history_ok && (!require_history || i > 0);
            if emit {
                out.contexts.push(SearchContext {
                    session_id: s.session_id.clone(),
                    position: i + 1,
                    session_len: s.turns.len(),
                    history: history.clone(),
                    current: turn.clone(),
                    clicked: turn.clicked().map(str::to_string).collect(),
                    skipped: turn.skipped().map(str::to_string).collect(),
                });
            } else {
                out.dropped += 1;
            }
            match &turn.first_click {
                Some(d) if history_ok => history.push(HistoryTurn {
                    query_id: turn.query_id.clone(),
                    query_tokens: turn.tokens.clone(),
                    doc_id: d.clone(),
                    doc_tokens: log
                        .documents
                        .get(d)
                        .map(|doc| doc.title_tokens.clone())
                        .unwrap_or_default(),
                }),
                _ => history_ok = false,
            }
        }
    }
    out
}
