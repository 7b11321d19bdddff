//! Tokenization, vocabulary construction and random term sampling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::corpus::SearchLog;
use crate::error::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const EOS: &str = "[EOS]";
pub const TERM_DEL: &str = "[term_del]";
pub const EMPTY_Q: &str = "[empty_q]";
pub const EMPTY_D: &str = "[empty_d]";
pub const UNK: &str = "[UNK]";

/// Reserved tokens in id order.
pub const RESERVED: [&str; 7] = [CLS, SEP, EOS, TERM_DEL, EMPTY_Q, EMPTY_D, UNK];

pub const CLS_ID: u32 = 0;
pub const SEP_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const TERM_DEL_ID: u32 = 3;
pub const UNK_ID: u32 = 6;

const N_RESERVED: usize = RESERVED.len();

pub fn is_reserved(token: &str) -> bool {
    RESERVED.contains(&token)
}

/// Lowercases, splits on whitespace and strips non-alphanumeric characters
/// from both ends of each token. Reserved bracketed tokens pass through
/// verbatim.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            if is_reserved(raw) {
                return Some(raw.to_string());
            }
            let lowered = raw.to_lowercase();
            let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}

/// Term dictionary with dense ids. Reserved tokens always occupy ids 0..7.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    term_to_id: HashMap<String, u32>,
    terms: Vec<String>,
    freq: Vec<u64>,
    doc_freq: Vec<u64>,
    total_terms: u64,
}

impl Vocabulary {
    fn with_reserved() -> Self {
        let mut v = Vocabulary {
            term_to_id: HashMap::new(),
            terms: Vec::new(),
            freq: Vec::new(),
            doc_freq: Vec::new(),
            total_terms: 0,
        };
        for t in RESERVED {
            v.push(t.to_string(), 0, 0);
        }
        v
    }

    fn push(&mut self, term: String, freq: u64, df: u64) {
        let id = self.terms.len() as u32;
        self.term_to_id.insert(term.clone(), id);
        self.terms.push(term);
        self.freq.push(freq);
        self.doc_freq.push(df);
    }

    /// Builds a vocabulary from tokenized texts. Each text counts once toward
    /// document frequency. Ids: reserved tokens, then terms by descending
    /// frequency with lexicographic tie-break.
    pub fn from_texts<'a, I>(texts: I, min_freq: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if min_freq == 0 {
            return Err(Error::InvalidArgument("min_freq must be >= 1".into()));
        }
        let mut counts: HashMap<&str, (u64, u64)> = HashMap::new();
        let mut total = 0u64;
        for text in texts {
            let mut seen: Vec<&str> = Vec::new();
            for tok in text {
                total += 1;
                if is_reserved(tok) {
                    continue;
                }
                let e = counts.entry(tok.as_str()).or_default();
                e.0 += 1;
                if !seen.contains(&tok.as_str()) {
                    seen.push(tok);
                    e.1 += 1;
                }
            }
        }
        let mut kept: Vec<(&str, u64, u64)> = counts
            .into_iter()
            .filter(|(_, (f, _))| *f >= min_freq)
            .map(|(t, (f, df))| (t, f, df))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Vocabulary::with_reserved();
        vocab.total_terms = total;
        for (t, f, df) in kept {
            vocab.push(t.to_string(), f, df);
        }
        Ok(vocab)
    }

    /// Vocabulary over every query text and every distinct document title in
    /// the log.
    pub fn build(log: &SearchLog, min_freq: u64) -> Result<Self> {
        let mut texts: Vec<Vec<String>> = Vec::new();
        for s in &log.sessions {
            for t in &s.turns {
                texts.push(tokenize(&t.text));
            }
        }
        for d in log.documents.values() {
            texts.push(tokenize(&d.title_text));
        }
        Self::from_texts(texts.iter().map(Vec::as_slice), min_freq)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of non-reserved terms.
    pub fn n_terms(&self) -> usize {
        self.terms.len() - N_RESERVED
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn frequency(&self, term: &str) -> u64 {
        self.id(term).map_or(0, |i| self.freq[i as usize])
    }

    pub fn document_frequency(&self, term: &str) -> u64 {
        self.id(term).map_or(0, |i| self.doc_freq[i as usize])
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    /// Non-reserved terms in id order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms[N_RESERVED..].iter().map(String::as_str)
    }

    /// Maps tokens to ids, OOV to `[UNK]`.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.id(t).unwrap_or(UNK_ID))
            .collect()
    }

    /// Uniform draw over distinct non-reserved terms other than `exclude`.
    pub fn sample_term<R: Rng + ?Sized>(&self, rng: &mut R, exclude: Option<&str>) -> Result<&str> {
        let excluded_id = exclude
            .and_then(|t| self.id(t))
            .filter(|&i| i as usize >= N_RESERVED);
        let n = self.n_terms() - usize::from(excluded_id.is_some());
        if n == 0 {
            return Err(Error::NoEligibleTerm);
        }
        let mut idx = N_RESERVED + rng.gen_range(0..n);
        if let Some(ex) = excluded_id {
            if idx >= ex as usize {
                idx += 1;
            }
        }
        Ok(&self.terms[idx])
    }

    /// Two-column `id<TAB>term` file.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(w, "{i}\t{t}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a file written by [`Vocabulary::write_tsv`]. Frequency counts are
    /// not persisted and read back as zero.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vocab = Vocabulary {
            term_to_id: HashMap::new(),
            terms: Vec::new(),
            freq: Vec::new(),
            doc_freq: Vec::new(),
            total_terms: 0,
        };
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let parse_err = |message: &str| Error::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let (id, term) = line.split_once('\t').ok_or_else(|| parse_err("expected id<TAB>term"))?;
            let id: usize = id.parse().map_err(|_| parse_err("bad id"))?;
            if id != vocab.terms.len() {
                return Err(parse_err("ids must be dense and ascending"));
            }
            if id < N_RESERVED && term != RESERVED[id] {
                return Err(parse_err("reserved token out of place"));
            }
            vocab.push(term.to_string(), 0, 0);
        }
        if vocab.terms.len() < N_RESERVED {
            return Err(Error::Parse {
                line: vocab.terms.len() + 1,
                message: "missing reserved tokens".into(),
            });
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn vocab_of(texts: &[&str], min_freq: u64) -> Vocabulary {
        let t: Vec<Vec<String>> = texts.iter().map(|s| tokenize(s)).collect();
        Vocabulary::from_texts(t.iter().map(Vec::as_slice), min_freq).unwrap()
    }

    #[test]
    fn tokenize_rules() {
        assert_eq!(toks("Burlington Wisconsin"), ["burlington", "wisconsin"]);
        assert_eq!(toks("[empty_q]"), ["[empty_q]"]);
        assert_eq!(toks("racine county wi home"), ["racine", "county", "wi", "home"]);
        assert_eq!(toks("  \"Hello,\"   (world)!  -- "), ["hello", "world"]);
        assert_eq!(toks("[CLS] a [SEP]"), ["[CLS]", "a", "[SEP]"]);
        assert!(toks("").is_empty());
    }

    #[test]
    fn tokenize_is_idempotent_on_fixed_cases() {
        for s in ["A.B c-d", "[term_del] x!", "ÜBER straße", "..."] {
            let once = tokenize(s);
            assert_eq!(tokenize(&once.join(" ")), once);
        }
    }

    #[test]
    fn vocab_frequency_order_and_threshold() {
        let v = vocab_of(&["a a b"], 1);
        assert_eq!(v.len(), RESERVED.len() + 2);
        assert!(v.id("a").unwrap() < v.id("b").unwrap());
        for (i, r) in RESERVED.iter().enumerate() {
            assert_eq!(v.id(r), Some(i as u32));
        }
        assert_eq!(v.frequency("a"), 2);
        assert_eq!(v.document_frequency("a"), 1);
        assert_eq!(v.total_terms(), 3);

        let v2 = vocab_of(&["a a b"], 2);
        assert!(v2.id("b").is_none());
        assert!(v2.id("a").is_some());
    }

    #[test]
    fn vocab_ties_break_lexicographically_and_is_deterministic() {
        let a = vocab_of(&["zeta alpha mid", "mid"], 1);
        let b = vocab_of(&["zeta alpha mid", "mid"], 1);
        assert_eq!(a, b);
        let order: Vec<&str> = a.terms().collect();
        assert_eq!(order, ["mid", "alpha", "zeta"]);
    }

    #[test]
    fn vocab_rejects_zero_min_freq() {
        let t = [tokenize("a")];
        assert!(Vocabulary::from_texts(t.iter().map(Vec::as_slice), 0).is_err());
    }

    #[test]
    fn encode_maps_oov_to_unk() {
        let v = vocab_of(&["a b"], 1);
        assert_eq!(v.encode(&toks("a zzz [EOS]")), [v.id("a").unwrap(), UNK_ID, EOS_ID]);
    }

    #[test]
    fn sample_term_forced_choices() {
        let mut rng = seeded(1);
        let single = vocab_of(&["x"], 1);
        assert_eq!(single.sample_term(&mut rng, None).unwrap(), "x");
        assert!(matches!(single.sample_term(&mut rng, Some("x")), Err(Error::NoEligibleTerm)));

        let pair = vocab_of(&["x y"], 1);
        for _ in 0..50 {
            assert_eq!(pair.sample_term(&mut rng, Some("x")).unwrap(), "y");
        }
        // excluding a reserved or unknown token excludes nothing
        assert!(pair.sample_term(&mut rng, Some("[UNK]")).is_ok());
    }

    #[test]
    fn sample_term_is_deterministic_per_rng_state() {
        let v = vocab_of(&["a b c d e f"], 1);
        let a = v.sample_term(&mut seeded(99), None).unwrap().to_string();
        let b = v.sample_term(&mut seeded(99), None).unwrap().to_string();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_term_is_uniform_over_ten_terms() {
        let v = vocab_of(&["t0 t1 t2 t3 t4 t5 t6 t7 t8 t9"], 1);
        let mut rng = seeded(2024);
        let mut counts: HashMap<String, usize> = HashMap::new();
        for _ in 0..10_000 {
            *counts.entry(v.sample_term(&mut rng, None).unwrap().to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        for (t, c) in counts {
            let p = c as f64 / 10_000.0;
            assert!((p - 0.1).abs() <= 0.05, "{t}: {p}");
        }
    }

    #[test]
    fn tsv_round_trip() {
        let v = vocab_of(&["burlington wisconsin burlington"], 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        v.write_tsv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("0\t[CLS]\n1\t[SEP]\n"));
        let back = Vocabulary::read_tsv(&p).unwrap();
        assert_eq!(back.len(), v.len());
        assert_eq!(back.id("wisconsin"), v.id("wisconsin"));
    }
}
