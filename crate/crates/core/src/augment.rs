//! Query-oriented augmentation.
//!
//! The current query of a search context is altered at the term level (mask,
//! replace, add one term) or replaced wholesale (random, historical, mined
//! ambiguous query). Each altered query is paired with the unchanged history
//! and the clicked document to form a negative sequence whose required margin
//! depends on how hard it is to tell apart from the observed one.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::corpus::{HistoryTurn, SearchContext, SearchLog};
use crate::error::{Error, Result};
use crate::mining::AmbiguousMatch;
use crate::rng::derived;
use crate::textproc::{tokenize, Vocabulary, TERM_DEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Mask,
    Replace,
    Add,
    Random,
    Historical,
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// Strategy families that can be switched off as a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyGroup {
    /// Term-level modification: mask, replace, add.
    TM,
    /// Random query replacement.
    RQ,
    /// Historical query replacement.
    HQ,
    /// Ambiguous query replacement.
    AQ,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Mask,
        Strategy::Replace,
        Strategy::Add,
        Strategy::Random,
        Strategy::Historical,
        Strategy::Ambiguous,
    ];

    pub fn difficulty(self) -> Difficulty {
        match self {
            Strategy::Random => Difficulty::Easy,
            Strategy::Ambiguous => Difficulty::Hard,
            _ => Difficulty::Medium,
        }
    }

    pub fn group(self) -> StrategyGroup {
        match self {
            Strategy::Mask | Strategy::Replace | Strategy::Add => StrategyGroup::TM,
            Strategy::Random => StrategyGroup::RQ,
            Strategy::Historical => StrategyGroup::HQ,
            Strategy::Ambiguous => StrategyGroup::AQ,
        }
    }

    pub fn is_term_level(self) -> bool {
        self.group() == StrategyGroup::TM
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Mask => "mask",
            Strategy::Replace => "replace",
            Strategy::Add => "add",
            Strategy::Random => "random",
            Strategy::Historical => "historical",
            Strategy::Ambiguous => "ambiguous",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

impl StrategyGroup {
    pub const ALL: [StrategyGroup; 4] = [StrategyGroup::TM, StrategyGroup::RQ, StrategyGroup::HQ, StrategyGroup::AQ];
}

impl fmt::Display for StrategyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for StrategyGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TM" => Ok(StrategyGroup::TM),
            "RQ" => Ok(StrategyGroup::RQ),
            "HQ" => Ok(StrategyGroup::HQ),
            "AQ" => Ok(StrategyGroup::AQ),
            _ => Err(Error::InvalidArgument(format!("unknown strategy group `{s}`"))),
        }
    }
}

/// Where an altered query came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Token index (mask, replace) or insertion gap (add), 0-based.
    Position(usize),
    /// Source query id for query-level replacements.
    Query(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedQuery {
    pub tokens: Vec<String>,
    pub strategy: Strategy,
    pub difficulty: Difficulty,
    pub margin: f64,
    pub provenance: Provenance,
}

impl AugmentedQuery {
    fn new(tokens: Vec<String>, strategy: Strategy, margin: f64, provenance: Provenance) -> Self {
        AugmentedQuery {
            tokens,
            strategy,
            difficulty: strategy.difficulty(),
            margin,
            provenance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub n_mask: usize,
    pub n_replace: usize,
    pub n_add: usize,
    pub n_random: usize,
    pub n_ambiguous: usize,
    /// Historical replacement uses every history query; this only toggles it.
    pub use_historical: bool,
    pub m_op: f64,
    pub m_rq: f64,
    pub m_th: f64,
    pub mean_m_aq: f64,
    pub w_size: usize,
    pub seed: u64,
    /// Serialize term-level pairs after all other pairs.
    pub curriculum: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::aol()
    }
}

impl AugmentConfig {
    /// Counts and margins used for the English click log.
    pub fn aol() -> Self {
        AugmentConfig {
            n_mask: 1,
            n_replace: 1,
            n_add: 1,
            n_random: 3,
            n_ambiguous: 4,
            use_historical: true,
            m_op: 1.0,
            m_rq: 1.0,
            m_th: 0.5,
            mean_m_aq: 0.2,
            w_size: 50,
            seed: 0,
            curriculum: false,
        }
    }

    /// Counts used for the Chinese log, with term-level pairs deferred.
    pub fn tiangong() -> Self {
        AugmentConfig {
            n_random: 8,
            n_ambiguous: 5,
            curriculum: true,
            ..Self::aol()
        }
    }

    /// Disables one strategy family.
    pub fn without(mut self, group: StrategyGroup) -> Self {
        match group {
            StrategyGroup::TM => {
                self.n_mask = 0;
                self.n_replace = 0;
                self.n_add = 0;
            }
            StrategyGroup::RQ => self.n_random = 0,
            StrategyGroup::HQ => self.use_historical = false,
            StrategyGroup::AQ => self.n_ambiguous = 0,
        }
        self
    }

    /// Original pairs only.
    pub fn original_only(self) -> Self {
        StrategyGroup::ALL.into_iter().fold(self, Self::without)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("m_op", self.m_op), ("m_rq", self.m_rq), ("m_th", self.m_th), ("mean_m_aq", self.mean_m_aq)] {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name}={m} outside (0, 1]")));
            }
        }
        if !(self.m_rq > self.m_th && self.m_th > self.mean_m_aq) {
            return Err(Error::InvalidArgument("margins must satisfy m_rq > m_th > mean_m_aq".into()));
        }
        if self.w_size < 2 || self.w_size % 2 != 0 {
            return Err(Error::InvalidArgument("w_size must be even and >= 2".into()));
        }
        Ok(())
    }
}

/// `q` with token `k` replaced by `[term_del]`.
pub fn mask_at(q: &[String], k: usize) -> Vec<String> {
    replace_at(q, k, TERM_DEL)
}

pub fn replace_at(q: &[String], k: usize, term: &str) -> Vec<String> {
    let mut out = q.to_vec();
    out[k] = term.to_string();
    out
}

/// `q` with `term` inserted before token `gap` (`gap == q.len()` appends).
pub fn insert_at(q: &[String], gap: usize, term: &str) -> Vec<String> {
    let mut out = q.to_vec();
    out.insert(gap, term.to_string());
    out
}

pub fn mask_term<R: Rng + ?Sized>(q: &[String], rng: &mut R, cfg: &AugmentConfig) -> Result<AugmentedQuery> {
    if q.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let k = rng.gen_range(0..q.len());
    Ok(AugmentedQuery::new(mask_at(q, k), Strategy::Mask, cfg.m_th, Provenance::Position(k)))
}

pub fn replace_term<R: Rng + ?Sized>(
    q: &[String],
    vocab: &Vocabulary,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> Result<AugmentedQuery> {
    if q.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let k = rng.gen_range(0..q.len());
    let term = vocab.sample_term(rng, Some(&q[k]))?;
    Ok(AugmentedQuery::new(
        replace_at(q, k, term),
        Strategy::Replace,
        cfg.m_th,
        Provenance::Position(k),
    ))
}

pub fn add_term<R: Rng + ?Sized>(
    q: &[String],
    vocab: &Vocabulary,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> Result<AugmentedQuery> {
    let gap = rng.gen_range(0..=q.len());
    let term = vocab.sample_term(rng, None)?;
    Ok(AugmentedQuery::new(insert_at(q, gap, term), Strategy::Add, cfg.m_th, Provenance::Position(gap)))
}

/// Every query of a log, for random replacement and id lookups.
pub struct QueryPool {
    entries: Vec<PoolEntry>,
    by_id: HashMap<String, usize>,
    by_session: HashMap<String, Vec<usize>>,
}

struct PoolEntry {
    session_id: String,
    query_id: String,
    tokens: Vec<String>,
}

impl QueryPool {
    pub fn new(log: &SearchLog) -> Self {
        let mut pool = QueryPool {
            entries: Vec::new(),
            by_id: HashMap::new(),
            by_session: HashMap::new(),
        };
        for s in &log.sessions {
            for t in &s.turns {
                let i = pool.entries.len();
                pool.by_id.insert(t.query_id.clone(), i);
                pool.by_session.entry(s.session_id.clone()).or_default().push(i);
                pool.entries.push(PoolEntry {
                    session_id: s.session_id.clone(),
                    query_id: t.query_id.clone(),
                    tokens: t.tokens.clone(),
                });
            }
        }
        pool
    }

    pub fn tokens(&self, query_id: &str) -> Option<&[String]> {
        self.by_id.get(query_id).map(|&i| self.entries[i].tokens.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn session_texts(&self, session_id: &str) -> HashSet<&[String]> {
        self.by_session
            .get(session_id)
            .into_iter()
            .flatten()
            .map(|&i| self.entries[i].tokens.as_slice())
            .collect()
    }
}

/// `n` distinct query texts drawn uniformly from sessions other than
/// `exclude_session`, never equal to any query text of that session.
pub fn sample_random_queries<R: Rng + ?Sized>(
    pool: &QueryPool,
    n: usize,
    exclude_session: &str,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> Result<Vec<AugmentedQuery>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let banned = pool.session_texts(exclude_session);
    let eligible = |e: &PoolEntry| e.session_id != exclude_session && !e.tokens.is_empty() && !banned.contains(e.tokens.as_slice());
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut seen: HashSet<&[String]> = HashSet::new();
    if !pool.is_empty() {
        for _ in 0..64 * n {
            let i = rng.gen_range(0..pool.len());
            let e = &pool.entries[i];
            if eligible(e) && seen.insert(e.tokens.as_slice()) {
                chosen.push(i);
                if chosen.len() == n {
                    break;
                }
            }
        }
    }
    if chosen.len() < n {
        // rejection sampling stalled: enumerate what is left
        let mut rest: Vec<usize> = Vec::new();
        for (i, e) in pool.entries.iter().enumerate() {
            if eligible(e) && seen.insert(e.tokens.as_slice()) {
                rest.push(i);
            }
        }
        let need = n - chosen.len();
        if rest.len() < need {
            return Err(Error::InsufficientPool {
                requested: n,
                available: chosen.len() + rest.len(),
            });
        }
        let (picked, _) = rest.partial_shuffle(rng, need);
        chosen.extend_from_slice(picked);
    }
    Ok(chosen
        .into_iter()
        .map(|i| {
            let e = &pool.entries[i];
            AugmentedQuery::new(e.tokens.clone(), Strategy::Random, cfg.m_rq, Provenance::Query(e.query_id.clone()))
        })
        .collect())
}

/// The history queries of the context, oldest first.
pub fn historical_queries(ctx: &SearchContext, cfg: &AugmentConfig) -> Vec<AugmentedQuery> {
    ctx.history
        .iter()
        .map(|h| {
            AugmentedQuery::new(
                h.query_tokens.clone(),
                Strategy::Historical,
                cfg.m_th,
                Provenance::Query(h.query_id.clone()),
            )
        })
        .collect()
}

pub fn ambiguous_queries(matches: &[AmbiguousMatch], pool: &QueryPool, n: usize) -> Vec<AugmentedQuery> {
    matches
        .iter()
        .filter_map(|m| {
            let tokens = pool.tokens(&m.matched)?;
            Some(AugmentedQuery::new(
                tokens.to_vec(),
                Strategy::Ambiguous,
                m.margin,
                Provenance::Query(m.matched.clone()),
            ))
        })
        .take(n)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Negative is a skipped document under the observed query.
    Original,
    /// Negative is the clicked document under an altered query.
    Constructed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Side {
    pub query: Vec<String>,
    pub doc_id: String,
    pub doc: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub query_id: String,
    pub kind: PairKind,
    pub strategy: Option<Strategy>,
    pub margin: f64,
    /// Shared by both sides.
    pub history: Arc<[HistoryTurn]>,
    pub positive: Side,
    pub negative: Side,
}

impl TrainingPair {
    pub fn difficulty(&self) -> Option<Difficulty> {
        self.strategy.map(Strategy::difficulty)
    }

    pub fn is_term_level(&self) -> bool {
        self.strategy.is_some_and(Strategy::is_term_level)
    }

    fn to_json(&self) -> Value {
        let side = |s: &Side| {
            json!({
                "doc": s.doc.join(" "),
                "doc_id": s.doc_id,
                "query": s.query.join(" "),
            })
        };
        let history: Vec<Value> = self
            .history
            .iter()
            .map(|h| json!([h.query_tokens.join(" "), h.doc_tokens.join(" ")]))
            .collect();
        json!({
            "history": history,
            "kind": match self.kind { PairKind::Original => "original", PairKind::Constructed => "constructed" },
            "margin": self.margin,
            "negative": side(&self.negative),
            "positive": side(&self.positive),
            "query_id": self.query_id,
            "strategy": self.strategy.map(Strategy::name),
        })
    }

    fn from_json(v: &Value) -> std::result::Result<Self, String> {
        let s = |v: &Value, k: &str| -> std::result::Result<String, String> {
            v.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("missing string `{k}`"))
        };
        let side = |k: &str| -> std::result::Result<Side, String> {
            let o = v.get(k).ok_or_else(|| format!("missing `{k}`"))?;
            Ok(Side {
                query: tokenize(&s(o, "query")?),
                doc_id: s(o, "doc_id")?,
                doc: tokenize(&s(o, "doc")?),
            })
        };
        let kind = match s(v, "kind")?.as_str() {
            "original" => PairKind::Original,
            "constructed" => PairKind::Constructed,
            other => return Err(format!("unknown kind `{other}`")),
        };
        let strategy = match v.get("strategy") {
            None | Some(Value::Null) => None,
            Some(Value::String(name)) => Some(name.parse::<Strategy>().map_err(|e| e.to_string())?),
            Some(_) => return Err("bad `strategy`".into()),
        };
        let history = v
            .get("history")
            .and_then(Value::as_array)
            .ok_or("missing `history`")?
            .iter()
            .map(|h| {
                let q = h.get(0).and_then(Value::as_str).ok_or("bad history entry")?;
                let d = h.get(1).and_then(Value::as_str).ok_or("bad history entry")?;
                Ok(HistoryTurn {
                    query_id: String::new(),
                    query_tokens: tokenize(q),
                    doc_id: String::new(),
                    doc_tokens: tokenize(d),
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(TrainingPair {
            query_id: s(v, "query_id")?,
            kind,
            strategy,
            margin: v.get("margin").and_then(Value::as_f64).ok_or("missing `margin`")?,
            history: history.into(),
            positive: side("positive")?,
            negative: side("negative")?,
        })
    }
}

/// Counts gathered while building a training set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentStats {
    pub contexts: usize,
    pub contexts_without_history: usize,
    pub original_pairs: usize,
    pub constructed_pairs: BTreeMap<Strategy, usize>,
    /// Requested edits or replacements that could not be produced.
    pub shortfall: BTreeMap<Strategy, usize>,
}

impl AugmentStats {
    pub fn constructed_total(&self) -> usize {
        self.constructed_pairs.values().sum()
    }

    fn merge(&mut self, other: AugmentStats) {
        self.contexts += other.contexts;
        self.contexts_without_history += other.contexts_without_history;
        self.original_pairs += other.original_pairs;
        for (k, v) in other.constructed_pairs {
            *self.constructed_pairs.entry(k).or_default() += v;
        }
        for (k, v) in other.shortfall {
            *self.shortfall.entry(k).or_default() += v;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub pairs: Vec<TrainingPair>,
    pub stats: AugmentStats,
}

/// Inputs shared by every context.
pub struct AugmentSources<'a> {
    pub log: &'a SearchLog,
    pub vocab: &'a Vocabulary,
    pub pool: &'a QueryPool,
    /// Ambiguous matches keyed by source query id, best first.
    pub mined: &'a BTreeMap<String, Vec<AmbiguousMatch>>,
}

/// Original and constructed pairs for every context. Contexts are processed
/// in parallel with per-context random streams; output order follows
/// `contexts`.
pub fn build_training_set(
    contexts: &[SearchContext],
    cfg: &AugmentConfig,
    src: &AugmentSources<'_>,
) -> Result<TrainingSet> {
    cfg.validate()?;
    let parts: Vec<(Vec<TrainingPair>, AugmentStats)> = contexts
        .par_iter()
        .map(|c| augment_context(c, cfg, src))
        .collect::<Result<_>>()?;
    let mut set = TrainingSet::default();
    for (pairs, stats) in parts {
        set.pairs.extend(pairs);
        set.stats.merge(stats);
    }
    if cfg.curriculum {
        // stable: relative order within each group is kept
        set.pairs.sort_by_key(TrainingPair::is_term_level);
    }
    Ok(set)
}

fn side(log: &SearchLog, query: &[String], doc_id: &str) -> Result<Side> {
    Ok(Side {
        query: query.to_vec(),
        doc_id: doc_id.to_string(),
        doc: log.document(doc_id)?.title_tokens.clone(),
    })
}

fn augment_context(
    ctx: &SearchContext,
    cfg: &AugmentConfig,
    src: &AugmentSources<'_>,
) -> Result<(Vec<TrainingPair>, AugmentStats)> {
    let mut stats = AugmentStats {
        contexts: 1,
        ..Default::default()
    };
    let history: Arc<[HistoryTurn]> = ctx.history.clone().into();
    let q = &ctx.current.tokens;
    let mut pairs = Vec::new();

    for d_c in &ctx.clicked {
        let positive = side(src.log, q, d_c)?;
        for d_s in &ctx.skipped {
            pairs.push(TrainingPair {
                query_id: ctx.current.query_id.clone(),
                kind: PairKind::Original,
                strategy: None,
                margin: cfg.m_op,
                history: history.clone(),
                positive: positive.clone(),
                negative: side(src.log, q, d_s)?,
            });
        }
    }
    stats.original_pairs = pairs.len();

    if ctx.history.is_empty() {
        stats.contexts_without_history = 1;
        return Ok((pairs, stats));
    }

    let mut rng = derived(cfg.seed, &ctx.current.query_id);
    let mut altered: Vec<AugmentedQuery> = Vec::new();
    let mut short = |s: Strategy, n: usize| {
        if n > 0 {
            *stats.shortfall.entry(s).or_default() += n;
        }
    };
    for (strategy, n) in [(Strategy::Mask, cfg.n_mask), (Strategy::Replace, cfg.n_replace), (Strategy::Add, cfg.n_add)] {
        for _ in 0..n {
            let r = match strategy {
                Strategy::Mask => mask_term(q, &mut rng, cfg),
                Strategy::Replace => replace_term(q, src.vocab, &mut rng, cfg),
                _ => add_term(q, src.vocab, &mut rng, cfg),
            };
            match r {
                Ok(a) => altered.push(a),
                Err(_) => short(strategy, 1),
            }
        }
    }
    match sample_random_queries(src.pool, cfg.n_random, &ctx.session_id, &mut rng, cfg) {
        Ok(v) => altered.extend(v),
        Err(_) => short(Strategy::Random, cfg.n_random),
    }
    if cfg.use_historical {
        altered.extend(historical_queries(ctx, cfg));
    }
    if cfg.n_ambiguous > 0 {
        let matches = src.mined.get(&ctx.current.query_id).map_or(&[][..], Vec::as_slice);
        let amb = ambiguous_queries(matches, src.pool, cfg.n_ambiguous);
        short(Strategy::Ambiguous, cfg.n_ambiguous - amb.len());
        altered.extend(amb);
    }

    for d_c in &ctx.clicked {
        let positive = side(src.log, q, d_c)?;
        for a in &altered {
            *stats.constructed_pairs.entry(a.strategy).or_default() += 1;
            pairs.push(TrainingPair {
                query_id: ctx.current.query_id.clone(),
                kind: PairKind::Constructed,
                strategy: Some(a.strategy),
                margin: a.margin,
                history: history.clone(),
                positive: positive.clone(),
                negative: Side {
                    query: a.tokens.clone(),
                    ..positive.clone()
                },
            });
        }
    }
    Ok((pairs, stats))
}

/// One JSON object per pair, keys in alphabetical order.
pub fn write_training_set<W: Write>(pairs: &[TrainingPair], mut w: W) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}", p.to_json())?;
    }
    Ok(())
}

pub fn save_training_set(path: &Path, pairs: &[TrainingPair]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_training_set(pairs, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_training_set(path: &Path) -> Result<Vec<TrainingPair>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| Error::Parse { line: n + 1, message };
        let v: Value = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        out.push(TrainingPair::from_json(&v).map_err(parse)?);
    }
    Ok(out)
}
