//! Click-based ranking metrics, session breakdowns and TREC artifacts.
//!
//! For a query with clicks at 1-based positions `p_1 < p_2 < ... < p_c`:
//!
//! * AP = (1/c) * sum_j j / p_j
//! * RR = 1 / p_1
//! * DCG@k = sum over clicks with p_j <= k of 1 / log(1 + p_j)
//!
//! Metrics are averaged over queries. The discount uses the natural log by
//! default; binary NDCG does not depend on the base.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::corpus::SearchLog;
use crate::error::{Error, Result};
use crate::retrieval::RankingList;

/// One evaluated query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEval {
    pub query_id: String,
    pub list_len: usize,
    /// Strictly increasing, 1-based.
    pub clicks: Vec<usize>,
    /// Graded label at each rank, when labels exist.
    pub graded: Option<Vec<u8>>,
}

impl QueryEval {
    pub fn new(query_id: impl Into<String>, list_len: usize, mut clicks: Vec<usize>) -> Result<Self> {
        let query_id = query_id.into();
        clicks.sort_unstable();
        clicks.dedup();
        if clicks.iter().any(|&p| p == 0 || p > list_len) {
            return Err(Error::InvalidArgument(format!(
                "click position outside 1..={list_len} for `{query_id}`"
            )));
        }
        Ok(QueryEval {
            query_id,
            list_len,
            clicks,
            graded: None,
        })
    }

    /// Clicks and optional labels looked up by document id.
    pub fn from_ranking(list: &RankingList, clicked: &[&str], labels: Option<&HashMap<String, u8>>) -> Self {
        let clicks = list
            .doc_ids
            .iter()
            .enumerate()
            .filter(|(_, d)| clicked.contains(&d.as_str()))
            .map(|(i, _)| i + 1)
            .collect();
        let graded = labels.map(|l| list.doc_ids.iter().map(|d| l.get(d).copied().unwrap_or(0)).collect());
        QueryEval {
            query_id: list.query_id.clone(),
            list_len: list.len(),
            clicks,
            graded,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalRun {
    pub queries: Vec<QueryEval>,
}

impl EvalRun {
    pub fn new(queries: Vec<QueryEval>) -> Self {
        EvalRun { queries }
    }

    /// Joins ranking lists with the clicks (and labels, when every candidate
    /// of a turn carries one) recorded in `log`.
    pub fn from_lists(lists: &[RankingList], log: &SearchLog) -> Result<Self> {
        let turns: HashMap<&str, _> = log
            .sessions
            .iter()
            .flat_map(|s| &s.turns)
            .map(|t| (t.query_id.as_str(), t))
            .collect();
        let queries = lists
            .iter()
            .map(|l| {
                let t = turns
                    .get(l.query_id.as_str())
                    .ok_or_else(|| Error::Untraceable(l.query_id.clone()))?;
                let clicked: Vec<&str> = t.clicked().collect();
                let labels: Option<HashMap<String, u8>> = t
                    .candidates
                    .iter()
                    .map(|c| c.relevance.map(|r| (c.doc_id.clone(), r)))
                    .collect();
                Ok(QueryEval::from_ranking(l, &clicked, labels.as_ref()))
            })
            .collect::<Result<_>>()?;
        Ok(EvalRun { queries })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Splits off queries without clicks.
    pub fn without_zero_click(&self) -> (EvalRun, usize) {
        let kept: Vec<QueryEval> = self.queries.iter().filter(|q| !q.clicks.is_empty()).cloned().collect();
        let dropped = self.len() - kept.len();
        (EvalRun { queries: kept }, dropped)
    }

    fn checked(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("run has no queries".into()));
        }
        match self.queries.iter().find(|q| q.clicks.is_empty()) {
            Some(q) => Err(Error::ZeroClicks(q.query_id.clone())),
            None => Ok(()),
        }
    }
}

pub fn average_precision(clicks: &[usize]) -> f64 {
    let s: f64 = clicks.iter().enumerate().map(|(j, &p)| (j + 1) as f64 / p as f64).sum();
    s / clicks.len() as f64
}

pub fn compute_map(run: &EvalRun) -> Result<f64> {
    run.checked()?;
    Ok(run.queries.iter().map(|q| average_precision(&q.clicks)).sum::<f64>() / run.len() as f64)
}

pub fn compute_mrr(run: &EvalRun) -> Result<f64> {
    run.checked()?;
    Ok(run.queries.iter().map(|q| 1.0 / q.clicks[0] as f64).sum::<f64>() / run.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    #[default]
    BinaryClick,
    /// Raw label value as gain.
    Graded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    fn discount(self, p: usize) -> f64 {
        let x = 1.0 + p as f64;
        1.0 / match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

impl FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Gain::BinaryClick),
            "graded" => Ok(Gain::Graded),
            _ => Err(Error::InvalidArgument(format!("unknown gain `{s}`"))),
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ln" | "e" => Ok(LogBase::Natural),
            "log2" | "2" => Ok(LogBase::Two),
            _ => Err(Error::InvalidArgument(format!("unknown log base `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ndcg {
    /// Mean over queries with a nonzero ideal DCG; 0 when there are none.
    pub value: f64,
    pub evaluated: usize,
    /// Queries whose ideal DCG is zero.
    pub skipped: usize,
}

/// Per-query NDCG@k, `None` when the ideal DCG is zero.
pub fn query_ndcg(q: &QueryEval, k: usize, gain: Gain, base: LogBase) -> Result<Option<f64>> {
    let (dcg, ideal) = match gain {
        Gain::BinaryClick => {
            let dcg: f64 = q.clicks.iter().filter(|&&p| p <= k).map(|&p| base.discount(p)).sum();
            let ideal: f64 = (1..=q.clicks.len().min(k)).map(|p| base.discount(p)).sum();
            (dcg, ideal)
        }
        Gain::Graded => {
            let labels = q
                .graded
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("no relevance labels for `{}`", q.query_id)))?;
            let dcg: f64 = labels
                .iter()
                .take(k)
                .enumerate()
                .map(|(i, &r)| r as f64 * base.discount(i + 1))
                .sum();
            let mut best = labels.clone();
            best.sort_unstable_by(|a, b| b.cmp(a));
            let ideal: f64 = best
                .iter()
                .take(k)
                .enumerate()
                .map(|(i, &r)| r as f64 * base.discount(i + 1))
                .sum();
            (dcg, ideal)
        }
    };
    Ok((ideal > 0.0).then(|| dcg / ideal))
}

pub fn compute_ndcg(run: &EvalRun, k: usize, gain: Gain, base: LogBase) -> Result<Ndcg> {
    if k < 1 {
        return Err(Error::InvalidArgument("NDCG cutoff must be at least 1".into()));
    }
    let mut sum = 0.0;
    let mut evaluated = 0;
    for q in &run.queries {
        if let Some(v) = query_ndcg(q, k, gain, base)? {
            sum += v;
            evaluated += 1;
        }
    }
    Ok(Ndcg {
        value: if evaluated > 0 { sum / evaluated as f64 } else { 0.0 },
        evaluated,
        skipped: run.len() - evaluated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub gain: Gain,
    pub base: LogBase,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: vec![1, 3, 5, 10],
            gain: Gain::BinaryClick,
            base: LogBase::Natural,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Queries with at least one click.
    pub queries: usize,
    pub zero_click: usize,
    pub map: f64,
    pub mrr: f64,
    pub ndcg: BTreeMap<usize, f64>,
    pub ndcg_skipped: usize,
}

/// MAP, MRR and NDCG@k over the queries that have clicks.
pub fn evaluate(run: &EvalRun, opts: &EvalOptions) -> Result<MetricsReport> {
    let (kept, zero_click) = run.without_zero_click();
    let mut ndcg = BTreeMap::new();
    let mut ndcg_skipped = 0;
    for &k in &opts.ks {
        let n = compute_ndcg(&kept, k, opts.gain, opts.base)?;
        ndcg.insert(k, n.value);
        ndcg_skipped = ndcg_skipped.max(n.skipped);
    }
    let (map, mrr) = if kept.is_empty() {
        (0.0, 0.0)
    } else {
        (compute_map(&kept)?, compute_mrr(&kept)?)
    };
    Ok(MetricsReport {
        queries: kept.len(),
        zero_click,
        map,
        mrr,
        ndcg,
        ndcg_skipped,
    })
}

impl MetricsReport {
    fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("queries".to_string(), self.queries.to_string()),
            ("zero_click".to_string(), self.zero_click.to_string()),
            ("MAP".to_string(), format!("{:.6}", self.map)),
            ("MRR".to_string(), format!("{:.6}", self.mrr)),
        ];
        for (k, v) in &self.ndcg {
            rows.push((format!("NDCG@{k}"), format!("{v:.6}")));
        }
        rows
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        for (k, v) in self.rows() {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "MAP" => Some(self.map),
            "MRR" => Some(self.mrr),
            _ => name.strip_prefix("NDCG@")?.parse().ok().and_then(|k| self.ndcg.get(&k).copied()),
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<w$}  {v:>10}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakdownMode {
    Length,
    Position,
}

impl FromStr for BreakdownMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(BreakdownMode::Length),
            "position" => Ok(BreakdownMode::Position),
            _ => Err(Error::InvalidArgument(format!("unknown breakdown `{s}`"))),
        }
    }
}

/// Short (2 queries), medium (3-4), long (5+). Single-query sessions get
/// their own class.
pub fn length_class(session_len: usize) -> &'static str {
    match session_len {
        0 | 1 => "single",
        2 => "S",
        3 | 4 => "M",
        _ => "L",
    }
}

/// `(session_len, 1-based position)` for every query of the log.
pub fn trace_queries(log: &SearchLog) -> HashMap<String, (usize, usize)> {
    log.sessions
        .iter()
        .flat_map(|s| {
            s.turns
                .iter()
                .enumerate()
                .map(move |(i, t)| (t.query_id.clone(), (s.turns.len(), i + 1)))
        })
        .collect()
}

/// Per-bucket reports. Length buckets are `S`, `M`, `L` (and `single`);
/// position buckets prefix the class to the position, e.g. `M3`.
pub fn breakdown(
    run: &EvalRun,
    trace: &HashMap<String, (usize, usize)>,
    mode: BreakdownMode,
    opts: &EvalOptions,
) -> Result<Vec<(String, MetricsReport)>> {
    let mut buckets: BTreeMap<(u8, usize), (String, Vec<QueryEval>)> = BTreeMap::new();
    for q in &run.queries {
        let &(len, pos) = trace.get(&q.query_id).ok_or_else(|| Error::Untraceable(q.query_id.clone()))?;
        let class = length_class(len);
        let order = match class {
            "single" => 0,
            "S" => 1,
            "M" => 2,
            _ => 3,
        };
        let (key, label) = match mode {
            BreakdownMode::Length => ((order, 0), class.to_string()),
            BreakdownMode::Position => ((order, pos), format!("{class}{pos}")),
        };
        buckets.entry(key).or_insert_with(|| (label, Vec::new())).1.push(q.clone());
    }
    buckets
        .into_values()
        .map(|(label, qs)| Ok((label, evaluate(&EvalRun::new(qs), opts)?)))
        .collect()
}

pub fn breakdown_tsv(rows: &[(String, MetricsReport)]) -> String {
    let Some((_, first)) = rows.first() else {
        return String::from("bucket\tqueries\n");
    };
    let mut s = String::from("bucket\tqueries\tMAP\tMRR");
    for k in first.ndcg.keys() {
        let _ = write!(s, "\tNDCG@{k}");
    }
    s.push('\n');
    for (label, r) in rows {
        let _ = write!(s, "{label}\t{}\t{:.6}\t{:.6}", r.queries, r.map, r.mrr);
        for v in r.ndcg.values() {
            let _ = write!(s, "\t{v:.6}");
        }
        s.push('\n');
    }
    s
}

/// `qid Q0 docid rank score tag`, one line per ranked document.
pub fn write_run<W: Write>(lists: &[RankingList], tag: &str, mut w: W) -> std::io::Result<()> {
    for l in lists {
        for (i, (d, s)) in l.doc_ids.iter().zip(&l.scores).enumerate() {
            writeln!(w, "{} Q0 {} {} {} {}", l.query_id, d, i + 1, s, tag)?;
        }
    }
    Ok(())
}

/// Lists in first-seen query order, each ordered by rank.
pub fn read_run<R: BufRead>(r: R) -> Result<Vec<RankingList>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(usize, String, f64)>> = HashMap::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let parse = |message: &str| Error::Parse {
            line: n + 1,
            message: message.to_string(),
        };
        if f.len() != 6 {
            return Err(parse("expected `qid Q0 docid rank score tag`"));
        }
        let rank: usize = f[3].parse().map_err(|_| parse("bad rank"))?;
        let score: f64 = f[4].parse().map_err(|_| parse("bad score"))?;
        if !rows.contains_key(f[0]) {
            order.push(f[0].to_string());
        }
        rows.entry(f[0].to_string()).or_default().push((rank, f[2].to_string(), score));
    }
    Ok(order
        .into_iter()
        .map(|q| {
            let mut r = rows.remove(&q).unwrap_or_default();
            r.sort_by_key(|x| x.0);
            RankingList {
                query_id: q,
                doc_ids: r.iter().map(|x| x.1.clone()).collect(),
                scores: r.iter().map(|x| x.2).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Qrel {
    pub query_id: String,
    pub doc_id: String,
    pub rel: i64,
}

/// `qid 0 docid rel`.
pub fn write_qrels<W: Write>(qrels: &[Qrel], mut w: W) -> std::io::Result<()> {
    for q in qrels {
        writeln!(w, "{} 0 {} {}", q.query_id, q.doc_id, q.rel)?;
    }
    Ok(())
}

pub fn read_qrels<R: BufRead>(r: R) -> Result<Vec<Qrel>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let parse = |message: String| Error::Parse { line: n + 1, message };
        let line = line.map_err(|e| parse(e.to_string()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 4 {
            return Err(parse("expected `qid 0 docid rel`".into()));
        }
        out.push(Qrel {
            query_id: f[0].to_string(),
            doc_id: f[2].to_string(),
            rel: f[3].parse().map_err(|_| parse("bad relevance".into()))?,
        });
    }
    Ok(out)
}

/// Clicks as relevance 1, or the recorded labels when `graded` is set.
pub fn qrels_from_log(log: &SearchLog, graded: bool) -> Vec<Qrel> {
    log.sessions
        .iter()
        .flat_map(|s| &s.turns)
        .flat_map(|t| {
            t.candidates.iter().filter_map(move |c| {
                let rel = if graded {
                    c.relevance.map(i64::from)?
                } else if c.clicked {
                    1
                } else {
                    return None;
                };
                Some(Qrel {
                    query_id: t.query_id.clone(),
                    doc_id: c.doc_id.clone(),
                    rel,
                })
            })
        })
        .collect()
}

pub fn save_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_run(path: &Path) -> Result<Vec<RankingList>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_run(BufReader::new(file))
}
