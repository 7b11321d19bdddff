//! Ambiguous-query mining.
//!
//! Every query with a click owns a window of negative documents cut from its
//! full ranking list around its clicked document. A query `q'` is an
//! ambiguous replacement for the current query `q_c` when the clicked
//! document of `q_c` falls inside the window of `q'`; the closer the two
//! clicked documents sit in that list, the more ambiguous `q'` is.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::{SearchContext, SearchLog};
use crate::error::{Error, Result};
use crate::retrieval::RankingList;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowMember {
    pub doc_id: String,
    /// 1-based rank in the owner's full list.
    pub rank: usize,
    /// 1-based, dense, counted from the top of the window.
    pub window_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeWindow {
    pub owner: String,
    pub center_doc: String,
    pub center_rank: usize,
    /// Ascending rank; never contains the center.
    pub members: Vec<WindowMember>,
    pub w_size: usize,
}

impl NegativeWindow {
    pub fn member(&self, doc_id: &str) -> Option<&WindowMember> {
        self.members.iter().find(|m| m.doc_id == doc_id)
    }
}

/// Documents at ranks `[c - w/2, c + w/2]` around the center rank `c`,
/// minus the center, clipped to the list.
pub fn extract_window(list: &RankingList, center_doc: &str, w_size: usize) -> Result<NegativeWindow> {
    if w_size < 2 || w_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!("w_size must be even and >= 2, got {w_size}")));
    }
    let center_rank = list
        .rank_of(center_doc)
        .ok_or_else(|| Error::UnknownDoc(center_doc.to_string()))?;
    let half = w_size / 2;
    let lo = center_rank.saturating_sub(half).max(1);
    let hi = (center_rank + half).min(list.len());
    let members = (lo..=hi)
        .filter(|&r| r != center_rank)
        .enumerate()
        .map(|(i, r)| WindowMember {
            doc_id: list.doc_ids[r - 1].clone(),
            rank: r,
            window_pos: i + 1,
        })
        .collect();
    Ok(NegativeWindow {
        owner: list.query_id.clone(),
        center_doc: center_doc.to_string(),
        center_rank,
        members,
        w_size,
    })
}

/// Which part of a window the clicked document of `q_c` must fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Band {
    /// Bottom third: ranked well below the window center.
    Low,
    /// Middle third, including the positions adjacent to the center.
    #[default]
    Medium,
    /// Top third: ranked well above the window center.
    High,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Low, Band::Medium, Band::High];

    /// Band of a document sitting `offset` ranks from the center (negative
    /// means above it) in a window of nominal size `w_size`.
    pub fn classify(offset: isize, w_size: usize) -> Band {
        debug_assert!(offset != 0);
        let half = (w_size / 2) as isize;
        // nominal position 1..=w_size, as if the window were never clipped
        let p = (offset + half + isize::from(offset < 0)) as usize;
        if 3 * p <= w_size {
            Band::High
        } else if 3 * (p - 1) >= 2 * w_size {
            Band::Low
        } else {
            Band::Medium
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Band::Low),
            "medium" => Ok(Band::Medium),
            "high" => Ok(Band::High),
            other => Err(Error::InvalidArgument(format!("unknown band `{other}`"))),
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Low => "low",
            Band::Medium => "medium",
            Band::High => "high",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguousMatch {
    pub source: String,
    pub matched: String,
    /// Window position of the source's clicked document.
    pub pos: usize,
    /// `|rank(d_c) - rank(d_c')|` in the matched query's list.
    pub ambiguity: usize,
    pub margin: f64,
}

/// `(pos / w_size) * 2 * mean_margin`.
pub fn ambiguous_margin(pos: usize, w_size: usize, mean_margin: f64) -> Result<f64> {
    if pos == 0 || pos > w_size {
        return Err(Error::PositionOutOfRange { pos, w_size });
    }
    if !(mean_margin > 0.0) {
        return Err(Error::InvalidArgument("mean margin must be > 0".into()));
    }
    Ok(pos as f64 / w_size as f64 * 2.0 * mean_margin)
}

struct OwnedWindow {
    window: NegativeWindow,
    session_id: String,
    tokens: Vec<String>,
}

/// All windows of one backend, with a reverse map from member document to
/// the windows containing it.
pub struct WindowIndex {
    windows: Vec<OwnedWindow>,
    by_doc: HashMap<String, Vec<(usize, usize)>>,
    w_size: usize,
}

impl WindowIndex {
    /// One window per clicked turn of `log` that has a list in `lists`.
    pub fn build(lists: &BTreeMap<String, RankingList>, log: &SearchLog, w_size: usize) -> Result<Self> {
        let owners: Vec<(&str, &str, &[String], &str)> = log
            .sessions
            .iter()
            .flat_map(|s| s.turns.iter().map(move |t| (s, t)))
            .filter_map(|(s, t)| {
                let click = t.first_click.as_deref()?;
                Some((s.session_id.as_str(), t.query_id.as_str(), t.tokens.as_slice(), click))
            })
            .filter(|(_, q, _, _)| lists.contains_key(*q))
            .collect();
        let windows: Vec<OwnedWindow> = owners
            .par_iter()
            .map(|&(sid, qid, tokens, click)| {
                Ok(OwnedWindow {
                    window: extract_window(&lists[qid], click, w_size)?,
                    session_id: sid.to_string(),
                    tokens: tokens.to_vec(),
                })
            })
            .collect::<Result<_>>()?;
        let mut by_doc: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for (wi, w) in windows.iter().enumerate() {
            for (mi, m) in w.window.members.iter().enumerate() {
                by_doc.entry(m.doc_id.clone()).or_default().push((wi, mi));
            }
        }
        Ok(WindowIndex {
            windows,
            by_doc,
            w_size,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn w_size(&self) -> usize {
        self.w_size
    }

    pub fn windows(&self) -> impl Iterator<Item = &NegativeWindow> {
        self.windows.iter().map(|w| &w.window)
    }

    /// Every qualifying match for the context, before band filtering and
    /// truncation, paired with its band.
    fn qualifying(&self, ctx: &SearchContext, mean_margin: f64) -> Result<Vec<(Band, AmbiguousMatch)>> {
        let d_c = ctx.primary_click();
        let Some(hits) = self.by_doc.get(d_c) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for &(wi, mi) in hits {
            let ow = &self.windows[wi];
            if ow.window.owner == ctx.current.query_id
                || ow.session_id == ctx.session_id
                || ow.tokens == ctx.current.tokens
            {
                continue;
            }
            let m = &ow.window.members[mi];
            let offset = m.rank as isize - ow.window.center_rank as isize;
            out.push((
                Band::classify(offset, self.w_size),
                AmbiguousMatch {
                    source: ctx.current.query_id.clone(),
                    matched: ow.window.owner.clone(),
                    pos: m.window_pos,
                    ambiguity: offset.unsigned_abs(),
                    margin: ambiguous_margin(m.window_pos, self.w_size, mean_margin)?,
                },
            ));
        }
        Ok(out)
    }
}

/// Up to `k` ambiguous queries for the context's first click, restricted to
/// `band`, most ambiguous first (ties by query id). Candidate owners must be
/// a different query, from a different session, with different text.
pub fn mine_ambiguous(
    ctx: &SearchContext,
    index: &WindowIndex,
    k: usize,
    band: Band,
    mean_margin: f64,
) -> Result<Vec<AmbiguousMatch>> {
    let mut matches: Vec<AmbiguousMatch> = index
        .qualifying(ctx, mean_margin)?
        .into_iter()
        .filter(|(b, _)| *b == band)
        .map(|(_, m)| m)
        .collect();
    matches.sort_by(|a, b| a.ambiguity.cmp(&b.ambiguity).then_with(|| a.matched.cmp(&b.matched)));
    matches.truncate(k);
    Ok(matches)
}

/// [`mine_ambiguous`] over many contexts, keyed by source query id.
pub fn mine_all(
    contexts: &[SearchContext],
    index: &WindowIndex,
    k: usize,
    band: Band,
    mean_margin: f64,
) -> Result<BTreeMap<String, Vec<AmbiguousMatch>>> {
    let mined: Vec<(String, Vec<AmbiguousMatch>)> = contexts
        .par_iter()
        .map(|c| Ok((c.current.query_id.clone(), mine_ambiguous(c, index, k, band, mean_margin)?)))
        .collect::<Result<_>>()?;
    Ok(mined.into_iter().collect())
}

const TSV_HEADER: &str = "source_query_id\tmatched_query_id\tpos\tambiguity\tmargin";

pub fn write_matches(path: &Path, mined: &BTreeMap<String, Vec<AmbiguousMatch>>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{TSV_HEADER}").map_err(io)?;
    for m in mined.values().flatten() {
        writeln!(w, "{}\t{}\t{}\t{}\t{}", m.source, m.matched, m.pos, m.ambiguity, m.margin).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_matches(path: &Path) -> Result<BTreeMap<String, Vec<AmbiguousMatch>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<String, Vec<AmbiguousMatch>> = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if n == 0 && line == TSV_HEADER || line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line: n + 1,
            message: what.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let m = AmbiguousMatch {
            source: f[0].to_string(),
            matched: f[1].to_string(),
            pos: f[2].parse().map_err(|_| bad("bad pos"))?,
            ambiguity: f[3].parse().map_err(|_| bad("bad ambiguity"))?,
            margin: f[4].parse().map_err(|_| bad("bad margin"))?,
        };
        out.entry(m.source.clone()).or_default().push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{derive_contexts, SearchLog};

    fn list(n: usize) -> RankingList {
        RankingList {
            query_id: "q".into(),
            doc_ids: (1..=n).map(|i| format!("d{i}")).collect(),
            scores: (1..=n).map(|i| -(i as f64)).collect(),
        }
    }

    fn ranks(w: &NegativeWindow) -> Vec<usize> {
        w.members.iter().map(|m| m.rank).collect()
    }

    #[test]
    fn window_around_center() {
        let w = extract_window(&list(7), "d4", 4).unwrap();
        assert_eq!(ranks(&w), [2, 3, 5, 6]);
        assert_eq!(w.members.iter().map(|m| m.window_pos).collect::<Vec<_>>(), [1, 2, 3, 4]);
        assert_eq!(w.center_rank, 4);
    }

    #[test]
    fn window_clipped_at_top_and_full() {
        assert_eq!(ranks(&extract_window(&list(7), "d1", 4).unwrap()), [2, 3]);
        assert_eq!(ranks(&extract_window(&list(7), "d7", 4).unwrap()), [5, 6]);
        let full = extract_window(&list(5), "d3", 10).unwrap();
        assert_eq!(ranks(&full), [1, 2, 4, 5]);
    }

    #[test]
    fn window_errors() {
        assert!(matches!(extract_window(&list(5), "zz", 4), Err(Error::UnknownDoc(_))));
        assert!(extract_window(&list(5), "d1", 3).is_err());
        assert!(extract_window(&list(5), "d1", 0).is_err());
    }

    #[test]
    fn margin_formula() {
        assert!((ambiguous_margin(25, 50, 0.2).unwrap() - 0.2).abs() < 1e-15);
        assert!((ambiguous_margin(50, 50, 0.2).unwrap() - 0.4).abs() < 1e-15);
        for (w, m) in [(2, 0.1), (50, 0.2), (10, 0.7)] {
            assert!((ambiguous_margin(w / 2, w, m).unwrap() - m).abs() < 1e-15);
        }
        assert!(matches!(ambiguous_margin(0, 50, 0.2), Err(Error::PositionOutOfRange { .. })));
        assert!(matches!(ambiguous_margin(51, 50, 0.2), Err(Error::PositionOutOfRange { .. })));
        assert!(ambiguous_margin(1, 50, 0.0).is_err());
    }

    #[test]
    fn margin_strictly_increasing_and_below_th() {
        let v: Vec<f64> = (1..=50).map(|p| ambiguous_margin(p, 50, 0.2).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(v.iter().all(|&m| m > 0.0 && m <= 0.4 && m < 0.5));
    }

    #[test]
    fn bands_split_fifty_into_thirds() {
        let bands: Vec<Band> = (-25..=25).filter(|&o| o != 0).map(|o| Band::classify(o, 50)).collect();
        let count = |b| bands.iter().filter(|&&x| x == b).count();
        assert_eq!((count(Band::High), count(Band::Medium), count(Band::Low)), (16, 18, 16));
        assert_eq!(Band::classify(-1, 50), Band::Medium);
        assert_eq!(Band::classify(1, 50), Band::Medium);
        assert_eq!(Band::classify(-25, 50), Band::High);
        assert_eq!(Band::classify(25, 50), Band::Low);
        assert_eq!(Band::classify(-10, 50), Band::High);
        assert_eq!(Band::classify(-9, 50), Band::Medium);
        assert_eq!(Band::classify(9, 50), Band::Medium);
        assert_eq!(Band::classify(10, 50), Band::Low);
    }

    fn log_from(lines: &[&str]) -> SearchLog {
        let mut log = SearchLog::from_reader(lines.join("\n").as_bytes()).unwrap();
        log.tokenize_all();
        log
    }

    fn sess(sid: &str, turns: &[(&str, &str, &str)]) -> String {
        let t: Vec<String> = turns
            .iter()
            .map(|(q, text, d)| {
                format!(
                    r#"{{"candidates":[{{"clicked":true,"doc_id":"{d}","relevance":null,"title":"t {d}"}}],"query_id":"{q}","text":"{text}"}}"#
                )
            })
            .collect();
        format!(r#"{{"session_id":"{sid}","turns":[{}]}}"#, t.join(","))
    }

    fn ordered(query: &str, docs: &[&str]) -> RankingList {
        RankingList {
            query_id: query.into(),
            doc_ids: docs.iter().map(|d| d.to_string()).collect(),
            scores: (0..docs.len()).map(|i| -(i as f64)).collect(),
        }
    }

    #[test]
    fn mining_rules() {
        // q2 (current, clicked dB) has history q1; qx and qy own windows
        let log = log_from(&[
            &sess("s1", &[("q1", "alpha", "dA"), ("q2", "beta", "dB")]),
            &sess("s2", &[("qx", "gamma", "dX")]),
            &sess("s3", &[("qy", "delta", "dY"), ("qz", "beta", "dZ")]),
        ]);
        let docs = ["dA", "dB", "dX", "dY", "dZ", "dP", "dQ"];
        let mut lists = BTreeMap::new();
        // qx: dX rank 4, dB rank 1 -> offset -3
        lists.insert("qx".into(), ordered("qx", &["dB", "dP", "dQ", "dX", "dA", "dY", "dZ"]));
        // qy: dY rank 2, dB rank 3 -> offset +1
        lists.insert("qy".into(), ordered("qy", &["dP", "dY", "dB", "dX", "dA", "dQ", "dZ"]));
        // same session as the context -> excluded
        lists.insert("q1".into(), ordered("q1", &["dA", "dB", "dP", "dQ", "dX", "dY", "dZ"]));
        // same text as the current query -> excluded
        lists.insert("qz".into(), ordered("qz", &["dZ", "dB", "dP", "dQ", "dX", "dY", "dA"]));
        assert_eq!(docs.len(), lists["qx"].len());
        let idx = WindowIndex::build(&lists, &log, 6).unwrap();
        assert_eq!(idx.len(), 4);
        let ctx = derive_contexts(&log, true)
            .contexts
            .into_iter()
            .find(|c| c.query_id() == "q2")
            .unwrap();

        let all: Vec<AmbiguousMatch> = Band::ALL
            .iter()
            .flat_map(|&b| mine_ambiguous(&ctx, &idx, 10, b, 0.2).unwrap())
            .collect();
        let mut names: Vec<&str> = all.iter().map(|m| m.matched.as_str()).collect();
        names.sort();
        assert_eq!(names, ["qx", "qy"]);

        // w=6: offset -3 is nominal pos 1 -> high; offset +1 -> medium
        let high = mine_ambiguous(&ctx, &idx, 10, Band::High, 0.2).unwrap();
        assert_eq!(high.len(), 1);
        assert_eq!((high[0].matched.as_str(), high[0].pos, high[0].ambiguity), ("qx", 1, 3));
        let med = mine_ambiguous(&ctx, &idx, 10, Band::Medium, 0.2).unwrap();
        assert_eq!((med[0].matched.as_str(), med[0].pos, med[0].ambiguity), ("qy", 2, 1));
        assert!((med[0].margin - 2.0 / 6.0 * 0.4).abs() < 1e-15);
        assert_eq!(mine_ambiguous(&ctx, &idx, 0, Band::Medium, 0.2).unwrap().len(), 0);
    }

    #[test]
    fn no_window_contains_click() {
        let log = log_from(&[
            &sess("s1", &[("q1", "alpha", "dA"), ("q2", "beta", "dB")]),
            &sess("s2", &[("qx", "gamma", "dX")]),
        ]);
        let mut lists = BTreeMap::new();
        lists.insert("qx".into(), ordered("qx", &["dX", "dA", "dB"]));
        let idx = WindowIndex::build(&lists, &log, 2).unwrap();
        let ctx = derive_contexts(&log, true).contexts.remove(0);
        for b in Band::ALL {
            assert!(mine_ambiguous(&ctx, &idx, 4, b, 0.2).unwrap().is_empty());
        }
    }

    #[test]
    fn matches_tsv_round_trip() {
        let mut mined = BTreeMap::new();
        mined.insert(
            "q2".to_string(),
            vec![AmbiguousMatch {
                source: "q2".into(),
                matched: "q9".into(),
                pos: 17,
                ambiguity: 8,
                margin: ambiguous_margin(17, 50, 0.2).unwrap(),
            }],
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        write_matches(&p, &mined).unwrap();
        assert_eq!(read_matches(&p).unwrap(), mined);
    }
}
