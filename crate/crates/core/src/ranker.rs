//! Context-aware ranker.
//!
//! A search context and a candidate are laid out as one token sequence:
//!
//! ```text
//! [CLS] q1 [EOS] d1 [EOS] ... qn [EOS] dn [EOS] qc [EOS] [SEP] d [EOS] [SEP]
//! ```
//!
//! The model mean-pools the embeddings of every token and feeds the pooled
//! vector through a one-hidden-layer tanh MLP that emits a single real score.
//! Training minimizes per-query sums of pairwise hinge losses, each pair with
//! its own margin. Gradients are written out by hand.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::augment::TrainingPair;
use crate::corpus::{HistoryTurn, SearchContext, SearchLog};
use crate::error::{Error, Result};
use crate::retrieval::RankingList;
use crate::rng::seeded;
use crate::textproc::{Vocabulary, CLS_ID, EOS_ID, SEP_ID};

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_MAX_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceInput {
    pub ids: Vec<u32>,
    /// History pairs kept after truncation.
    pub history_pairs: usize,
    /// Index of the first current-query token.
    pub query_start: usize,
    /// Index of the first candidate token, right after the first `[SEP]`.
    pub doc_start: usize,
}

impl SequenceInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn render(&self, vocab: &Vocabulary) -> String {
        self.ids
            .iter()
            .map(|&i| vocab.term(i).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Lays out one context/candidate sequence, dropping whole history pairs,
/// oldest first, until it fits in `max_len` ids.
pub fn assemble_sequence(
    vocab: &Vocabulary,
    history: &[HistoryTurn],
    query: &[String],
    doc: &[String],
    max_len: usize,
) -> Result<SequenceInput> {
    let pair_len = |h: &HistoryTurn| h.query_tokens.len() + h.doc_tokens.len() + 2;
    let tail = query.len() + doc.len() + 4;
    let mut len = 1 + tail + history.iter().map(pair_len).sum::<usize>();
    let mut skip = 0;
    while len > max_len && skip < history.len() {
        len -= pair_len(&history[skip]);
        skip += 1;
    }
    if len > max_len {
        return Err(Error::Unfittable { needed: len, max_len });
    }
    let mut ids = Vec::with_capacity(len);
    ids.push(CLS_ID);
    for h in &history[skip..] {
        ids.extend(vocab.encode(&h.query_tokens));
        ids.push(EOS_ID);
        ids.extend(vocab.encode(&h.doc_tokens));
        ids.push(EOS_ID);
    }
    let query_start = ids.len();
    ids.extend(vocab.encode(query));
    ids.push(EOS_ID);
    ids.push(SEP_ID);
    let doc_start = ids.len();
    ids.extend(vocab.encode(doc));
    ids.push(EOS_ID);
    ids.push(SEP_ID);
    Ok(SequenceInput {
        ids,
        history_pairs: history.len() - skip,
        query_start,
        doc_start,
    })
}

/// Embedding table plus a `dim -> hidden -> 1` tanh MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    dim: usize,
    hidden: usize,
    vocab_size: usize,
    /// `vocab_size x dim`, row-major.
    emb: Vec<f64>,
    /// `hidden x dim`, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

struct Forward {
    pooled: Vec<f64>,
    hidden: Vec<f64>,
    score: f64,
}

impl RankerModel {
    pub fn zeros(vocab_size: usize, dim: usize, hidden: usize) -> Result<Self> {
        if vocab_size == 0 || dim == 0 || hidden == 0 {
            return Err(Error::InvalidArgument("model sizes must be positive".into()));
        }
        Ok(RankerModel {
            dim,
            hidden,
            vocab_size,
            emb: vec![0.0; vocab_size * dim],
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        })
    }

    /// Small uniform embeddings, Glorot-uniform MLP weights, zero biases.
    pub fn init(vocab_size: usize, dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(vocab_size, dim, hidden)?;
        let mut rng = seeded(seed);
        for w in &mut m.emb {
            *w = rng.gen_range(-0.1..0.1);
        }
        let a1 = (6.0 / (dim + hidden) as f64).sqrt();
        for w in &mut m.w1 {
            *w = rng.gen_range(-a1..a1);
        }
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        for w in &mut m.w2 {
            *w = rng.gen_range(-a2..a2);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn forward(&self, ids: &[u32]) -> Forward {
        let d = self.dim;
        let mut pooled = vec![0.0; d];
        for &id in ids {
            let row = &self.emb[id as usize * d..(id as usize + 1) * d];
            for (p, e) in pooled.iter_mut().zip(row) {
                *p += e;
            }
        }
        let inv = 1.0 / ids.len().max(1) as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let w = &self.w1[j * d..(j + 1) * d];
                (self.b1[j] + w.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>()).tanh()
            })
            .collect();
        let score = self.b2 + self.w2.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
        Forward { pooled, hidden, score }
    }

    pub fn score(&self, s: &SequenceInput) -> f64 {
        self.forward(&s.ids).score
    }

    /// Adds `upstream * d score / d params` for sequence `ids` into `g`.
    fn backward(&self, ids: &[u32], f: &Forward, upstream: f64, g: &mut Gradient) {
        let d = self.dim;
        g.b2 += upstream;
        let mut dx = vec![0.0; d];
        for j in 0..self.hidden {
            g.w2[j] += upstream * f.hidden[j];
            let dz = upstream * self.w2[j] * (1.0 - f.hidden[j] * f.hidden[j]);
            g.b1[j] += dz;
            let w = &self.w1[j * d..(j + 1) * d];
            let gw = &mut g.w1[j * d..(j + 1) * d];
            for k in 0..d {
                gw[k] += dz * f.pooled[k];
                dx[k] += dz * w[k];
            }
        }
        let inv = 1.0 / ids.len().max(1) as f64;
        for &id in ids {
            let row = &mut g.emb[id as usize * d..(id as usize + 1) * d];
            g.touched.insert(id);
            for (r, x) in row.iter_mut().zip(&dx) {
                *r += x * inv;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.emb.len() + self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameter `i` in the flat order emb, w1, b1, w2, b2.
    pub fn param(&self, i: usize) -> f64 {
        let mut i = i;
        for block in [&self.emb, &self.w1, &self.b1, &self.w2] {
            if i < block.len() {
                return block[i];
            }
            i -= block.len();
        }
        assert_eq!(i, 0, "parameter index out of range");
        self.b2
    }

    pub fn set_param(&mut self, i: usize, v: f64) {
        let mut i = i;
        for block in [&mut self.emb, &mut self.w1, &mut self.b1, &mut self.w2] {
            if i < block.len() {
                block[i] = v;
                return;
            }
            i -= block.len();
        }
        assert_eq!(i, 0, "parameter index out of range");
        self.b2 = v;
    }

    pub fn is_finite(&self) -> bool {
        (0..self.param_count()).all(|i| self.param(i).is_finite())
    }

    fn apply(&mut self, g: &Gradient, lr: f64, weight_decay: f64) {
        if weight_decay > 0.0 {
            let keep = 1.0 - lr * weight_decay;
            for w in self.emb.iter_mut().chain(&mut self.w1).chain(&mut self.b1).chain(&mut self.w2) {
                *w *= keep;
            }
            self.b2 *= keep;
        }
        let d = self.dim;
        for &id in &g.touched {
            let r = id as usize * d..(id as usize + 1) * d;
            for (w, x) in self.emb[r.clone()].iter_mut().zip(&g.emb[r]) {
                *w -= lr * x;
            }
        }
        for (w, x) in self.w1.iter_mut().zip(&g.w1) {
            *w -= lr * x;
        }
        for (w, x) in self.b1.iter_mut().zip(&g.b1) {
            *w -= lr * x;
        }
        for (w, x) in self.w2.iter_mut().zip(&g.w2) {
            *w -= lr * x;
        }
        self.b2 -= lr * g.b2;
    }
}

/// Gradient with the same layout as [`RankerModel`].
#[derive(Debug, Clone)]
pub struct Gradient {
    dim: usize,
    emb: Vec<f64>,
    /// Embedding rows with nonzero entries, in first-touch order.
    touched: indexset::Touched,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

mod indexset {
    use std::collections::HashSet;

    #[derive(Debug, Clone, Default)]
    pub struct Touched {
        order: Vec<u32>,
        seen: HashSet<u32>,
    }

    impl Touched {
        pub fn insert(&mut self, id: u32) {
            if self.seen.insert(id) {
                self.order.push(id);
            }
        }

        pub fn clear(&mut self) {
            self.order.clear();
            self.seen.clear();
        }
    }

    impl<'a> IntoIterator for &'a Touched {
        type Item = &'a u32;
        type IntoIter = std::slice::Iter<'a, u32>;

        fn into_iter(self) -> Self::IntoIter {
            self.order.iter()
        }
    }
}

impl Gradient {
    pub fn zeros_like(m: &RankerModel) -> Self {
        Gradient {
            dim: m.dim,
            emb: vec![0.0; m.emb.len()],
            touched: Default::default(),
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: 0.0,
        }
    }

    fn reset(&mut self) {
        let d = self.dim;
        for &id in &self.touched {
            self.emb[id as usize * d..(id as usize + 1) * d].fill(0.0);
        }
        self.touched.clear();
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2 = 0.0;
    }

    /// Flat view in the order of [`RankerModel::param`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.emb.len() + self.w1.len() + 2 * self.b1.len() + 1);
        v.extend(&self.emb);
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }
}

pub fn hinge_loss(p_pos: f64, p_neg: f64, margin: f64) -> f64 {
    (margin - p_pos + p_neg).max(0.0)
}

/// A training pair laid out as two sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    /// Dense index of the pair's query, in first-seen order.
    pub group: usize,
    pub margin: f64,
    pub term_level: bool,
    pub pos: SequenceInput,
    pub neg: SequenceInput,
}

pub fn encode_pairs(pairs: &[TrainingPair], vocab: &Vocabulary, max_len: usize) -> Result<Vec<EncodedPair>> {
    let mut groups = std::collections::HashMap::new();
    let group_ids: Vec<usize> = pairs
        .iter()
        .map(|p| {
            let n = groups.len();
            *groups.entry(p.query_id.as_str()).or_insert(n)
        })
        .collect();
    pairs
        .par_iter()
        .zip(group_ids)
        .map(|(p, group)| {
            Ok(EncodedPair {
                group,
                margin: p.margin,
                term_level: p.is_term_level(),
                pos: assemble_sequence(vocab, &p.history, &p.positive.query, &p.positive.doc, max_len)?,
                neg: assemble_sequence(vocab, &p.history, &p.negative.query, &p.negative.doc, max_len)?,
            })
        })
        .collect()
}

/// Sum of hinge losses over the pairs of one query.
pub fn query_loss(model: &RankerModel, pairs: &[EncodedPair]) -> f64 {
    pairs
        .iter()
        .map(|p| hinge_loss(model.score(&p.pos), model.score(&p.neg), p.margin))
        .sum()
}

/// Sum of per-query losses over every pair.
pub fn total_loss(model: &RankerModel, pairs: &[EncodedPair]) -> f64 {
    query_loss(model, pairs)
}

/// `weight * sum of hinge losses` and its gradient. The hinge subgradient at
/// the kink is 0.
pub fn loss_and_gradient(model: &RankerModel, pairs: &[EncodedPair], weight: f64) -> (f64, Gradient) {
    let mut g = Gradient::zeros_like(model);
    let loss = accumulate(model, pairs.iter(), weight, &mut g);
    (loss, g)
}

fn accumulate<'a>(
    model: &RankerModel,
    pairs: impl Iterator<Item = &'a EncodedPair>,
    weight: f64,
    g: &mut Gradient,
) -> f64 {
    let mut loss = 0.0;
    for p in pairs {
        let fp = model.forward(&p.pos.ids);
        let fn_ = model.forward(&p.neg.ids);
        let l = p.margin - fp.score + fn_.score;
        if l > 0.0 {
            loss += weight * l;
            model.backward(&p.pos.ids, &fp, -weight, g);
            model.backward(&p.neg.ids, &fn_, weight, g);
        }
    }
    loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Peak learning rate. Transformer-scale fine-tuning would use 4e-5 over
    /// three epochs; the pooled model needs a much larger step.
    pub lr: f64,
    /// Decoupled: each step scales every weight by `1 - lr * weight_decay`.
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Decay the learning rate linearly to 0 over all steps.
    pub linear_decay: bool,
    /// Train term-level pairs only in the final epoch, after the others.
    pub curriculum: bool,
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    Sgd,
    /// Adam with decoupled weight decay.
    #[default]
    AdamW,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adamw" => Ok(Optimizer::AdamW),
            _ => Err(Error::InvalidArgument(format!("unknown optimizer `{s}`"))),
        }
    }
}

impl std::fmt::Display for Optimizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::AdamW => "adamw",
        })
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lr: 0.01,
            weight_decay: 1e-4,
            batch_size: 64,
            seed: 0,
            linear_decay: true,
            curriculum: false,
            optimizer: Optimizer::AdamW,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr={} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// Pair order for each epoch.
fn epoch_orders(pairs: &[EncodedPair], cfg: &TrainConfig) -> Vec<Vec<usize>> {
    let mut rng = seeded(cfg.seed);
    let (term, other): (Vec<usize>, Vec<usize>) = (0..pairs.len()).partition(|&i| pairs[i].term_level);
    (0..cfg.epochs)
        .map(|e| {
            if !cfg.curriculum {
                let mut all: Vec<usize> = (0..pairs.len()).collect();
                all.shuffle(&mut rng);
                return all;
            }
            let mut order = other.clone();
            order.shuffle(&mut rng);
            if e + 1 == cfg.epochs {
                let mut t = term.clone();
                t.shuffle(&mut rng);
                order.extend(t);
            }
            order
        })
        .collect()
}

/// Mini-batch gradient descent with decoupled weight decay. Within a batch
/// losses are summed per query and averaged over the batch's queries.
pub fn train(mut model: RankerModel, pairs: &[EncodedPair], cfg: &TrainConfig) -> Result<RankerModel> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::NoTrainingPairs);
    }
    let orders = epoch_orders(pairs, cfg);
    let total_steps: usize = orders.iter().map(|o| o.len().div_ceil(cfg.batch_size)).sum();
    let mut g = Gradient::zeros_like(&model);
    let mut adam = (cfg.optimizer == Optimizer::AdamW).then(|| Adam::new(&model));
    let mut step = 0;
    for order in &orders {
        for batch in order.chunks(cfg.batch_size) {
            let queries: HashSet<usize> = batch.iter().map(|&i| pairs[i].group).collect();
            let weight = 1.0 / queries.len() as f64;
            g.reset();
            accumulate(&model, batch.iter().map(|&i| &pairs[i]), weight, &mut g);
            let lr = if cfg.linear_decay {
                cfg.lr * (1.0 - step as f64 / total_steps as f64)
            } else {
                cfg.lr
            };
            match adam.as_mut() {
                Some(a) => a.step(&mut model, &g, lr, cfg.weight_decay),
                None => model.apply(&g, lr, cfg.weight_decay),
            }
            step += 1;
        }
    }
    Ok(model)
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adam moments. Embedding rows are updated lazily: only rows present in the
/// batch move, decay included.
struct Adam {
    t: i32,
    m: Gradient,
    v: Gradient,
}

fn adam_block(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, wd: f64, bc1: f64, bc2: f64) {
    for i in 0..w.len() {
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
        let update = (m[i] / bc1) / ((v[i] / bc2).sqrt() + ADAM_EPS);
        w[i] -= lr * (update + wd * w[i]);
    }
}

impl Adam {
    fn new(model: &RankerModel) -> Self {
        Adam {
            t: 0,
            m: Gradient::zeros_like(model),
            v: Gradient::zeros_like(model),
        }
    }

    fn step(&mut self, model: &mut RankerModel, g: &Gradient, lr: f64, wd: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t);
        let bc2 = 1.0 - BETA2.powi(self.t);
        let d = model.dim;
        for &id in &g.touched {
            let r = id as usize * d..(id as usize + 1) * d;
            adam_block(
                &mut model.emb[r.clone()],
                &g.emb[r.clone()],
                &mut self.m.emb[r.clone()],
                &mut self.v.emb[r],
                lr,
                wd,
                bc1,
                bc2,
            );
        }
        adam_block(&mut model.w1, &g.w1, &mut self.m.w1, &mut self.v.w1, lr, wd, bc1, bc2);
        adam_block(&mut model.b1, &g.b1, &mut self.m.b1, &mut self.v.b1, lr, wd, bc1, bc2);
        adam_block(&mut model.w2, &g.w2, &mut self.m.w2, &mut self.v.w2, lr, wd, bc1, bc2);
        adam_block(
            std::slice::from_mut(&mut model.b2),
            &[g.b2],
            std::slice::from_mut(&mut self.m.b2),
            std::slice::from_mut(&mut self.v.b2),
            lr,
            wd,
            bc1,
            bc2,
        );
    }
}

/// Scores every candidate of the context's current turn.
pub fn rank_candidates(
    model: &RankerModel,
    vocab: &Vocabulary,
    log: &SearchLog,
    ctx: &SearchContext,
    max_len: usize,
) -> Result<RankingList> {
    if ctx.current.candidates.is_empty() {
        return Err(Error::NoCandidates {
            session_id: ctx.session_id.clone(),
            query_id: ctx.current.query_id.clone(),
        });
    }
    let scored = ctx
        .current
        .candidates
        .iter()
        .map(|c| {
            let doc = &log.document(&c.doc_id)?.title_tokens;
            let s = assemble_sequence(vocab, &ctx.history, &ctx.current.tokens, doc, max_len)?;
            Ok((c.doc_id.clone(), model.score(&s)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankingList::from_scored(ctx.current.query_id.clone(), scored))
}

/// [`rank_candidates`] over many contexts in parallel, in input order.
pub fn rank_all(
    model: &RankerModel,
    vocab: &Vocabulary,
    log: &SearchLog,
    contexts: &[SearchContext],
    max_len: usize,
) -> Result<Vec<RankingList>> {
    contexts
        .par_iter()
        .map(|c| rank_candidates(model, vocab, log, c, max_len))
        .collect()
}

const MAGIC: &[u8; 4] = b"SRNK";
const VERSION: u32 = 1;

impl RankerModel {
    /// Header `magic, version, dim, hidden, |V|` as little-endian u32, then
    /// the blocks emb, w1, b1, w2, b2 as little-endian f32.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.dim as u32, self.hidden as u32, self.vocab_size as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for i in 0..self.param_count() {
            w.write_all(&(self.param(i) as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if buf.len() < 20 || &buf[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u = |i: usize| u32::from_le_bytes(buf[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if u(0) != VERSION as usize {
            return Err(Error::Checkpoint(format!("unsupported version {}", u(0))));
        }
        let mut m = Self::zeros(u(3), u(1), u(2)).map_err(|_| bad("zero-sized model"))?;
        let body = &buf[20..];
        if body.len() != 4 * m.param_count() {
            return Err(Error::Checkpoint(format!(
                "expected {} weights, found {} bytes",
                m.param_count(),
                body.len()
            )));
        }
        for (i, c) in body.chunks_exact(4).enumerate() {
            m.set_param(i, f32::from_le_bytes(c.try_into().unwrap()) as f64);
        }
        if !m.is_finite() {
            return Err(bad("non-finite weight"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_checkpoint(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(BufReader::new(file))
    }
}
