//! Dual-encoder retriever: one embedding table shared by queries and
//! documents, mean pooling, dot-product relevance. Trained with in-batch
//! negatives.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::corpus::SearchLog;
use crate::error::{Error, Result};
use crate::retrieval::Relevance;
use crate::rng::seeded;
use crate::textproc::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEncoderConfig {
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DualEncoderConfig {
    fn default() -> Self {
        DualEncoderConfig {
            dim: 64,
            epochs: 5,
            lr: 0.05,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoder {
    dim: usize,
    vocab_size: usize,
    /// Row-major `vocab_size x dim`.
    weights: Vec<f64>,
}

/// A (query ids, document ids) training example.
pub type IdPair = (Vec<u32>, Vec<u32>);

impl DualEncoder {
    pub fn zeros(vocab_size: usize, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("encoder dim must be >= 2".into()));
        }
        Ok(DualEncoder {
            dim,
            vocab_size,
            weights: vec![0.0; vocab_size * dim],
        })
    }

    /// Uniform in `[-0.5/dim, 0.5/dim]`.
    pub fn init(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut enc = Self::zeros(vocab_size, dim)?;
        let mut rng = seeded(seed);
        let a = 0.5 / dim as f64;
        for w in &mut enc.weights {
            *w = rng.gen_range(-a..=a);
        }
        Ok(enc)
    }

    pub fn from_weights(vocab_size: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if dim < 2 || weights.len() != vocab_size * dim {
            return Err(Error::InvalidArgument("weight table shape mismatch".into()));
        }
        Ok(DualEncoder {
            dim,
            vocab_size,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.weights[i..i + self.dim]
    }

    /// Mean of the token rows; zero vector for an empty sequence.
    pub fn pool(&self, ids: &[u32]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        if ids.is_empty() {
            return v;
        }
        for &id in ids {
            for (a, b) in v.iter_mut().zip(self.row(id)) {
                *a += b;
            }
        }
        let inv = 1.0 / ids.len() as f64;
        v.iter_mut().for_each(|x| *x *= inv);
        v
    }

    pub fn score(&self, query: &[u32], doc: &[u32]) -> f64 {
        dot(&self.pool(query), &self.pool(doc))
    }

    /// Mean in-batch softmax cross-entropy: query `i` should pick document `i`
    /// among all documents of the batch.
    pub fn batch_loss(&self, batch: &[IdPair]) -> f64 {
        let (q, d) = self.pool_batch(batch);
        let n = batch.len();
        let mut loss = 0.0;
        for i in 0..n {
            let logits: Vec<f64> = (0..n).map(|j| dot(&q[i], &d[j])).collect();
            loss += log_sum_exp(&logits) - logits[i];
        }
        loss / n as f64
    }

    fn pool_batch(&self, batch: &[IdPair]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        batch
            .iter()
            .map(|(q, d)| (self.pool(q), self.pool(d)))
            .unzip()
    }

    /// One SGD step on [`DualEncoder::batch_loss`].
    pub fn step(&mut self, batch: &[IdPair], lr: f64) {
        let n = batch.len();
        if n == 0 {
            return;
        }
        let (q, d) = self.pool_batch(batch);
        let mut grad_q = vec![vec![0.0; self.dim]; n];
        let mut grad_d = vec![vec![0.0; self.dim]; n];
        let inv_n = 1.0 / n as f64;
        for i in 0..n {
            let logits: Vec<f64> = (0..n).map(|j| dot(&q[i], &d[j])).collect();
            let lse = log_sum_exp(&logits);
            for j in 0..n {
                let g = ((logits[j] - lse).exp() - f64::from(u8::from(i == j))) * inv_n;
                for k in 0..self.dim {
                    grad_q[i][k] += g * d[j][k];
                    grad_d[j][k] += g * q[i][k];
                }
            }
        }
        // gradients are taken at the pre-step weights, then applied together
        let mut updates: Vec<(u32, f64, &[f64])> = Vec::new();
        for (i, (qi, di)) in batch.iter().enumerate() {
            if !qi.is_empty() {
                let s = 1.0 / qi.len() as f64;
                updates.extend(qi.iter().map(|&id| (id, s, grad_q[i].as_slice())));
            }
            if !di.is_empty() {
                let s = 1.0 / di.len() as f64;
                updates.extend(di.iter().map(|&id| (id, s, grad_d[i].as_slice())));
            }
        }
        for (id, scale, g) in updates {
            let start = id as usize * self.dim;
            for (w, gk) in self.weights[start..start + self.dim].iter_mut().zip(g) {
                *w -= lr * scale * gk;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Trains on (query, document) id pairs. Zero epochs returns the seeded
/// initialization.
pub fn train_dual_encoder(
    pairs: &[IdPair],
    vocab_size: usize,
    config: &DualEncoderConfig,
) -> Result<DualEncoder> {
    if pairs.is_empty() {
        return Err(Error::NoTrainingPairs);
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    let mut enc = DualEncoder::init(vocab_size, config.dim, config.seed)?;
    let mut rng = seeded(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<IdPair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            enc.step(&batch, config.lr);
        }
    }
    Ok(enc)
}

/// (query, first click) pairs of every turn in the log, encoded with `vocab`.
pub fn click_pairs(log: &SearchLog, vocab: &Vocabulary) -> Vec<IdPair> {
    let mut out = Vec::new();
    for s in &log.sessions {
        for t in &s.turns {
            let Some(d) = t.first_click.as_ref().and_then(|d| log.documents.get(d)) else {
                continue;
            };
            out.push((vocab.encode(&t.tokens), vocab.encode(&d.title_tokens)));
        }
    }
    out
}

/// A trained encoder with the document side pre-pooled for exhaustive
/// scoring.
pub struct DenseIndex<'a> {
    encoder: &'a DualEncoder,
    vocab: &'a Vocabulary,
    doc_ids: Vec<String>,
    doc_vecs: Vec<Vec<f64>>,
}

impl<'a> DenseIndex<'a> {
    pub fn build<'d, I>(encoder: &'a DualEncoder, vocab: &'a Vocabulary, docs: I) -> Self
    where
        I: IntoIterator<Item = (&'d str, &'d [String])>,
    {
        let (doc_ids, doc_vecs) = docs
            .into_iter()
            .map(|(id, toks)| (id.to_string(), encoder.pool(&vocab.encode(toks))))
            .unzip();
        DenseIndex {
            encoder,
            vocab,
            doc_ids,
            doc_vecs,
        }
    }
}

impl Relevance for DenseIndex<'_> {
    fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    fn score_all(&self, query: &[String]) -> Vec<f64> {
        let q = self.encoder.pool(&self.vocab.encode(query));
        self.doc_vecs.iter().map(|d| dot(&q, d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_pairs() -> Vec<IdPair> {
        // ids 7.. are ordinary terms; the two pairs share no tokens
        vec![(vec![7, 8], vec![9, 10, 11]), (vec![12, 13], vec![14, 15])]
    }

    /// Pooled dot product written out index by index.
    fn oracle_score(enc: &DualEncoder, q: &[u32], d: &[u32]) -> f64 {
        let dim = enc.dim();
        let w = enc.weights();
        let mut total = 0.0;
        for k in 0..dim {
            let qk: f64 = q.iter().map(|&i| w[i as usize * dim + k]).sum::<f64>() / q.len() as f64;
            let dk: f64 = d.iter().map(|&i| w[i as usize * dim + k]).sum::<f64>() / d.len() as f64;
            total += qk * dk;
        }
        total
    }

    #[test]
    fn zero_encoder_scores_zero() {
        let enc = DualEncoder::zeros(20, 4).unwrap();
        assert_eq!(enc.score(&[7, 8], &[9]), 0.0);
    }

    #[test]
    fn rejects_tiny_dim() {
        assert!(DualEncoder::zeros(10, 1).is_err());
    }

    #[test]
    fn self_score_is_squared_norm() {
        let enc = DualEncoder::init(20, 8, 3).unwrap();
        let ids = [7, 9, 11];
        let p = enc.pool(&ids);
        let s = enc.score(&ids, &ids);
        assert!(s >= 0.0);
        assert!((s - dot(&p, &p)).abs() < 1e-15);
    }

    #[test]
    fn score_matches_oracle_and_is_symmetric() {
        use rand::Rng;
        let mut rng = seeded(11);
        let enc = DualEncoder::init(50, 16, 5).unwrap();
        for _ in 0..20 {
            let q: Vec<u32> = (0..3).map(|_| rng.gen_range(0..50)).collect();
            let d: Vec<u32> = (0..3).map(|_| rng.gen_range(0..50)).collect();
            let s = enc.score(&q, &d);
            assert!((s - oracle_score(&enc, &q, &d)).abs() < 1e-12);
            assert_eq!(s, enc.score(&d, &q));
        }
    }

    #[test]
    fn init_range_and_zero_epochs() {
        let cfg = DualEncoderConfig {
            dim: 8,
            epochs: 0,
            seed: 4,
            ..Default::default()
        };
        let enc = train_dual_encoder(&toy_pairs(), 20, &cfg).unwrap();
        assert_eq!(enc, DualEncoder::init(20, 8, 4).unwrap());
        assert!(enc.weights().iter().all(|w| w.abs() <= 0.5 / 8.0));
    }

    #[test]
    fn no_pairs_is_an_error() {
        assert!(matches!(
            train_dual_encoder(&[], 10, &DualEncoderConfig::default()),
            Err(Error::NoTrainingPairs)
        ));
    }

    #[test]
    fn training_is_bit_reproducible() {
        let cfg = DualEncoderConfig {
            dim: 8,
            epochs: 20,
            lr: 0.5,
            batch_size: 2,
            seed: 9,
        };
        let a = train_dual_encoder(&toy_pairs(), 20, &cfg).unwrap();
        let b = train_dual_encoder(&toy_pairs(), 20, &cfg).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn loss_decreases_over_first_steps() {
        let pairs = toy_pairs();
        let mut enc = DualEncoder::init(20, 8, 1).unwrap();
        let mut prev = enc.batch_loss(&pairs);
        for _ in 0..10 {
            enc.step(&pairs, 0.05);
            let l = enc.batch_loss(&pairs);
            assert!(l < prev, "{l} !< {prev}");
            prev = l;
        }
    }

    #[test]
    fn separable_toy_corpus_ranks_own_doc_first() {
        let pairs = toy_pairs();
        let cfg = DualEncoderConfig {
            dim: 8,
            epochs: 200,
            lr: 0.05,
            batch_size: 2,
            seed: 2,
        };
        let enc = train_dual_encoder(&pairs, 20, &cfg).unwrap();
        // full 2x2 score matrix
        for (i, (q, _)) in pairs.iter().enumerate() {
            let own = enc.score(q, &pairs[i].1);
            let other = enc.score(q, &pairs[1 - i].1);
            assert!(own > other, "query {i}: {own} <= {other}");
        }
    }
}
