//! End-to-end stages shared by the command line and the experiments:
//! split, vocabulary, ranking lists, mining, augmentation, training and
//! evaluation.

use std::collections::BTreeMap;

use crate::augment::{build_training_set, AugmentConfig, AugmentSources, QueryPool, TrainingPair, TrainingSet};
use crate::corpus::{derive_contexts, SearchLog};
use crate::error::Result;
use crate::evalkit::{evaluate, EvalOptions, EvalRun, MetricsReport};
use crate::mining::{mine_all, AmbiguousMatch, Band, WindowIndex};
use crate::ranker::{encode_pairs, rank_all, train, RankerModel, TrainConfig, DEFAULT_HIDDEN, DEFAULT_MAX_LEN};
use crate::retrieval::{
    build_ranking_lists, clicked_queries, dense::click_pairs, doc_table, train_dual_encoder, Backend, Bm25Index,
    Bm25Params, DenseIndex, DualEncoderConfig, RankingList,
};
use crate::rng::stable_hash;
use crate::textproc::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Share of sessions held out for evaluation.
    pub test_fraction: f64,
    pub min_freq: u64,
    pub backend: Backend,
    pub band: Band,
    pub dense: DualEncoderConfig,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub dim: usize,
    pub hidden: usize,
    pub max_len: usize,
    pub eval: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            test_fraction: 0.2,
            min_freq: 1,
            backend: Backend::Dense,
            band: Band::Medium,
            dense: DualEncoderConfig::default(),
            augment: AugmentConfig::default(),
            train: TrainConfig::default(),
            dim: 64,
            hidden: DEFAULT_HIDDEN,
            max_len: DEFAULT_MAX_LEN,
            eval: EvalOptions::default(),
        }
    }
}

impl PipelineConfig {
    /// Propagates one seed to every stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dense.seed = seed;
        self.augment.seed = seed;
        self.train.seed = seed;
        self
    }
}

/// Deterministic session-level split into (train, test).
pub fn split_log(log: &SearchLog, test_fraction: f64, seed: u64) -> (SearchLog, SearchLog) {
    let cut = (test_fraction.clamp(0.0, 1.0) * 1e6) as u64;
    log.partition(|s| stable_hash(&format!("{seed}/{}", s.session_id)) % 1_000_000 >= cut)
}

/// Full ranking lists over the log's documents for every clicked query.
pub fn ranking_lists(
    log: &SearchLog,
    vocab: &Vocabulary,
    backend: Backend,
    dense: &DualEncoderConfig,
) -> Result<BTreeMap<String, RankingList>> {
    let queries = clicked_queries(log);
    match backend {
        Backend::Bm25 => build_ranking_lists(&Bm25Index::build(doc_table(log), Bm25Params::default()), &queries),
        Backend::Dense => {
            let enc = train_dual_encoder(&click_pairs(log, vocab), vocab.len(), dense)?;
            build_ranking_lists(&DenseIndex::build(&enc, vocab, doc_table(log)), &queries)
        }
    }
}

pub fn mine(
    log: &SearchLog,
    lists: &BTreeMap<String, RankingList>,
    cfg: &PipelineConfig,
) -> Result<BTreeMap<String, Vec<AmbiguousMatch>>> {
    let index = WindowIndex::build(lists, log, cfg.augment.w_size)?;
    let contexts = derive_contexts(log, true).contexts;
    mine_all(&contexts, &index, cfg.augment.n_ambiguous, cfg.band, cfg.augment.mean_m_aq)
}

pub fn augment(
    log: &SearchLog,
    vocab: &Vocabulary,
    mined: &BTreeMap<String, Vec<AmbiguousMatch>>,
    cfg: &AugmentConfig,
) -> Result<TrainingSet> {
    let pool = QueryPool::new(log);
    let contexts = derive_contexts(log, false).contexts;
    let src = AugmentSources {
        log,
        vocab,
        pool: &pool,
        mined,
    };
    build_training_set(&contexts, cfg, &src)
}

pub fn train_ranker(pairs: &[TrainingPair], vocab: &Vocabulary, cfg: &PipelineConfig) -> Result<RankerModel> {
    let encoded = encode_pairs(pairs, vocab, cfg.max_len)?;
    let model = RankerModel::init(vocab.len(), cfg.dim, cfg.hidden, cfg.seed)?;
    train(model, &encoded, &cfg.train)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub lists: Vec<RankingList>,
    pub run: EvalRun,
    pub report: MetricsReport,
}

/// Ranks the candidates of every test context that has history.
pub fn evaluate_ranker(
    model: &RankerModel,
    vocab: &Vocabulary,
    test: &SearchLog,
    cfg: &PipelineConfig,
) -> Result<Evaluation> {
    let contexts = derive_contexts(test, true).contexts;
    let lists = rank_all(model, vocab, test, &contexts, cfg.max_len)?;
    let run = EvalRun::from_lists(&lists, test)?;
    let report = evaluate(&run, &cfg.eval)?;
    Ok(Evaluation { lists, run, report })
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub training: TrainingSet,
    pub model: RankerModel,
    pub evaluation: Evaluation,
}

/// Every stage in memory on an already split log.
pub fn run_experiment(train_log: &SearchLog, test_log: &SearchLog, cfg: &PipelineConfig) -> Result<Experiment> {
    let vocab = Vocabulary::build(train_log, cfg.min_freq)?;
    let mined = if cfg.augment.n_ambiguous > 0 {
        let lists = ranking_lists(train_log, &vocab, cfg.backend, &cfg.dense)?;
        mine(train_log, &lists, cfg)?
    } else {
        BTreeMap::new()
    };
    let training = augment(train_log, &vocab, &mined, &cfg.augment)?;
    let model = train_ranker(&training.pairs, &vocab, cfg)?;
    let evaluation = evaluate_ranker(&model, &vocab, test_log, cfg)?;
    Ok(Experiment {
        training,
        model,
        evaluation,
    })
}
