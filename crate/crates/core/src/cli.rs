//! Command-line front end.
//!
//! Every stage reads and writes fixed file names inside one working
//! directory (`--out`, default `work`):
//!
//! | stage     | reads                                   | writes                                   |
//! |-----------|-----------------------------------------|------------------------------------------|
//! | `gen`     |                                         | `sessions.jsonl`                         |
//! | `prepare` | `sessions.jsonl` or `--input`           | `train.jsonl`, `test.jsonl`, `vocab.tsv` |
//! | `index`   | `train.jsonl`, `vocab.tsv`              | `index.trec`                             |
//! | `mine`    | `train.jsonl`, `index.trec`             | `ambiguous.tsv`                          |
//! | `augment` | `train.jsonl`, `vocab.tsv`, `ambiguous.tsv` | `train_pairs.jsonl`, `augment_stats.tsv` |
//! | `train`   | `train_pairs.jsonl`, `vocab.tsv`        | `model.ckpt`                             |
//! | `eval`    | `model.ckpt`, `vocab.tsv`, `test.jsonl` | `metrics.tsv`, breakdowns, `run.trec`, `qrels.txt` |
//! | `ablate`  | as `augment` to `eval`                  | the same files under `ablate_<GROUP>/`   |
//!
//! Each stage also writes `manifest.<stage>.txt` with the effective settings.
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use crate::augment::{load_training_set, save_training_set, AugmentConfig, StrategyGroup};
use crate::corpus::SearchLog;
use crate::evalkit::{
    breakdown, breakdown_tsv, evaluate, load_run, qrels_from_log, save_with, trace_queries, write_qrels, write_run,
    BreakdownMode, EvalRun, Gain,
};
use crate::mining::{read_matches, write_matches, Band};
use crate::pipeline::{self, PipelineConfig};
use crate::ranker::{Optimizer, RankerModel};
use crate::retrieval::{Backend, RankingList};
use crate::synlog::{self, SynConfig};
use crate::textproc::Vocabulary;

#[derive(Parser, Debug)]
#[command(name = "sessrank", version, about = "Session search ranking with query-oriented augmentation")]
struct Cli {
    /// Flat `key=value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    backend: Option<Backend>,
    /// Window band for ambiguous mining.
    #[arg(long, global = true)]
    band: Option<Band>,
    /// Working directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic session log.
    Gen,
    /// Split a log into train/test and build the vocabulary.
    Prepare {
        /// Session log to read instead of `<out>/sessions.jsonl`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Rank every document for every clicked training query.
    Index,
    /// Mine ambiguous queries from the ranking lists.
    Mine,
    /// Build the augmented training set.
    Augment,
    /// Train the ranker.
    Train,
    /// Evaluate the ranker (or an external TREC run) on the test split.
    Eval,
    /// Re-run augment, train and eval with one strategy group disabled.
    Ablate {
        #[arg(long)]
        drop: StrategyGroup,
    },
}

/// Effective settings: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    pub syn: SynConfig,
    /// External run evaluated by `eval` instead of the trained model.
    pub run: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> anyhow::Result<T> {
    v.parse().ok().with_context(|| format!("bad value `{v}` for `{key}`"))
}

fn parse_bool(key: &str, v: &str) -> anyhow::Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("bad value `{v}` for `{key}`"),
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> anyhow::Result<Vec<T>> {
    v.split(',').map(|x| parse(key, x.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> anyhow::Result<()> {
        let p = &mut self.pipeline;
        let a = &mut p.augment;
        let t = &mut p.train;
        let s = &mut self.syn;
        match key {
            "seed" => {
                let seed = parse(key, v)?;
                *p = p.clone().with_seed(seed);
                s.seed = seed;
            }
            "preset" => {
                let base = match v {
                    "aol" => AugmentConfig::aol(),
                    "tiangong" => AugmentConfig::tiangong(),
                    _ => bail!("unknown preset `{v}`"),
                };
                *a = AugmentConfig { seed: a.seed, ..base };
                t.curriculum = a.curriculum;
            }
            "test_fraction" => p.test_fraction = parse(key, v)?,
            "min_freq" => p.min_freq = parse(key, v)?,
            "backend" => p.backend = parse(key, v)?,
            "band" => p.band = parse(key, v)?,
            "dim" => p.dim = parse(key, v)?,
            "hidden" => p.hidden = parse(key, v)?,
            "max_len" => p.max_len = parse(key, v)?,
            "dense_dim" => p.dense.dim = parse(key, v)?,
            "dense_epochs" => p.dense.epochs = parse(key, v)?,
            "dense_lr" => p.dense.lr = parse(key, v)?,
            "dense_batch_size" => p.dense.batch_size = parse(key, v)?,
            "n_mask" => a.n_mask = parse(key, v)?,
            "n_replace" => a.n_replace = parse(key, v)?,
            "n_add" => a.n_add = parse(key, v)?,
            "n_random" => a.n_random = parse(key, v)?,
            "n_ambiguous" => a.n_ambiguous = parse(key, v)?,
            "use_historical" => a.use_historical = parse_bool(key, v)?,
            "m_op" => a.m_op = parse(key, v)?,
            "m_rq" => a.m_rq = parse(key, v)?,
            "m_th" => a.m_th = parse(key, v)?,
            "mean_m_aq" => a.mean_m_aq = parse(key, v)?,
            "w_size" => a.w_size = parse(key, v)?,
            "curriculum" => {
                a.curriculum = parse_bool(key, v)?;
                t.curriculum = a.curriculum;
            }
            "epochs" => t.epochs = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "weight_decay" => t.weight_decay = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "linear_decay" => t.linear_decay = parse_bool(key, v)?,
            "optimizer" => t.optimizer = parse::<Optimizer>(key, v)?,
            "ks" => p.eval.ks = list(key, v)?,
            "gain" => p.eval.gain = parse(key, v)?,
            "log_base" => p.eval.base = parse(key, v)?,
            "n_sessions" => s.n_sessions = parse(key, v)?,
            "n_topics" => s.n_topics = parse(key, v)?,
            "n_subtopics" => s.n_subtopics = parse(key, v)?,
            "words_per_topic" => s.words_per_topic = parse(key, v)?,
            "doc_variants" => s.doc_variants = parse(key, v)?,
            "candidates" => s.candidates = parse(key, v)?,
            "topic_in_query" => s.topic_in_query = parse(key, v)?,
            "length_mix" => {
                let m: Vec<f64> = list(key, v)?;
                s.length_mix = m.try_into().ok().context("length_mix needs three values")?;
            }
            "run" => self.run = Some(PathBuf::from(v)),
            _ => bail!("unknown setting `{key}`"),
        }
        Ok(())
    }

    /// Every setting as `key=value`, sorted by key.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let p = &self.pipeline;
        let (a, t, s) = (&p.augment, &p.train, &self.syn);
        let base = match p.eval.base {
            crate::evalkit::LogBase::Natural => "ln",
            crate::evalkit::LogBase::Two => "log2",
        };
        let gain = match p.eval.gain {
            Gain::BinaryClick => "binary",
            Gain::Graded => "graded",
        };
        let mut e: BTreeMap<&'static str, String> = [
            ("seed", p.seed.to_string()),
            ("test_fraction", p.test_fraction.to_string()),
            ("min_freq", p.min_freq.to_string()),
            ("backend", p.backend.to_string()),
            ("band", p.band.to_string()),
            ("dim", p.dim.to_string()),
            ("hidden", p.hidden.to_string()),
            ("max_len", p.max_len.to_string()),
            ("dense_dim", p.dense.dim.to_string()),
            ("dense_epochs", p.dense.epochs.to_string()),
            ("dense_lr", p.dense.lr.to_string()),
            ("dense_batch_size", p.dense.batch_size.to_string()),
            ("n_mask", a.n_mask.to_string()),
            ("n_replace", a.n_replace.to_string()),
            ("n_add", a.n_add.to_string()),
            ("n_random", a.n_random.to_string()),
            ("n_ambiguous", a.n_ambiguous.to_string()),
            ("use_historical", a.use_historical.to_string()),
            ("m_op", a.m_op.to_string()),
            ("m_rq", a.m_rq.to_string()),
            ("m_th", a.m_th.to_string()),
            ("mean_m_aq", a.mean_m_aq.to_string()),
            ("w_size", a.w_size.to_string()),
            ("curriculum", a.curriculum.to_string()),
            ("epochs", t.epochs.to_string()),
            ("lr", t.lr.to_string()),
            ("weight_decay", t.weight_decay.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("linear_decay", t.linear_decay.to_string()),
            ("optimizer", t.optimizer.to_string()),
            ("ks", join(&p.eval.ks)),
            ("gain", gain.to_string()),
            ("log_base", base.to_string()),
            ("n_sessions", s.n_sessions.to_string()),
            ("n_topics", s.n_topics.to_string()),
            ("n_subtopics", s.n_subtopics.to_string()),
            ("words_per_topic", s.words_per_topic.to_string()),
            ("doc_variants", s.doc_variants.to_string()),
            ("candidates", s.candidates.to_string()),
            ("topic_in_query", s.topic_in_query.to_string()),
            ("length_mix", join(&s.length_mix)),
        ]
        .into_iter()
        .collect();
        if let Some(r) = &self.run {
            e.insert("run", r.display().to_string());
        }
        e
    }

    /// Applies a flat `key=value` text. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> anyhow::Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key=value", n + 1))?;
            self.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }
}

/// Usage problems map to exit code 2, everything else to 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn build_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    cfg.pipeline.train.curriculum = cfg.pipeline.augment.curriculum;
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Usage)?;
        cfg.apply_text(&text).map_err(Failure::Usage)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string()).map_err(Failure::Usage)?;
    }
    if let Some(b) = cli.backend {
        cfg.pipeline.backend = b;
    }
    if let Some(b) = cli.band {
        cfg.pipeline.band = b;
    }
    Ok(cfg)
}

/// Parses `args` (program name first) and runs one command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = build_config(&cli).and_then(|cfg| {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("work"));
        dispatch(&cli.command, &cfg, &out).map_err(Failure::Runtime)
    });
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn write_manifest(dir: &Path, stage: &str, cfg: &RunConfig) -> anyhow::Result<()> {
    let mut text = format!("stage={stage}\n");
    for (k, v) in cfg.entries() {
        text.push_str(&format!("{k}={v}\n"));
    }
    let path = dir.join(format!("manifest.{stage}.txt"));
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_log(path: &Path) -> anyhow::Result<SearchLog> {
    let mut log = SearchLog::load(path)?;
    log.tokenize_all();
    Ok(log)
}

fn dispatch(cmd: &Command, cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cmd {
        Command::Gen => gen(cfg, out),
        Command::Prepare { input } => prepare(cfg, out, input.as_deref()),
        Command::Index => index(cfg, out),
        Command::Mine => mine(cfg, out),
        Command::Augment => augment(cfg, out, out),
        Command::Train => train(cfg, out, out),
        Command::Eval => eval(cfg, out, out),
        Command::Ablate { drop } => ablate(cfg, out, *drop),
    }
}

fn gen(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let syn = synlog::generate(&cfg.syn)?;
    let check = synlog::self_test(&syn)?;
    syn.log.save(&out.join("sessions.jsonl"))?;
    println!(
        "generated {} sessions, {} queries; label oracle MRR {:.4}, query-overlap MRR {:.4}",
        syn.log.sessions.len(),
        syn.log.n_turns(),
        check.oracle_mrr,
        check.lexical_mrr
    );
    write_manifest(out, "gen", cfg)
}

fn prepare(cfg: &RunConfig, out: &Path, input: Option<&Path>) -> anyhow::Result<()> {
    let default_input = out.join("sessions.jsonl");
    let log = load_log(input.unwrap_or(&default_input))?;
    let p = &cfg.pipeline;
    let (train, test) = pipeline::split_log(&log, p.test_fraction, p.seed);
    if train.sessions.is_empty() {
        bail!("training split is empty");
    }
    let vocab = Vocabulary::build(&train, p.min_freq)?;
    train.save(&out.join("train.jsonl"))?;
    test.save(&out.join("test.jsonl"))?;
    vocab.write_tsv(&out.join("vocab.tsv"))?;
    let ctx = crate::corpus::derive_contexts(&train, false);
    println!(
        "train: {} sessions, {} contexts ({} dropped); test: {} sessions; vocabulary {}",
        train.sessions.len(),
        ctx.contexts.len(),
        ctx.dropped,
        test.sessions.len(),
        vocab.len()
    );
    write_manifest(out, "prepare", cfg)
}

fn index(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let train = load_log(&out.join("train.jsonl"))?;
    let vocab = Vocabulary::read_tsv(&out.join("vocab.tsv"))?;
    let p = &cfg.pipeline;
    let lists = pipeline::ranking_lists(&train, &vocab, p.backend, &p.dense)?;
    let lists: Vec<RankingList> = lists.into_values().collect();
    save_with(&out.join("index.trec"), |w| write_run(&lists, &p.backend.to_string(), w))?;
    println!("ranked {} queries with {}", lists.len(), p.backend);
    write_manifest(out, "index", cfg)
}

fn mine(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let train = load_log(&out.join("train.jsonl"))?;
    let lists: BTreeMap<String, RankingList> = load_run(&out.join("index.trec"))?
        .into_iter()
        .map(|l| (l.query_id.clone(), l))
        .collect();
    let mined = pipeline::mine(&train, &lists, &cfg.pipeline)?;
    write_matches(&out.join("ambiguous.tsv"), &mined)?;
    let found: usize = mined.values().map(Vec::len).sum();
    println!("mined {found} ambiguous queries for {} contexts", mined.len());
    write_manifest(out, "mine", cfg)
}

fn augment(cfg: &RunConfig, shared: &Path, out: &Path) -> anyhow::Result<()> {
    let train = load_log(&shared.join("train.jsonl"))?;
    let vocab = Vocabulary::read_tsv(&shared.join("vocab.tsv"))?;
    let a = &cfg.pipeline.augment;
    let mined_path = shared.join("ambiguous.tsv");
    let mined = if a.n_ambiguous == 0 {
        BTreeMap::new()
    } else if mined_path.exists() {
        read_matches(&mined_path)?
    } else {
        bail!("{} is missing; run `mine` first or set n_ambiguous=0", mined_path.display());
    };
    let set = pipeline::augment(&train, &vocab, &mined, a)?;
    save_training_set(&out.join("train_pairs.jsonl"), &set.pairs)?;
    let st = &set.stats;
    let mut tsv = String::from("count\tvalue\n");
    tsv += &format!("contexts\t{}\n", st.contexts);
    tsv += &format!("contexts_without_history\t{}\n", st.contexts_without_history);
    tsv += &format!("original\t{}\n", st.original_pairs);
    for (s, n) in &st.constructed_pairs {
        tsv += &format!("constructed_{s}\t{n}\n");
    }
    for (s, n) in &st.shortfall {
        tsv += &format!("shortfall_{s}\t{n}\n");
    }
    fs::write(out.join("augment_stats.tsv"), tsv)?;
    println!(
        "{} pairs: {} original, {} constructed",
        set.pairs.len(),
        st.original_pairs,
        st.constructed_total()
    );
    write_manifest(out, "augment", cfg)
}

fn train(cfg: &RunConfig, shared: &Path, out: &Path) -> anyhow::Result<()> {
    let vocab = Vocabulary::read_tsv(&shared.join("vocab.tsv"))?;
    let pairs = load_training_set(&out.join("train_pairs.jsonl"))?;
    let model = pipeline::train_ranker(&pairs, &vocab, &cfg.pipeline)?;
    model.save(&out.join("model.ckpt"))?;
    println!("trained on {} pairs for {} epochs", pairs.len(), cfg.pipeline.train.epochs);
    write_manifest(out, "train", cfg)
}

fn eval(cfg: &RunConfig, shared: &Path, out: &Path) -> anyhow::Result<()> {
    let test = load_log(&shared.join("test.jsonl"))?;
    let p = &cfg.pipeline;
    let (lists, run) = match &cfg.run {
        Some(path) => {
            let lists = load_run(path)?;
            let run = EvalRun::from_lists(&lists, &test)?;
            (lists, run)
        }
        None => {
            let vocab = Vocabulary::read_tsv(&shared.join("vocab.tsv"))?;
            let model = RankerModel::load(&out.join("model.ckpt"))?;
            let e = pipeline::evaluate_ranker(&model, &vocab, &test, p)?;
            (e.lists, e.run)
        }
    };
    let report = evaluate(&run, &p.eval)?;
    fs::write(out.join("metrics.tsv"), report.to_tsv())?;
    let trace = trace_queries(&test);
    for (mode, name) in [(BreakdownMode::Length, "length"), (BreakdownMode::Position, "position")] {
        let rows = breakdown(&run, &trace, mode, &p.eval)?;
        fs::write(out.join(format!("breakdown_{name}.tsv")), breakdown_tsv(&rows))?;
    }
    save_with(&out.join("run.trec"), |w| write_run(&lists, "sessrank", w))?;
    let qrels = qrels_from_log(&test, p.eval.gain == Gain::Graded);
    save_with(&out.join("qrels.txt"), |w| write_qrels(&qrels, w))?;
    print!("{report}");
    write_manifest(out, "eval", cfg)
}

fn ablate(cfg: &RunConfig, shared: &Path, drop: StrategyGroup) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    cfg.pipeline.augment = cfg.pipeline.augment.clone().without(drop);
    let out = shared.join(format!("ablate_{drop}"));
    fs::create_dir_all(&out)?;
    augment(&cfg, shared, &out)?;
    train(&cfg, shared, &out)?;
    eval(&cfg, shared, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_round_trip_through_entries() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("seed = 7\nbackend=bm25 # comment\nks=1,5\nlength_mix=0.5,0.3,0.2\n\n").unwrap();
        assert_eq!(cfg.pipeline.train.seed, 7);
        assert_eq!(cfg.syn.seed, 7);
        let text: String = cfg.entries().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let mut again = RunConfig::default();
        again.apply_text(&text).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(RunConfig::default().apply_text("colour=blue").is_err());
        assert!(RunConfig::default().apply_text("no equals sign").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["sessrank"]), 2);
        assert_eq!(main_with_args(["sessrank", "frobnicate"]), 2);
        assert_eq!(main_with_args(["sessrank", "ablate", "--drop", "XX"]), 2);
        assert_eq!(main_with_args(["sessrank", "--help"]), 0);
    }
}
