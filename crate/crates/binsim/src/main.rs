//! Command-line entry point.

use binsim::checkpoint;
use binsim::graph::{build_graph, serialize_graph, AlignFormula, EdgeType, GraphConfig};
use binsim::harness::store::{
    load_pairs_jsonl, load_queries_jsonl, save_pairs_jsonl, save_queries_jsonl, SnippetStore,
};
use binsim::harness::synthetic::{gen_synthetic_corpus, SyntheticCorpusSpec};
use binsim::harness::train::{score_pair, train, TrainConfig};
use binsim::harness::{baseline_edit_distance, eval_auc, eval_search, EvalReport, Timing};
use binsim::model::{Activation, Aggregation, EdgeWeighting, ModelConfig, ModelRuntime};
use binsim::tokenizer::{build_vocab, RegisterTables, Vocab};
use binsim::Error;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

/// Cross-architecture binary code similarity toolkit.
#[derive(Parser)]
#[command(name = "binsim", version, about)]
struct Cli {
    /// Random seed (env fallback: BINSIM_SEED).
    #[arg(long, global = true, env = "BINSIM_SEED", default_value_t = 0)]
    seed: u64,
    /// Config file with graph/model/trainer settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra register-name tables ("arch: R0, R1" lines).
    #[arg(long, global = true)]
    registers: Option<PathBuf>,
    /// Worker threads for evaluation scoring.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

/// On-disk union of all tunables; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
struct RunConfig {
    graph: GraphConfig,
    model: ModelConfig,
    train: TrainConfig,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<RunConfig, Error> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::io(p.display().to_string(), e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!(
                    "bad config file {}: {e}",
                    p.display()
                )))
            }
        }
    }
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Opcode prefix length for e2 edges.
    #[arg(long)]
    prefix_len: Option<usize>,
    /// Position-alignment threshold for e5 edges.
    #[arg(long)]
    align_threshold: Option<f64>,
    /// e5 formula: as-written or rescaled.
    #[arg(long, value_parser = parse_formula)]
    align_formula: Option<AlignFormula>,
    /// Comma-separated edge types (e0..e5) to drop, e.g. "e2,e3,e4,e5".
    #[arg(long, value_delimiter = ',', value_parser = parse_edge_type)]
    disable_edges: Option<Vec<EdgeType>>,
}

fn parse_formula(s: &str) -> Result<AlignFormula, String> {
    match s {
        "as-written" | "as_written" => Ok(AlignFormula::AsWritten),
        "rescaled" => Ok(AlignFormula::Rescaled),
        _ => Err(format!("unknown formula {s:?} (as-written|rescaled)")),
    }
}

fn parse_edge_type(s: &str) -> Result<EdgeType, String> {
    EdgeType::parse(s).ok_or_else(|| format!("unknown edge type {s:?} (e0..e5)"))
}

impl GraphArgs {
    fn apply(&self, mut cfg: GraphConfig) -> GraphConfig {
        if let Some(n) = self.prefix_len {
            cfg.prefix_len = n;
        }
        if let Some(t) = self.align_threshold {
            cfg.align_threshold = t;
        }
        if let Some(f) = self.align_formula {
            cfg.align_formula = f;
        }
        if let Some(drop) = &self.disable_edges {
            cfg = cfg.without(drop);
        }
        cfg
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    token_emb_dim: Option<usize>,
    #[arg(long)]
    char_emb_dim: Option<usize>,
    #[arg(long)]
    char_filter_count: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    rgcn_layers: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// R-GCN aggregation: type-specific or shared.
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<Aggregation>,
    /// Neighbor weighting: unweighted or frequency-weighted.
    #[arg(long, value_parser = parse_weighting)]
    edge_weighting: Option<EdgeWeighting>,
    /// Nonlinearity: relu or tanh.
    #[arg(long, value_parser = parse_activation)]
    activation: Option<Activation>,
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "type-specific" | "type_specific" => Ok(Aggregation::TypeSpecific),
        "shared" => Ok(Aggregation::Shared),
        _ => Err(format!("unknown aggregation {s:?} (type-specific|shared)")),
    }
}

fn parse_weighting(s: &str) -> Result<EdgeWeighting, String> {
    match s {
        "unweighted" => Ok(EdgeWeighting::Unweighted),
        "frequency-weighted" | "frequency_weighted" => Ok(EdgeWeighting::FrequencyWeighted),
        _ => Err(format!(
            "unknown weighting {s:?} (unweighted|frequency-weighted)"
        )),
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        _ => Err(format!("unknown activation {s:?} (relu|tanh)")),
    }
}

impl ModelArgs {
    fn apply(&self, mut cfg: ModelConfig) -> ModelConfig {
        if let Some(d) = self.token_emb_dim {
            cfg.token_emb_dim = d;
        }
        if let Some(d) = self.char_emb_dim {
            cfg.char_emb_dim = d;
        }
        if let Some(d) = self.char_filter_count {
            cfg.char_filter_count = d;
        }
        if let Some(d) = self.hidden_dim {
            cfg.hidden_dim = d;
        }
        if let Some(d) = self.rgcn_layers {
            cfg.rgcn_layers = d;
        }
        if let Some(d) = self.dropout {
            cfg.dropout = d;
        }
        if let Some(a) = self.aggregation {
            cfg.rgcn_aggregation = a;
        }
        if let Some(w) = self.edge_weighting {
            cfg.edge_weighting = w;
        }
        if let Some(a) = self.activation {
            cfg.activation = a;
        }
        cfg
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Early-stop after this many epochs without dev-AUC improvement.
    #[arg(long)]
    patience: Option<usize>,
}

impl TrainArgs {
    fn apply(&self, mut cfg: TrainConfig, seed: u64) -> TrainConfig {
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.learning_rate {
            cfg.adam.learning_rate = lr;
        }
        if let Some(p) = self.patience {
            cfg.patience = Some(p);
        }
        cfg.seed = seed;
        cfg
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a vocabulary file from a snippet corpus.
    BuildVocab {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the instruction association graph of one snippet pair as JSON.
    BuildGraph {
        #[arg(long)]
        snippets: PathBuf,
        /// Side-A snippet id.
        #[arg(long)]
        a: String,
        /// Side-B snippet id.
        #[arg(long)]
        b: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Train a model and save a checkpoint.
    Train {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        dev_pairs: Option<PathBuf>,
        #[arg(long)]
        vocab: PathBuf,
        /// Checkpoint output path (parameter blob; a .json sidecar is
        /// written next to it).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        trainer: TrainArgs,
    },
    /// Pairwise AUC of a trained model over a labeled pair set.
    EvalAuc {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Report file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include wall-clock timing in the report (off keeps reruns
        /// byte-identical).
        #[arg(long)]
        timing: bool,
    },
    /// Function-search metrics (precision@1, MRR) of a trained model.
    EvalSearch {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Score one snippet pair with a trained model.
    Compare {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Repeat inference to measure throughput.
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
    /// Generate a synthetic cross-dialect corpus into a directory.
    GenSynthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100)]
        num_functions: usize,
        #[arg(long, default_value_t = 5)]
        min_instructions: usize,
        #[arg(long, default_value_t = 12)]
        max_instructions: usize,
        /// Negative candidates per search query.
        #[arg(long, default_value_t = 20)]
        n_neg: usize,
        /// Negative pairs per positive pair.
        #[arg(long, default_value_t = 1)]
        negatives_per_positive: usize,
    },
    /// Edit-distance baseline AUC over a labeled pair set.
    BaselineEdit {
        #[arg(long)]
        snippets: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for internal faults, 2 for user/input problems.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Shape(_) | Error::NonFiniteLoss { .. } => 1,
        _ => 2,
    }
}

fn load_tables(extra: Option<&Path>) -> Result<RegisterTables, Error> {
    let mut tables = RegisterTables::builtin();
    if let Some(p) = extra {
        tables.load_extra(p)?;
    }
    Ok(tables)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Error::io(p.display().to_string(), e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_model(
    checkpoint_path: &Path,
    vocab_path: &Path,
) -> Result<(Vocab, binsim::nn::ParamSet, checkpoint::Sidecar), Error> {
    let vocab = Vocab::load(vocab_path)?;
    let (params, sidecar) = checkpoint::load(checkpoint_path, &vocab)?;
    Ok((vocab, params, sidecar))
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, Error> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    let run_cfg = RunConfig::load(cli.config.as_deref())?;
    let tables = load_tables(cli.registers.as_deref())?;
    match cli.cmd {
        Cmd::BuildVocab { snippets, out } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            if store.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            let vocab = build_vocab(store.iter())?;
            vocab.save(&out)?;
            eprintln!(
                "wrote {} ({} tokens, {} chars)",
                out.display(),
                vocab.num_tokens(),
                vocab.num_chars()
            );
            Ok(())
        }
        Cmd::BuildGraph {
            snippets,
            a,
            b,
            out,
            graph,
        } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            let gcfg = graph.apply(run_cfg.graph);
            let g = build_graph(store.get(&a)?, store.get(&b)?, &gcfg)?;
            let bytes = serialize_graph(&g);
            std::fs::write(&out, &bytes).map_err(|e| Error::io(out.display().to_string(), e))?;
            eprintln!(
                "wrote {} ({} nodes, {} edges)",
                out.display(),
                g.nodes.len(),
                g.edges.len()
            );
            Ok(())
        }
        Cmd::Train {
            snippets,
            pairs,
            dev_pairs,
            vocab,
            out,
            graph,
            model,
            trainer,
        } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            let vocab = Vocab::load(&vocab)?;
            let train_set = load_pairs_jsonl(&pairs)?;
            let dev_set = dev_pairs.as_deref().map(load_pairs_jsonl).transpose()?;
            let gcfg = graph.apply(run_cfg.graph);
            let mcfg = model.apply(run_cfg.model);
            let tcfg = trainer.apply(run_cfg.train, cli.seed);
            let outcome = train(
                &mcfg,
                &gcfg,
                &vocab,
                &store,
                &train_set,
                dev_set.as_deref(),
                &tcfg,
            )?;
            checkpoint::save(&out, &outcome.params, &mcfg, &gcfg, &vocab)?;
            let summary = serde_json::json!({
                "checkpoint": out.display().to_string(),
                "epochs_run": outcome.history.len(),
                "final_train_loss": outcome.history.last().map(|s| s.train_loss),
                "best_dev_auc": outcome.best_dev_auc,
                "best_epoch": outcome.best_epoch,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Cmd::EvalAuc {
            snippets,
            pairs,
            vocab,
            checkpoint,
            out,
            timing,
        } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            let (vocab, params, sidecar) = load_model(&checkpoint, &vocab)?;
            let pair_set = load_pairs_jsonl(&pairs)?;
            for p in &pair_set {
                p.validate(&store)?;
            }
            let pool = thread_pool(cli.workers)?;
            let start = Instant::now();
            let scored: Vec<(f64, u8)> = pool.install(|| {
                use rayon::prelude::*;
                pair_set
                    .par_iter()
                    .map(|p| {
                        let s = score_pair(
                            &sidecar.model_config,
                            &vocab,
                            &params,
                            &sidecar.graph_config,
                            store.get(&p.id_a)?,
                            store.get(&p.id_b)?,
                        )?;
                        Ok((s, p.label))
                    })
                    .collect::<Result<Vec<_>, Error>>()
            })?;
            let elapsed = start.elapsed();
            let auc = eval_auc(&scored)?;
            let report = EvalReport {
                auc: Some(auc),
                p_at_1: None,
                mrr: None,
                n_queries: pair_set.len(),
                per_query: Vec::new(),
                timing: Timing {
                    train_seconds_per_epoch: None,
                    predict_ms_per_pair: timing
                        .then(|| elapsed.as_secs_f64() * 1e3 / pair_set.len() as f64),
                },
            };
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&report)?)
        }
        Cmd::EvalSearch {
            snippets,
            queries,
            vocab,
            checkpoint,
            out,
            timing,
        } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            let (vocab, params, sidecar) = load_model(&checkpoint, &vocab)?;
            let query_set = load_queries_jsonl(&queries)?;
            let pool = thread_pool(cli.workers)?;
            let start = Instant::now();
            // score all (query, candidate) pairs up front, in parallel
            let mut pair_list: Vec<(String, String)> = Vec::new();
            for q in &query_set {
                pair_list.push((q.query_id.clone(), q.positive_id.clone()));
                for n in &q.negative_ids {
                    pair_list.push((q.query_id.clone(), n.clone()));
                }
            }
            let scores: Vec<f64> = pool.install(|| {
                use rayon::prelude::*;
                pair_list
                    .par_iter()
                    .map(|(qa, qb)| {
                        score_pair(
                            &sidecar.model_config,
                            &vocab,
                            &params,
                            &sidecar.graph_config,
                            store.get(qa)?,
                            store.get(qb)?,
                        )
                    })
                    .collect::<Result<Vec<_>, Error>>()
            })?;
            let elapsed = start.elapsed();
            let lookup: std::collections::HashMap<(String, String), f64> = pair_list
                .into_iter()
                .zip(scores.iter().copied())
                .collect();
            let metrics = eval_search(&query_set, |qa, qb| {
                Ok(lookup[&(qa.to_string(), qb.to_string())])
            })?;
            let report = EvalReport {
                auc: None,
                p_at_1: Some(metrics.precision_at_1),
                mrr: Some(metrics.mrr),
                n_queries: query_set.len(),
                per_query: metrics.per_query,
                timing: Timing {
                    train_seconds_per_epoch: None,
                    predict_ms_per_pair: timing
                        .then(|| elapsed.as_secs_f64() * 1e3 / scores.len().max(1) as f64),
                },
            };
            report.check_invariants()?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&report)?)
        }
        Cmd::Compare {
            snippets,
            a,
            b,
            vocab,
            checkpoint,
            repeat,
        } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            let (vocab, params, sidecar) = load_model(&checkpoint, &vocab)?;
            let seq_a = store.get(&a)?;
            let seq_b = store.get(&b)?;
            let graph = build_graph(seq_a, seq_b, &sidecar.graph_config)?;
            let runtime = ModelRuntime::new(&sidecar.model_config, &vocab, &params);
            let start = Instant::now();
            let mut probability = 0.0;
            for _ in 0..repeat.max(1) {
                probability = runtime
                    .forward_pair(seq_a, seq_b, &graph, None)?
                    .score
                    .probability;
            }
            let elapsed = start.elapsed().as_secs_f64();
            let mut out = serde_json::json!({
                "a": a,
                "b": b,
                "probability": probability,
            });
            if repeat > 1 {
                out["pairs_per_second"] =
                    serde_json::json!(repeat as f64 / elapsed.max(1e-9));
                out["ms_per_pair"] = serde_json::json!(elapsed * 1e3 / repeat as f64);
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Cmd::GenSynthetic {
            out_dir,
            num_functions,
            min_instructions,
            max_instructions,
            n_neg,
            negatives_per_positive,
        } => {
            let spec = SyntheticCorpusSpec {
                num_functions,
                min_instructions,
                max_instructions,
                seed: cli.seed,
                n_neg,
                negatives_per_positive,
            };
            let corpus = gen_synthetic_corpus(&spec)?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
            corpus.store.save_jsonl(&out_dir.join("snippets.jsonl"))?;
            save_pairs_jsonl(&out_dir.join("pairs_train.jsonl"), &corpus.train_pairs)?;
            save_pairs_jsonl(&out_dir.join("pairs_dev.jsonl"), &corpus.dev_pairs)?;
            save_pairs_jsonl(&out_dir.join("pairs_test.jsonl"), &corpus.test_pairs)?;
            save_queries_jsonl(&out_dir.join("queries_all.jsonl"), &corpus.all_queries)?;
            save_queries_jsonl(&out_dir.join("queries_test.jsonl"), &corpus.test_queries)?;
            let spec_path = out_dir.join("spec.json");
            std::fs::write(&spec_path, serde_json::to_string_pretty(&spec)?)
                .map_err(|e| Error::io(spec_path.display().to_string(), e))?;
            eprintln!(
                "wrote corpus to {} ({} snippets)",
                out_dir.display(),
                corpus.store.len()
            );
            Ok(())
        }
        Cmd::BaselineEdit {
            snippets,
            pairs,
            out,
        } => {
            let store = SnippetStore::load_jsonl(&snippets, &tables)?;
            let pair_set = load_pairs_jsonl(&pairs)?;
            let auc = baseline_edit_distance(&pair_set, &store)?;
            let report = EvalReport {
                auc: Some(auc),
                p_at_1: None,
                mrr: None,
                n_queries: pair_set.len(),
                per_query: Vec::new(),
                timing: Timing::default(),
            };
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&report)?)
        }
    }
}
