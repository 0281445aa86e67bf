//! Dataset handling, training, evaluation protocols, and the synthetic
//! cross-dialect corpus generator.

pub mod baseline;
pub mod metrics;
pub mod store;
pub mod synthetic;
pub mod train;

pub use baseline::{baseline_edit_distance, edit_similarity, levenshtein};
pub use metrics::{eval_auc, eval_search, EvalReport, QueryRank, SearchMetrics, Timing};
pub use store::{PairExample, SearchQuery, SnippetStore};
pub use synthetic::{gen_synthetic_corpus, SyntheticCorpus, SyntheticCorpusSpec};
pub use train::{eval_pairs, score_pair, train, EpochStats, GraphCache, TrainConfig, TrainOutcome};
