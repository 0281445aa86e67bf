//! Mini-batch training loop: shuffled epochs, accumulated gradients,
//! Adam updates, and dev-set model selection.

use crate::error::{Error, Result};
use crate::graph::{build_graph, AssocGraph, GraphConfig};
use crate::harness::metrics::eval_auc;
use crate::harness::store::{PairExample, SnippetStore};
use crate::model::{init_params, ModelConfig, ModelRuntime};
use crate::nn::{Adam, AdamConfig, GradSet, ParamSet};
use crate::tokenizer::{TokenSequence, Vocab};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Stop after this many epochs without a dev-AUC improvement.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
            patience: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_auc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Final parameters: the best dev-AUC epoch when a dev set was given,
    /// otherwise the last epoch.
    pub params: ParamSet,
    pub history: Vec<EpochStats>,
    pub best_dev_auc: Option<f64>,
    pub best_epoch: Option<usize>,
}

/// Per-pair association graphs, built once and reused across epochs.
pub struct GraphCache<'a> {
    store: &'a SnippetStore,
    gcfg: &'a GraphConfig,
    cache: HashMap<(String, String), AssocGraph>,
}

impl<'a> GraphCache<'a> {
    pub fn new(store: &'a SnippetStore, gcfg: &'a GraphConfig) -> Self {
        GraphCache {
            store,
            gcfg,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, id_a: &str, id_b: &str) -> Result<&AssocGraph> {
        let key = (id_a.to_string(), id_b.to_string());
        if !self.cache.contains_key(&key) {
            let g = build_graph(self.store.get(id_a)?, self.store.get(id_b)?, self.gcfg)?;
            self.cache.insert(key.clone(), g);
        }
        Ok(&self.cache[&key])
    }
}

/// Similarity probability for one pair under fixed parameters (no dropout).
pub fn score_pair(
    cfg: &ModelConfig,
    vocab: &Vocab,
    params: &ParamSet,
    gcfg: &GraphConfig,
    seq_a: &TokenSequence,
    seq_b: &TokenSequence,
) -> Result<f64> {
    let graph = build_graph(seq_a, seq_b, gcfg)?;
    let runtime = ModelRuntime::new(cfg, vocab, params);
    Ok(runtime.forward_pair(seq_a, seq_b, &graph, None)?.score.probability)
}

/// AUC of the model over a labeled pair set.
pub fn eval_pairs(
    cfg: &ModelConfig,
    vocab: &Vocab,
    params: &ParamSet,
    store: &SnippetStore,
    pairs: &[PairExample],
    cache: &mut GraphCache,
) -> Result<f64> {
    let runtime = ModelRuntime::new(cfg, vocab, params);
    let mut scored = Vec::with_capacity(pairs.len());
    for p in pairs {
        let graph = cache.get(&p.id_a, &p.id_b)?;
        let fwd = runtime.forward_pair(store.get(&p.id_a)?, store.get(&p.id_b)?, graph, None)?;
        scored.push((fwd.score.probability, p.label));
    }
    eval_auc(&scored)
}

/// Train a model from scratch. Deterministic for a fixed seed and inputs.
pub fn train(
    cfg: &ModelConfig,
    gcfg: &GraphConfig,
    vocab: &Vocab,
    store: &SnippetStore,
    train_pairs: &[PairExample],
    dev_pairs: Option<&[PairExample]>,
    tc: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    gcfg.validate()?;
    if train_pairs.is_empty() {
        return Err(Error::Config("no training pairs".into()));
    }
    if tc.batch_size == 0 || tc.epochs == 0 {
        return Err(Error::Config("epochs and batch_size must be positive".into()));
    }
    for p in train_pairs.iter().chain(dev_pairs.unwrap_or(&[])) {
        p.validate(store)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut params = init_params(cfg, vocab, &mut rng)?;
    let mut opt = Adam::new(tc.adam, &params);
    let mut cache = GraphCache::new(store, gcfg);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(1));

    let mut history = Vec::with_capacity(tc.epochs);
    let mut best: Option<(f64, usize, ParamSet)> = None;
    let mut stale = 0usize;

    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    for epoch in 0..tc.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(tc.batch_size).enumerate() {
            let runtime = ModelRuntime::new(cfg, vocab, &params);
            let mut grads = GradSet::zeros_like(&params);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let p = &train_pairs[i];
                let graph = cache.get(&p.id_a, &p.id_b)?;
                let dr = if cfg.dropout > 0.0 {
                    Some(&mut dropout_rng)
                } else {
                    None
                };
                let fwd = runtime.forward_pair(
                    store.get(&p.id_a)?,
                    store.get(&p.id_b)?,
                    graph,
                    dr,
                )?;
                let p_true = if p.label == 1 {
                    fwd.score.probability
                } else {
                    1.0 - fwd.score.probability
                };
                let loss = -(p_true.max(1e-300)).ln();
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                    });
                }
                loss_sum += loss;
                fwd.backprop(p.label as usize, scale, &mut grads);
            }
            opt.step(&mut params, &grads);
            params.check_finite().map_err(|_| Error::NonFiniteLoss {
                epoch,
                batch: batch_idx,
            })?;
        }
        let train_loss = loss_sum / train_pairs.len() as f64;

        let dev_auc = match dev_pairs {
            Some(dev) => Some(eval_pairs(cfg, vocab, &params, store, dev, &mut cache)?),
            None => None,
        };
        if let Some(auc) = dev_auc {
            let improved = best.as_ref().map_or(true, |(b, _, _)| auc > *b);
            if improved {
                best = Some((auc, epoch, params.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
        }
        let stats = EpochStats {
            epoch,
            train_loss,
            dev_auc,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {}: loss {:.4}{} ({:.1}s)",
            stats.epoch,
            stats.train_loss,
            stats
                .dev_auc
                .map(|a| format!(", dev AUC {a:.4}"))
                .unwrap_or_default(),
            stats.seconds
        );
        history.push(stats);
        if let (Some(patience), Some(_)) = (tc.patience, dev_pairs) {
            if stale >= patience {
                break;
            }
        }
    }

    let (params, best_dev_auc, best_epoch) = match best {
        Some((auc, epoch, p)) => (p, Some(auc), Some(epoch)),
        None => (params, None, None),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_dev_auc,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synthetic::{gen_synthetic_corpus, SyntheticCorpusSpec};
    use crate::tokenizer::build_vocab;

    fn tiny_setup() -> (SnippetStore, Vec<PairExample>, Vocab) {
        let corpus = gen_synthetic_corpus(&SyntheticCorpusSpec {
            num_functions: 8,
            min_instructions: 2,
            max_instructions: 4,
            n_neg: 3,
            seed: 7,
            ..SyntheticCorpusSpec::default()
        })
        .unwrap();
        let vocab = build_vocab(corpus.store.iter()).unwrap();
        let mut pairs = corpus.train_pairs.clone();
        pairs.extend(corpus.dev_pairs.clone());
        pairs.extend(corpus.test_pairs.clone());
        (corpus.store, pairs, vocab)
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (store, pairs, vocab) = tiny_setup();
        let cfg = ModelConfig::tiny(16);
        let gcfg = GraphConfig::default();
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let out1 = train(&cfg, &gcfg, &vocab, &store, &pairs, None, &tc).unwrap();
        let out2 = train(&cfg, &gcfg, &vocab, &store, &pairs, None, &tc).unwrap();
        assert!(out1.history.last().unwrap().train_loss < out1.history[0].train_loss);
        for (name, v1) in out1.params.iter() {
            assert_eq!(v1, out2.params.get(name), "{name} differs between runs");
        }
    }

    #[test]
    fn dev_selection_tracks_best_epoch() {
        let (store, pairs, vocab) = tiny_setup();
        let (train_set, dev_set) = pairs.split_at(pairs.len() / 2);
        let cfg = ModelConfig::tiny(16);
        let gcfg = GraphConfig::default();
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &gcfg, &vocab, &store, train_set, Some(dev_set), &tc).unwrap();
        let best = out.best_dev_auc.unwrap();
        for s in &out.history {
            assert!(s.dev_auc.unwrap() <= best + 1e-12);
        }
        assert!(out.best_epoch.is_some());
    }

    #[test]
    fn score_pair_is_a_probability() {
        let (store, pairs, vocab) = tiny_setup();
        let cfg = ModelConfig::tiny(16);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = init_params(&cfg, &vocab, &mut rng).unwrap();
        let gcfg = GraphConfig::default();
        let p = &pairs[0];
        let s = score_pair(
            &cfg,
            &vocab,
            &params,
            &gcfg,
            store.get(&p.id_a).unwrap(),
            store.get(&p.id_b).unwrap(),
        )
        .unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
}
