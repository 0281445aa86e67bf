//! The neural comparison pipeline: token/char vectorization, Bi-LSTM
//! sequence encoding, R-GCN refinement over the association graph, a second
//! Bi-LSTM with max-pooling, and the fusion classifier.

use crate::error::{Error, Result};
use crate::graph::{AssocGraph, NUM_EDGE_TYPES};
use crate::nn::{GradSet, ParamSet, Tape, VarId};
use crate::tokenizer::{TokenSequence, Vocab, CHAR_PAD_ID};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One transformation matrix per edge type (R-GCN proper).
    #[default]
    TypeSpecific,
    /// Single shared matrix over the union neighborhood (classic GCN-style
    /// ablation).
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeighting {
    /// Plain mean over neighbors, exactly as the update rule is printed.
    #[default]
    Unweighted,
    /// Weighted mean using edge firing counts.
    FrequencyWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub token_emb_dim: usize,
    pub char_emb_dim: usize,
    pub char_filter_width: usize,
    pub char_filter_count: usize,
    pub bilstm_layers: usize,
    pub rgcn_layers: usize,
    pub hidden_dim: usize,
    pub num_edge_types: usize,
    pub dropout: f64,
    pub rgcn_aggregation: Aggregation,
    pub edge_weighting: EdgeWeighting,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            token_emb_dim: 128,
            char_emb_dim: 32,
            char_filter_width: 2,
            char_filter_count: 64,
            bilstm_layers: 1,
            rgcn_layers: 2,
            hidden_dim: 256,
            num_edge_types: NUM_EDGE_TYPES,
            dropout: 0.0,
            rgcn_aggregation: Aggregation::TypeSpecific,
            edge_weighting: EdgeWeighting::Unweighted,
            activation: Activation::Relu,
        }
    }
}

impl ModelConfig {
    /// A small configuration for tests and desk-scale corpora, keeping the
    /// pipeline shape but shrinking every dimension.
    pub fn tiny(hidden_dim: usize) -> Self {
        ModelConfig {
            token_emb_dim: hidden_dim / 2,
            char_emb_dim: hidden_dim / 4,
            char_filter_width: 2,
            char_filter_count: hidden_dim / 2,
            hidden_dim,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.token_emb_dim,
            self.char_emb_dim,
            self.char_filter_width,
            self.char_filter_count,
            self.hidden_dim,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.hidden_dim % 2 != 0 {
            return Err(Error::Config("hidden_dim must be even (Bi-LSTM halves)".into()));
        }
        if self.bilstm_layers == 0 {
            return Err(Error::Config("bilstm_layers must be >= 1".into()));
        }
        if self.num_edge_types != NUM_EDGE_TYPES {
            return Err(Error::Config(format!(
                "num_edge_types must be {NUM_EDGE_TYPES}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn token_vec_dim(&self) -> usize {
        self.token_emb_dim + self.char_filter_count
    }

    fn lstm_half(&self) -> usize {
        self.hidden_dim / 2
    }
}

/// Probability plus the raw two-class logits behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    /// Probability of the "same source" class.
    pub probability: f64,
    pub logits: [f64; 2],
}

/// Initialize all learnable parameters for a config and vocabulary.
pub fn init_params(cfg: &ModelConfig, vocab: &Vocab, rng: &mut ChaCha8Rng) -> Result<ParamSet> {
    cfg.validate()?;
    let mut p = ParamSet::new();
    p.init_xavier("token_emb", vocab.num_tokens(), cfg.token_emb_dim, rng);
    p.init_xavier("char_emb", vocab.num_chars(), cfg.char_emb_dim, rng);
    p.init_xavier(
        "char_conv_w",
        cfg.char_filter_width * cfg.char_emb_dim,
        cfg.char_filter_count,
        rng,
    );
    p.init_zeros("char_conv_b", 1, cfg.char_filter_count);

    let h = cfg.lstm_half();
    for layer in 0..cfg.bilstm_layers {
        let input = if layer == 0 {
            cfg.token_vec_dim()
        } else {
            cfg.hidden_dim
        };
        for dir in ["fw", "bw"] {
            init_lstm(&mut p, &format!("enc{layer}_{dir}"), input, h, rng);
        }
    }
    for layer in 0..cfg.rgcn_layers {
        p.init_xavier(&format!("rgcn{layer}_w0"), cfg.hidden_dim, cfg.hidden_dim, rng);
        match cfg.rgcn_aggregation {
            Aggregation::TypeSpecific => {
                for r in 0..NUM_EDGE_TYPES {
                    p.init_xavier(
                        &format!("rgcn{layer}_wr{r}"),
                        cfg.hidden_dim,
                        cfg.hidden_dim,
                        rng,
                    );
                }
            }
            Aggregation::Shared => {
                p.init_xavier(
                    &format!("rgcn{layer}_wr_shared"),
                    cfg.hidden_dim,
                    cfg.hidden_dim,
                    rng,
                );
            }
        }
    }
    for dir in ["fw", "bw"] {
        init_lstm(&mut p, &format!("pool_{dir}"), cfg.hidden_dim, h, rng);
    }
    p.init_xavier("mlp_w", 4 * cfg.hidden_dim, 2, rng);
    p.init_zeros("mlp_b", 1, 2);
    Ok(p)
}

fn init_lstm(p: &mut ParamSet, prefix: &str, input: usize, h: usize, rng: &mut ChaCha8Rng) {
    p.init_xavier(&format!("{prefix}_w"), input + h, 4 * h, rng);
    // forget-gate bias starts at 1
    let mut b = Array2::zeros((1, 4 * h));
    b.slice_mut(ndarray::s![.., h..2 * h]).fill(1.0);
    p.insert(&format!("{prefix}_b"), b);
}

/// Per-relation message lists: `(dst_node, src_node, coefficient)` triples
/// implementing the normalized (or frequency-weighted) mean over each
/// relation's neighborhood. Undirected edges expand in both directions, e0
/// only along opcode -> operand.
pub fn relation_messages(
    graph: &AssocGraph,
    weighting: EdgeWeighting,
    aggregation: Aggregation,
) -> Vec<Vec<(usize, usize, f64)>> {
    let n = graph.num_nodes();
    // expanded[(relation)][dst] -> list of (src, weight)
    let relations = match aggregation {
        Aggregation::TypeSpecific => NUM_EDGE_TYPES,
        Aggregation::Shared => 1,
    };
    let mut incoming: Vec<Vec<Vec<(usize, f64)>>> = vec![vec![Vec::new(); n]; relations];
    for e in &graph.edges {
        let r = match aggregation {
            Aggregation::TypeSpecific => e.etype.index(),
            Aggregation::Shared => 0,
        };
        let w = e.weight as f64;
        incoming[r][e.dst].push((e.src, w));
        if !e.etype.is_directed() {
            incoming[r][e.src].push((e.dst, w));
        }
    }
    if aggregation == Aggregation::Shared {
        // distinct neighbor contributions: merge parallel edges of different
        // types between the same endpoints
        for lists in incoming[0].iter_mut() {
            lists.sort_by_key(|&(src, _)| src);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(lists.len());
            for &(src, w) in lists.iter() {
                match merged.last_mut() {
                    Some((last, lw)) if *last == src => *lw += w,
                    _ => merged.push((src, w)),
                }
            }
            *lists = merged;
        }
    }
    incoming
        .into_iter()
        .map(|per_dst| {
            let mut pairs = Vec::new();
            for (dst, neighbors) in per_dst.into_iter().enumerate() {
                if neighbors.is_empty() {
                    continue;
                }
                match weighting {
                    EdgeWeighting::Unweighted => {
                        let coeff = 1.0 / neighbors.len() as f64;
                        for (src, _) in neighbors {
                            pairs.push((dst, src, coeff));
                        }
                    }
                    EdgeWeighting::FrequencyWeighted => {
                        let total: f64 = neighbors.iter().map(|&(_, w)| w).sum();
                        for (src, w) in neighbors {
                            pairs.push((dst, src, w / total));
                        }
                    }
                }
            }
            pairs
        })
        .collect()
}

/// A model bound to its config, vocabulary, and parameters; builds one tape
/// per forward pass.
pub struct ModelRuntime<'a> {
    pub cfg: &'a ModelConfig,
    pub vocab: &'a Vocab,
    pub params: &'a ParamSet,
}

/// The recorded forward pass of one pair, ready for scoring or backprop.
pub struct PairForward {
    pub score: SimilarityScore,
    tape: Tape,
    logits: VarId,
    param_vars: HashMap<String, VarId>,
}

impl PairForward {
    /// Accumulate `scale * d(loss)/d(param)` for the cross-entropy of this
    /// pair's logits against `label`.
    pub fn backprop(mut self, label: usize, scale: f64, grads: &mut GradSet) {
        let loss = self.tape.softmax_cross_entropy(self.logits, label);
        let all = self.tape.backward(loss, scale);
        for (name, var) in &self.param_vars {
            if let Some(g) = &all[*var] {
                grads.accumulate(name, g);
            }
        }
    }

    pub fn loss(&mut self, label: usize) -> f64 {
        let loss = self.tape.softmax_cross_entropy(self.logits, label);
        self.tape.scalar(loss)
    }
}

impl<'a> ModelRuntime<'a> {
    pub fn new(cfg: &'a ModelConfig, vocab: &'a Vocab, params: &'a ParamSet) -> Self {
        ModelRuntime { cfg, vocab, params }
    }

    fn bind(&self, tape: &mut Tape) -> HashMap<String, VarId> {
        self.params
            .iter()
            .map(|(name, value)| (name.to_string(), tape.leaf(value.clone())))
            .collect()
    }

    /// Token vectorization: token-embedding lookup concatenated with the
    /// max-pooled char 1D-conv features. Output is `l x token_vec_dim`.
    pub fn vectorize_tokens(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        seq: &TokenSequence,
    ) -> VarId {
        let token_ids: Vec<usize> = seq
            .tokens
            .iter()
            .map(|t| self.vocab.token_id(&t.text))
            .collect();
        let token_vecs = tape.select_rows(vars["token_emb"], &token_ids);

        let width = self.cfg.char_filter_width;
        let mut char_vecs = Vec::with_capacity(seq.len());
        for t in &seq.tokens {
            let mut char_ids = self.vocab.char_ids(&t.text);
            while char_ids.len() < width {
                char_ids.push(CHAR_PAD_ID);
            }
            let emb = tape.select_rows(vars["char_emb"], &char_ids);
            let cols: Vec<VarId> = (0..width)
                .map(|k| {
                    let rows: Vec<usize> = (0..char_ids.len() - width + 1).map(|i| i + k).collect();
                    tape.select_rows(emb, &rows)
                })
                .collect();
            let windows = tape.concat_cols(&cols);
            let conv = tape.matmul(windows, vars["char_conv_w"]);
            let conv = tape.add_row(conv, vars["char_conv_b"]);
            let conv = self.activation(tape, conv);
            char_vecs.push(tape.max_rows(conv));
        }
        let chars = tape.concat_rows(&char_vecs);
        tape.concat_cols(&[token_vecs, chars])
    }

    fn activation(&self, tape: &mut Tape, v: VarId) -> VarId {
        match self.cfg.activation {
            Activation::Relu => tape.relu(v),
            Activation::Tanh => tape.tanh(v),
        }
    }

    fn lstm_direction(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        rows: &[VarId],
        prefix: &str,
        reverse: bool,
    ) -> Vec<VarId> {
        let h = self.cfg.lstm_half();
        let w = vars[&format!("{prefix}_w")];
        let b = vars[&format!("{prefix}_b")];
        let mut h_prev = tape.leaf(Array2::zeros((1, h)));
        let mut c_prev = tape.leaf(Array2::zeros((1, h)));
        let order: Vec<usize> = if reverse {
            (0..rows.len()).rev().collect()
        } else {
            (0..rows.len()).collect()
        };
        let mut states = vec![0usize; rows.len()];
        for t in order {
            let z = tape.concat_cols(&[h_prev, rows[t]]);
            let pre = tape.matmul(z, w);
            let pre = tape.add_row(pre, b);
            let i_pre = tape.slice_cols(pre, 0, h);
            let f_pre = tape.slice_cols(pre, h, 2 * h);
            let g_pre = tape.slice_cols(pre, 2 * h, 3 * h);
            let o_pre = tape.slice_cols(pre, 3 * h, 4 * h);
            let i = tape.sigmoid(i_pre);
            let f = tape.sigmoid(f_pre);
            let g = tape.tanh(g_pre);
            let o = tape.sigmoid(o_pre);
            let fc = tape.mul(f, c_prev);
            let ig = tape.mul(i, g);
            let c = tape.add(fc, ig);
            let tc = tape.tanh(c);
            let hv = tape.mul(o, tc);
            states[t] = hv;
            h_prev = hv;
            c_prev = c;
        }
        states
    }

    fn bilstm(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        input: VarId,
        prefix: &str,
    ) -> VarId {
        let len = tape.value(input).nrows();
        let rows: Vec<VarId> = (0..len).map(|i| tape.select_rows(input, &[i])).collect();
        let fw = self.lstm_direction(tape, vars, &rows, &format!("{prefix}_fw"), false);
        let bw = self.lstm_direction(tape, vars, &rows, &format!("{prefix}_bw"), true);
        let per_pos: Vec<VarId> = fw
            .iter()
            .zip(&bw)
            .map(|(&f, &b)| tape.concat_cols(&[f, b]))
            .collect();
        tape.concat_rows(&per_pos)
    }

    /// Bi-LSTM encoding keeping every position's hidden state
    /// (`l x hidden_dim`).
    pub fn encode_sequence(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        vectors: VarId,
    ) -> VarId {
        let mut state = vectors;
        for layer in 0..self.cfg.bilstm_layers {
            state = self.bilstm(tape, vars, state, &format!("enc{layer}"));
        }
        state
    }

    /// One R-GCN layer over precomputed relation message lists.
    pub fn rgcn_layer(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        node_states: VarId,
        messages: &[Vec<(usize, usize, f64)>],
        layer: usize,
    ) -> Result<VarId> {
        let n = tape.value(node_states).nrows();
        let self_term = tape.matmul(node_states, vars[&format!("rgcn{layer}_w0")]);
        let mut acc = self_term;
        for (r, pairs) in messages.iter().enumerate() {
            if pairs.is_empty() {
                continue;
            }
            let wr = match self.cfg.rgcn_aggregation {
                Aggregation::TypeSpecific => vars[&format!("rgcn{layer}_wr{r}")],
                Aggregation::Shared => vars[&format!("rgcn{layer}_wr_shared")],
            };
            let transformed = tape.matmul(node_states, wr);
            let scattered = tape.scatter_rows(transformed, pairs, n);
            acc = tape.add(acc, scattered);
        }
        Ok(self.activation(tape, acc))
    }

    /// Stack the configured R-GCN layers over the pair's joint node states
    /// and split the result back per side.
    pub fn refine(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        h_a: VarId,
        h_b: VarId,
        graph: &AssocGraph,
    ) -> Result<(VarId, VarId)> {
        let len_a = tape.value(h_a).nrows();
        let len_b = tape.value(h_b).nrows();
        if len_a != graph.len_a || len_b != graph.len_b {
            return Err(Error::Shape(format!(
                "graph has {}+{} nodes but hidden states are {}+{}",
                graph.len_a, graph.len_b, len_a, len_b
            )));
        }
        let mut state = tape.concat_rows(&[h_a, h_b]);
        if self.cfg.rgcn_layers > 0 {
            let messages =
                relation_messages(graph, self.cfg.edge_weighting, self.cfg.rgcn_aggregation);
            for layer in 0..self.cfg.rgcn_layers {
                state = self.rgcn_layer(tape, vars, state, &messages, layer)?;
            }
        }
        let idx_a: Vec<usize> = (0..len_a).collect();
        let idx_b: Vec<usize> = (len_a..len_a + len_b).collect();
        let r_a = tape.select_rows(state, &idx_a);
        let r_b = tape.select_rows(state, &idx_b);
        Ok((r_a, r_b))
    }

    /// Second-stage Bi-LSTM plus elementwise max over positions
    /// (`1 x hidden_dim`).
    pub fn pool_snippet(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        refined: VarId,
    ) -> VarId {
        let encoded = self.bilstm(tape, vars, refined, "pool");
        tape.max_rows(encoded)
    }

    /// Fusion feature vector `[F_a; F_b; F_a - F_b; F_a . F_b]` (`1 x 4d`).
    pub fn fuse_features(&self, tape: &mut Tape, f_a: VarId, f_b: VarId) -> Result<VarId> {
        if tape.value(f_a).ncols() != tape.value(f_b).ncols() {
            return Err(Error::Shape(format!(
                "pooled dims differ: {} vs {}",
                tape.value(f_a).ncols(),
                tape.value(f_b).ncols()
            )));
        }
        let diff = tape.sub(f_a, f_b);
        let prod = tape.mul(f_a, f_b);
        Ok(tape.concat_cols(&[f_a, f_b, diff, prod]))
    }

    /// Fusion + single affine classifier + softmax.
    pub fn fuse_and_score(
        &self,
        tape: &mut Tape,
        vars: &HashMap<String, VarId>,
        f_a: VarId,
        f_b: VarId,
    ) -> Result<(SimilarityScore, VarId)> {
        let features = self.fuse_features(tape, f_a, f_b)?;
        let logits = tape.matmul(features, vars["mlp_w"]);
        let logits = tape.add_row(logits, vars["mlp_b"]);
        let probs = tape.softmax_value(logits);
        let value = tape.value(logits);
        Ok((
            SimilarityScore {
                probability: probs[1],
                logits: [value[[0, 0]], value[[0, 1]]],
            },
            logits,
        ))
    }

    /// Full pipeline for one pair. `dropout_rng` enables training-mode
    /// dropout; pass `None` for deterministic evaluation.
    pub fn forward_pair(
        &self,
        seq_a: &TokenSequence,
        seq_b: &TokenSequence,
        graph: &AssocGraph,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<PairForward> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let e_a = self.vectorize_tokens(&mut tape, &vars, seq_a);
        let e_b = self.vectorize_tokens(&mut tape, &vars, seq_b);
        let e_a = self.maybe_dropout(&mut tape, e_a, &mut dropout_rng);
        let e_b = self.maybe_dropout(&mut tape, e_b, &mut dropout_rng);
        let h_a = self.encode_sequence(&mut tape, &vars, e_a);
        let h_b = self.encode_sequence(&mut tape, &vars, e_b);
        let (r_a, r_b) = self.refine(&mut tape, &vars, h_a, h_b, graph)?;
        let r_a = self.maybe_dropout(&mut tape, r_a, &mut dropout_rng);
        let r_b = self.maybe_dropout(&mut tape, r_b, &mut dropout_rng);
        let f_a = self.pool_snippet(&mut tape, &vars, r_a);
        let f_b = self.pool_snippet(&mut tape, &vars, r_b);
        let (score, logits) = self.fuse_and_score(&mut tape, &vars, f_a, f_b)?;
        Ok(PairForward {
            score,
            tape,
            logits,
            param_vars: vars,
        })
    }

    fn maybe_dropout(
        &self,
        tape: &mut Tape,
        v: VarId,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> VarId {
        let p = self.cfg.dropout;
        let Some(rng) = rng.as_deref_mut() else {
            return v;
        };
        if p == 0.0 {
            return v;
        }
        let keep = 1.0 - p;
        let mask = Array2::from_shape_fn(tape.value(v).dim(), |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        tape.mul_const(v, mask)
    }
}

/// Mean two-class cross-entropy of a batch of scores against labels.
pub fn mean_cross_entropy(scores: &[SimilarityScore], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "batch lengths differ: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let mut total = 0.0;
    for (s, &label) in scores.iter().zip(labels) {
        if label > 1 {
            return Err(Error::BadLabel(label as i64));
        }
        let p_true = if label == 1 {
            s.probability
        } else {
            1.0 - s.probability
        };
        total += -(p_true.max(1e-300)).ln();
    }
    Ok(total / scores.len() as f64)
}
