//! Edit-distance baseline scorer.

use crate::error::Result;
use crate::harness::metrics::eval_auc;
use crate::harness::store::{PairExample, SnippetStore};
use crate::tokenizer::TokenSequence;

/// Levenshtein distance over chars, two-row dynamic programming.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + (ca != cb) as usize;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn joined_tokens(seq: &TokenSequence) -> String {
    seq.tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// `1 - d / max(len)` over the space-joined normalized token strings.
pub fn edit_similarity(seq_a: &TokenSequence, seq_b: &TokenSequence) -> f64 {
    let a = joined_tokens(seq_a);
    let b = joined_tokens(seq_b);
    let max_len = a.chars().count().max(b.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / max_len as f64
}

/// AUC of the edit-distance similarity over a labeled pair set.
pub fn baseline_edit_distance(pairs: &[PairExample], store: &SnippetStore) -> Result<f64> {
    let mut scored = Vec::with_capacity(pairs.len());
    for p in pairs {
        let sim = edit_similarity(store.get(&p.id_a)?, store.get(&p.id_b)?);
        scored.push((sim, p.label));
    }
    eval_auc(&scored)
}
