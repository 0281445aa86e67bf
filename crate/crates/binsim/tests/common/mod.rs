//! Shared helpers for the integration suites: random corpus generation,
//! independent brute-force oracles, and a dense-adjacency R-GCN reference.

#![allow(dead_code)]

use binsim::graph::{AlignFormula, AssocGraph, EdgeType, GraphConfig, Side};
use binsim::model::{Activation, Aggregation, EdgeWeighting};
use binsim::tokenizer::{RegisterTables, TokenRole, TokenSequence};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const OPCODES: &[&str] = &[
    "MOV", "MOVE", "MOVZ", "ADD", "ADDS", "ADDIU", "SUB", "SUBS", "SUBSD", "JMP", "B", "BEQ",
    "LW", "STR", "X9", "RET",
];
const OPERANDS: &[&str] = &[
    "R0", "R1", "R2", "V0", "V1", "A0", "4", "42", "0x1F", "-8", "[R1+4]", "(V0)", "[R2]", "FOO",
    "BAR",
];

/// A random token sequence of exactly `target_tokens` tokens, built from
/// random instructions with 0-3 operands each.
pub fn random_sequence(
    rng: &mut ChaCha8Rng,
    id: &str,
    arch: &str,
    target_tokens: usize,
) -> TokenSequence {
    assert!(target_tokens >= 1);
    let mut instructions: Vec<Vec<String>> = Vec::new();
    let mut total = 0usize;
    while total < target_tokens {
        let max_ops = (target_tokens - total - 1).min(3);
        let n_ops = rng.gen_range(0..=max_ops);
        let mut fields = vec![OPCODES[rng.gen_range(0..OPCODES.len())].to_string()];
        for _ in 0..n_ops {
            fields.push(OPERANDS[rng.gen_range(0..OPERANDS.len())].to_string());
        }
        total += fields.len();
        instructions.push(fields);
    }
    TokenSequence::from_pretokenized(id, arch, &instructions, &RegisterTables::builtin())
        .expect("random instructions tokenize")
}

pub type EdgeTuple = (usize, usize, EdgeType, u32);

pub fn edge_set(g: &AssocGraph) -> BTreeSet<EdgeTuple> {
    g.edges
        .iter()
        .map(|e| (e.src, e.dst, e.etype, e.weight))
        .collect()
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn prefix_n(s: &str, n: usize) -> Option<String> {
    if char_len(s) < n {
        None
    } else {
        Some(s.chars().take(n).collect())
    }
}

/// Brute-force oracle: test every (node, node, type) triple independently
/// against the published edge rules. Weights are always 1 under occurrence
/// semantics; undirected edges are reported once with src < dst.
pub fn oracle_edges(
    seq_a: &TokenSequence,
    seq_b: &TokenSequence,
    cfg: &GraphConfig,
) -> BTreeSet<EdgeTuple> {
    let la = seq_a.len();
    let lb = seq_b.len();
    let n = la + lb;
    // (side, position, token)
    let node = |id: usize| {
        if id < la {
            (Side::A, id, &seq_a.tokens[id])
        } else {
            (Side::B, id - la, &seq_b.tokens[id - la])
        }
    };
    let enabled = |t: EdgeType| cfg.enabled_types.contains(&t);
    let iota = cfg.align_threshold;
    // exact integer form of |i * num / den - j| < iota, valid for integer
    // iota (den > 0): |i * num - j * den| < iota * den
    let align = |i: usize, j: usize| -> bool {
        let (num, den) = match cfg.align_formula {
            AlignFormula::AsWritten => (la as i64, lb as i64),
            AlignFormula::Rescaled => (lb as i64, la as i64),
        };
        let lhs = (i as i64 * num - j as i64 * den).abs() as f64;
        lhs < iota * den as f64
    };

    let mut out = BTreeSet::new();
    for u in 0..n {
        for v in 0..n {
            let (su, pu, tu) = node(u);
            let (sv, pv, tv) = node(v);
            // e0: directed opcode -> operand inside one instruction
            if enabled(EdgeType::E0OpcodeOperand)
                && su == sv
                && tu.instr_index == tv.instr_index
                && tu.role == TokenRole::Opcode
                && tv.role == TokenRole::Operand
            {
                out.insert((u, v, EdgeType::E0OpcodeOperand, 1));
            }
            if u >= v {
                continue;
            }
            // e1: operand co-occurrence inside one instruction
            if enabled(EdgeType::E1OperandCooccur)
                && su == sv
                && tu.instr_index == tv.instr_index
                && tu.role == TokenRole::Operand
                && tv.role == TokenRole::Operand
            {
                out.insert((u, v, EdgeType::E1OperandCooccur, 1));
            }
            if su != Side::A || sv != Side::B {
                continue;
            }
            // e2: opcode prefix match of exactly prefix_len chars
            if enabled(EdgeType::E2OpcodePrefix)
                && tu.role == TokenRole::Opcode
                && tv.role == TokenRole::Opcode
            {
                if let (Some(pa), Some(pb)) =
                    (prefix_n(&tu.text, cfg.prefix_len), prefix_n(&tv.text, cfg.prefix_len))
                {
                    if pa == pb {
                        out.insert((u, v, EdgeType::E2OpcodePrefix, 1));
                    }
                }
            }
            // e3: operand value match on normalized text
            if enabled(EdgeType::E3OperandValue)
                && tu.role == TokenRole::Operand
                && tv.role == TokenRole::Operand
                && tu.text == tv.text
            {
                out.insert((u, v, EdgeType::E3OperandValue, 1));
            }
            // e4: operand type match, symbols never fire
            if enabled(EdgeType::E4OperandType)
                && tu.role == TokenRole::Operand
                && tv.role == TokenRole::Operand
                && tu.operand_kind == tv.operand_kind
                && matches!(
                    tu.operand_kind,
                    binsim::tokenizer::OperandKind::Register
                        | binsim::tokenizer::OperandKind::Immediate
                        | binsim::tokenizer::OperandKind::Memory
                )
            {
                out.insert((u, v, EdgeType::E4OperandType, 1));
            }
            // e5: heuristic position alignment
            if enabled(EdgeType::E5PositionAlign) && align(pu, pv) {
                out.insert((u, v, EdgeType::E5PositionAlign, 1));
            }
        }
    }
    out
}

/// Exact-arithmetic enumeration of the alignment condition, independent of
/// the float formula in the library (valid for integer thresholds).
pub fn alignment_oracle(
    len_a: usize,
    len_b: usize,
    iota: i64,
    formula: AlignFormula,
) -> BTreeSet<(usize, usize)> {
    let (num, den) = match formula {
        AlignFormula::AsWritten => (len_a as i64, len_b as i64),
        AlignFormula::Rescaled => (len_b as i64, len_a as i64),
    };
    let mut out = BTreeSet::new();
    for i in 0..len_a {
        for j in 0..len_b {
            if (i as i64 * num - j as i64 * den).abs() < iota * den {
                out.insert((i, j));
            }
        }
    }
    out
}

fn apply_activation(mut m: Array2<f64>, act: Activation) -> Array2<f64> {
    match act {
        Activation::Relu => m.mapv_inplace(|x| x.max(0.0)),
        Activation::Tanh => m.mapv_inplace(f64::tanh),
    }
    m
}

/// Dense-adjacency R-GCN layer reference:
/// `act(sum_r norm(A_r) . H . W_r + H . W_0)`.
///
/// For `Shared` aggregation all relations collapse into one union adjacency
/// (distinct neighbors) transformed by a single matrix.
pub fn dense_rgcn_reference(
    graph: &AssocGraph,
    h: &Array2<f64>,
    w0: &Array2<f64>,
    wr: &[Array2<f64>],
    weighting: EdgeWeighting,
    aggregation: Aggregation,
    activation: Activation,
) -> Array2<f64> {
    let n = graph.num_nodes();
    let relations = match aggregation {
        Aggregation::TypeSpecific => EdgeType::ALL.len(),
        Aggregation::Shared => 1,
    };
    // adjacency[r][[dst, src]] = summed edge weight
    let mut adj = vec![Array2::<f64>::zeros((n, n)); relations];
    for e in &graph.edges {
        let r = match aggregation {
            Aggregation::TypeSpecific => e.etype.index(),
            Aggregation::Shared => 0,
        };
        adj[r][[e.dst, e.src]] += e.weight as f64;
        if !e.etype.is_directed() {
            adj[r][[e.src, e.dst]] += e.weight as f64;
        }
    }
    let mut out = h.dot(w0);
    for (r, a) in adj.iter_mut().enumerate() {
        if let EdgeWeighting::Unweighted = weighting {
            a.mapv_inplace(|x| if x > 0.0 { 1.0 } else { 0.0 });
        }
        for mut row in a.rows_mut() {
            let total: f64 = row.sum();
            if total > 0.0 {
                row.mapv_inplace(|x| x / total);
            }
        }
        out = out + a.dot(&h.dot(&wr[r]));
    }
    apply_activation(out, activation)
}
