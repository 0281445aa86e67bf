//! Multi-relational instruction association graph construction.
//!
//! For a pair of token sequences the builder emits six edge types:
//! two mono-architecture types (opcode-operates-operand `e0`, operand
//! co-occurrence `e1`) and four cross-architecture types (opcode prefix
//! match `e2`, operand value match `e3`, operand type match `e4`, heuristic
//! position alignment `e5`). `e0` is directed, the rest are undirected and
//! stored once with `src < dst`.

use crate::error::{Error, Result};
use crate::tokenizer::{OperandKind, Token, TokenRole, TokenSequence};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const NUM_EDGE_TYPES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    #[serde(rename = "e0")]
    E0OpcodeOperand,
    #[serde(rename = "e1")]
    E1OperandCooccur,
    #[serde(rename = "e2")]
    E2OpcodePrefix,
    #[serde(rename = "e3")]
    E3OperandValue,
    #[serde(rename = "e4")]
    E4OperandType,
    #[serde(rename = "e5")]
    E5PositionAlign,
}

impl EdgeType {
    pub const ALL: [EdgeType; NUM_EDGE_TYPES] = [
        EdgeType::E0OpcodeOperand,
        EdgeType::E1OperandCooccur,
        EdgeType::E2OpcodePrefix,
        EdgeType::E3OperandValue,
        EdgeType::E4OperandType,
        EdgeType::E5PositionAlign,
    ];

    pub const MONO_ARCH: [EdgeType; 2] = [EdgeType::E0OpcodeOperand, EdgeType::E1OperandCooccur];
    pub const CROSS_ARCH: [EdgeType; 4] = [
        EdgeType::E2OpcodePrefix,
        EdgeType::E3OperandValue,
        EdgeType::E4OperandType,
        EdgeType::E5PositionAlign,
    ];

    pub fn index(self) -> usize {
        match self {
            EdgeType::E0OpcodeOperand => 0,
            EdgeType::E1OperandCooccur => 1,
            EdgeType::E2OpcodePrefix => 2,
            EdgeType::E3OperandValue => 3,
            EdgeType::E4OperandType => 4,
            EdgeType::E5PositionAlign => 5,
        }
    }

    pub fn is_directed(self) -> bool {
        self == EdgeType::E0OpcodeOperand
    }

    pub fn is_cross_arch(self) -> bool {
        matches!(
            self,
            EdgeType::E2OpcodePrefix
                | EdgeType::E3OperandValue
                | EdgeType::E4OperandType
                | EdgeType::E5PositionAlign
        )
    }

    pub fn parse(s: &str) -> Option<EdgeType> {
        match s {
            "e0" => Some(EdgeType::E0OpcodeOperand),
            "e1" => Some(EdgeType::E1OperandCooccur),
            "e2" => Some(EdgeType::E2OpcodePrefix),
            "e3" => Some(EdgeType::E3OperandValue),
            "e4" => Some(EdgeType::E4OperandType),
            "e5" => Some(EdgeType::E5PositionAlign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

/// A token occurrence promoted to a graph node. Side-A nodes occupy ids
/// `[0, l_a)`, side-B nodes `[l_a, l_a + l_b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub node_id: usize,
    pub side: Side,
    /// Token position within its own sequence.
    pub position: usize,
    pub token: Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypedEdge {
    pub src: usize,
    pub dst: usize,
    pub etype: EdgeType,
    /// Rule firing count; 1 under occurrence-node semantics.
    pub weight: u32,
}

/// Which direction of Eq-style position scaling to apply for `e5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlignFormula {
    /// `|i * l_a / l_b - j| < iota`, the published form.
    #[default]
    AsWritten,
    /// `|i * l_b / l_a - j| < iota`, rescaling side-A positions into side-B range.
    Rescaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    /// Opcode prefix length for e2.
    pub prefix_len: usize,
    /// Position alignment threshold for e5.
    pub align_threshold: f64,
    pub align_formula: AlignFormula,
    /// Edge types to build, as `"e0"`..`"e5"` strings.
    pub enabled_types: Vec<EdgeType>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            prefix_len: 3,
            align_threshold: 2.0,
            align_formula: AlignFormula::AsWritten,
            enabled_types: EdgeType::ALL.to_vec(),
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prefix_len < 1 {
            return Err(Error::Config("prefix_len must be >= 1".into()));
        }
        if !(self.align_threshold > 0.0) {
            return Err(Error::Config("align_threshold must be > 0".into()));
        }
        Ok(())
    }

    pub fn enabled(&self, t: EdgeType) -> bool {
        self.enabled_types.contains(&t)
    }

    /// Ablation helper: drop the listed edge types.
    pub fn without(mut self, types: &[EdgeType]) -> Self {
        self.enabled_types.retain(|t| !types.contains(t));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssocGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<TypedEdge>,
    pub config: GraphConfig,
    pub len_a: usize,
    pub len_b: usize,
}

impl AssocGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Check the structural side restrictions: e0/e1 stay within one side,
    /// e2-e5 bridge the two sides.
    pub fn check_type_partition(&self) -> Result<()> {
        for e in &self.edges {
            let sa = self.nodes[e.src].side;
            let sb = self.nodes[e.dst].side;
            let cross = sa != sb;
            if e.etype.is_cross_arch() != cross {
                return Err(Error::Config(format!(
                    "edge {:?} violates side restriction ({:?} -> {:?})",
                    e.etype, sa, sb
                )));
            }
        }
        Ok(())
    }
}

/// Build the association graph for one cross-architecture pair.
///
/// Output is deterministic: edges are collected per rule, duplicate
/// `(src, dst, etype)` firings collapse into a weight count, and the final
/// edge list is sorted.
pub fn build_graph(
    seq_a: &TokenSequence,
    seq_b: &TokenSequence,
    cfg: &GraphConfig,
) -> Result<AssocGraph> {
    cfg.validate()?;
    if seq_a.is_empty() {
        return Err(Error::EmptySequence {
            snippet_id: seq_a.snippet_id.clone(),
        });
    }
    if seq_b.is_empty() {
        return Err(Error::EmptySequence {
            snippet_id: seq_b.snippet_id.clone(),
        });
    }
    let len_a = seq_a.len();
    let len_b = seq_b.len();
    let mut nodes = Vec::with_capacity(len_a + len_b);
    for (pos, token) in seq_a.tokens.iter().enumerate() {
        nodes.push(GraphNode {
            node_id: pos,
            side: Side::A,
            position: pos,
            token: token.clone(),
        });
    }
    for (pos, token) in seq_b.tokens.iter().enumerate() {
        nodes.push(GraphNode {
            node_id: len_a + pos,
            side: Side::B,
            position: pos,
            token: token.clone(),
        });
    }

    let mut raw: Vec<TypedEdge> = Vec::new();
    if cfg.enabled(EdgeType::E0OpcodeOperand) || cfg.enabled(EdgeType::E1OperandCooccur) {
        for (seq, offset) in [(seq_a, 0usize), (seq_b, len_a)] {
            for mut e in edges_e0_e1(seq) {
                e.src += offset;
                e.dst += offset;
                if cfg.enabled(e.etype) {
                    raw.push(e);
                }
            }
        }
    }
    if cfg.enabled(EdgeType::E2OpcodePrefix) {
        raw.extend(edges_e2(seq_a, seq_b, cfg.prefix_len));
    }
    if cfg.enabled(EdgeType::E3OperandValue) {
        raw.extend(edges_e3(seq_a, seq_b));
    }
    if cfg.enabled(EdgeType::E4OperandType) {
        raw.extend(edges_e4(seq_a, seq_b));
    }
    if cfg.enabled(EdgeType::E5PositionAlign) {
        raw.extend(edges_e5(seq_a, seq_b, cfg.align_threshold, cfg.align_formula));
    }

    // collapse duplicate firings into weights
    let mut counts: BTreeMap<(usize, usize, EdgeType), u32> = BTreeMap::new();
    for e in raw {
        *counts.entry((e.src, e.dst, e.etype)).or_insert(0) += e.weight;
    }
    let edges = counts
        .into_iter()
        .map(|((src, dst, etype), weight)| TypedEdge {
            src,
            dst,
            etype,
            weight,
        })
        .collect();

    let graph = AssocGraph {
        nodes,
        edges,
        config: cfg.clone(),
        len_a,
        len_b,
    };
    graph.check_type_partition()?;
    Ok(graph)
}

/// Mono-architecture edges of one sequence, with node ids local to it.
///
/// Per instruction: directed e0 opcode->operand for every operand, and
/// undirected e1 between every operand pair.
pub fn edges_e0_e1(seq: &TokenSequence) -> Vec<TypedEdge> {
    let mut edges = Vec::new();
    let mut i = 0;
    while i < seq.tokens.len() {
        let instr = seq.tokens[i].instr_index;
        let mut j = i;
        while j < seq.tokens.len() && seq.tokens[j].instr_index == instr {
            j += 1;
        }
        let instr_tokens = &seq.tokens[i..j];
        let opcode: Vec<usize> = instr_tokens
            .iter()
            .filter(|t| t.role == TokenRole::Opcode)
            .map(|t| t.position)
            .collect();
        let operands: Vec<usize> = instr_tokens
            .iter()
            .filter(|t| t.role == TokenRole::Operand)
            .map(|t| t.position)
            .collect();
        for &o in &opcode {
            for &p in &operands {
                edges.push(TypedEdge {
                    src: o,
                    dst: p,
                    etype: EdgeType::E0OpcodeOperand,
                    weight: 1,
                });
            }
        }
        for (k, &p) in operands.iter().enumerate() {
            for &q in &operands[k + 1..] {
                edges.push(undirected(p, q, EdgeType::E1OperandCooccur));
            }
        }
        i = j;
    }
    edges
}

/// Cross-architecture opcode prefix-match edges: both opcodes must be at
/// least `n` chars long and share their first `n` chars exactly.
pub fn edges_e2(seq_a: &TokenSequence, seq_b: &TokenSequence, n: usize) -> Vec<TypedEdge> {
    let mut edges = Vec::new();
    for ta in seq_a.tokens.iter().filter(|t| t.role == TokenRole::Opcode) {
        let Some(prefix_a) = char_prefix(&ta.text, n) else {
            continue;
        };
        for tb in seq_b.tokens.iter().filter(|t| t.role == TokenRole::Opcode) {
            if char_prefix(&tb.text, n) == Some(prefix_a) {
                edges.push(cross(ta, tb, seq_a.len(), EdgeType::E2OpcodePrefix));
            }
        }
    }
    edges
}

fn char_prefix(s: &str, n: usize) -> Option<&str> {
    let mut chars = s.char_indices();
    for _ in 0..n {
        chars.next()?;
    }
    match chars.next() {
        Some((i, _)) => Some(&s[..i]),
        None => Some(s),
    }
}

/// Cross-architecture operand value-match edges over normalized text.
pub fn edges_e3(seq_a: &TokenSequence, seq_b: &TokenSequence) -> Vec<TypedEdge> {
    let mut edges = Vec::new();
    for ta in seq_a.tokens.iter().filter(|t| t.role == TokenRole::Operand) {
        for tb in seq_b.tokens.iter().filter(|t| t.role == TokenRole::Operand) {
            if ta.text == tb.text {
                edges.push(cross(ta, tb, seq_a.len(), EdgeType::E3OperandValue));
            }
        }
    }
    edges
}

/// Cross-architecture operand type-match edges for the three fine-grained
/// kinds; SYMBOL operands fire none.
pub fn edges_e4(seq_a: &TokenSequence, seq_b: &TokenSequence) -> Vec<TypedEdge> {
    let matchable = |k: OperandKind| {
        matches!(
            k,
            OperandKind::Register | OperandKind::Immediate | OperandKind::Memory
        )
    };
    let mut edges = Vec::new();
    for ta in seq_a.tokens.iter().filter(|t| t.role == TokenRole::Operand) {
        if !matchable(ta.operand_kind) {
            continue;
        }
        for tb in seq_b.tokens.iter().filter(|t| t.role == TokenRole::Operand) {
            if tb.operand_kind == ta.operand_kind {
                edges.push(cross(ta, tb, seq_a.len(), EdgeType::E4OperandType));
            }
        }
    }
    edges
}

/// Heuristic position alignment condition between 0-based positions `i`
/// (side A) and `j` (side B).
pub fn align_condition(
    i: usize,
    j: usize,
    len_a: usize,
    len_b: usize,
    iota: f64,
    formula: AlignFormula,
) -> bool {
    let (i, j, len_a, len_b) = (i as f64, j as f64, len_a as f64, len_b as f64);
    let scaled = match formula {
        AlignFormula::AsWritten => i * len_a / len_b,
        AlignFormula::Rescaled => i * len_b / len_a,
    };
    (scaled - j).abs() < iota
}

/// Cross-architecture position-alignment edges over all token pairs.
pub fn edges_e5(
    seq_a: &TokenSequence,
    seq_b: &TokenSequence,
    iota: f64,
    formula: AlignFormula,
) -> Vec<TypedEdge> {
    let (len_a, len_b) = (seq_a.len(), seq_b.len());
    let mut edges = Vec::new();
    for i in 0..len_a {
        for j in 0..len_b {
            if align_condition(i, j, len_a, len_b, iota, formula) {
                edges.push(undirected(i, len_a + j, EdgeType::E5PositionAlign));
            }
        }
    }
    edges
}

fn undirected(p: usize, q: usize, etype: EdgeType) -> TypedEdge {
    TypedEdge {
        src: p.min(q),
        dst: p.max(q),
        etype,
        weight: 1,
    }
}

fn cross(ta: &Token, tb: &Token, len_a: usize, etype: EdgeType) -> TypedEdge {
    // side-A ids precede side-B ids, so src < dst holds by construction
    TypedEdge {
        src: ta.position,
        dst: len_a + tb.position,
        etype,
        weight: 1,
    }
}

// ---------------------------------------------------------------------------
// JSON dump format

#[derive(Serialize, Deserialize)]
struct NodeDump {
    id: usize,
    side: Side,
    pos: usize,
    token: String,
    role: TokenRole,
    kind: OperandKind,
}

#[derive(Serialize, Deserialize)]
struct EdgeDump {
    src: usize,
    dst: usize,
    #[serde(rename = "type")]
    etype: EdgeType,
    w: u32,
}

#[derive(Serialize, Deserialize)]
struct GraphDump {
    nodes: Vec<NodeDump>,
    edges: Vec<EdgeDump>,
    config: GraphConfig,
}

/// Serialize a graph to its JSON dump format.
pub fn serialize_graph(g: &AssocGraph) -> Vec<u8> {
    let dump = GraphDump {
        nodes: g
            .nodes
            .iter()
            .map(|n| NodeDump {
                id: n.node_id,
                side: n.side,
                pos: n.position,
                token: n.token.text.clone(),
                role: n.token.role,
                kind: n.token.operand_kind,
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeDump {
                src: e.src,
                dst: e.dst,
                etype: e.etype,
                w: e.weight,
            })
            .collect(),
        config: g.config.clone(),
    };
    serde_json::to_vec_pretty(&dump).expect("graph serializes")
}

/// Parse a graph back from its JSON dump format.
pub fn deserialize_graph(bytes: &[u8]) -> Result<AssocGraph> {
    let text = String::from_utf8_lossy(bytes);
    let dump: GraphDump =
        serde_json::from_str(&text).map_err(crate::tokenizer::json_to_parse_error(&text))?;
    let len_a = dump.nodes.iter().filter(|n| n.side == Side::A).count();
    let len_b = dump.nodes.len() - len_a;
    let mut nodes = Vec::with_capacity(dump.nodes.len());
    // instruction indices are not part of the dump; reconstruct per side by
    // counting opcode tokens
    let mut instr_count = [0usize; 2];
    for n in dump.nodes {
        let side_idx = if n.side == Side::A { 0 } else { 1 };
        if n.role == TokenRole::Opcode {
            instr_count[side_idx] += 1;
        }
        let instr_index = instr_count[side_idx].saturating_sub(1);
        nodes.push(GraphNode {
            node_id: n.id,
            side: n.side,
            position: n.pos,
            token: Token {
                text: n.token,
                role: n.role,
                operand_kind: n.kind,
                instr_index,
                position: n.pos,
            },
        });
    }
    let edges: Vec<TypedEdge> = dump
        .edges
        .into_iter()
        .map(|e| TypedEdge {
            src: e.src,
            dst: e.dst,
            etype: e.etype,
            weight: e.w,
        })
        .collect();
    for e in &edges {
        if e.src >= nodes.len() || e.dst >= nodes.len() {
            return Err(Error::Config(format!(
                "edge endpoint {} out of range ({} nodes)",
                e.src.max(e.dst),
                nodes.len()
            )));
        }
        if e.weight < 1 {
            return Err(Error::Config("edge weight must be >= 1".into()));
        }
    }
    Ok(AssocGraph {
        nodes,
        edges,
        config: dump.config,
        len_a,
        len_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{RegisterTables, TokenSequence};

    fn seq(id: &str, arch: &str, lines: &[&str]) -> TokenSequence {
        let lines: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        TokenSequence::from_instructions(id, arch, &lines, &RegisterTables::builtin()).unwrap()
    }

    fn edges_of(g: &AssocGraph, t: EdgeType) -> Vec<(usize, usize)> {
        g.edges
            .iter()
            .filter(|e| e.etype == t)
            .map(|e| (e.src, e.dst))
            .collect()
    }

    #[test]
    fn mov_move_pair_has_expected_mono_edges() {
        let a = seq("a", "arm", &["MOV R0, R4"]);
        let b = seq("b", "mips", &["MOVE V0, A0"]);
        let g = build_graph(&a, &b, &GraphConfig::default()).unwrap();
        // side A: MOV=0 R0=1 R4=2; side B: MOVE=3 V0=4 A0=5
        assert_eq!(edges_of(&g, EdgeType::E0OpcodeOperand), [(0, 1), (0, 2), (3, 4), (3, 5)]);
        assert_eq!(edges_of(&g, EdgeType::E1OperandCooccur), [(1, 2), (4, 5)]);
        // MOV / MOVE share a 3-char prefix
        assert_eq!(edges_of(&g, EdgeType::E2OpcodePrefix), [(0, 3)]);
        // all four operands are registers
        assert_eq!(
            edges_of(&g, EdgeType::E4OperandType),
            [(1, 4), (1, 5), (2, 4), (2, 5)]
        );
        g.check_type_partition().unwrap();
    }

    #[test]
    fn empty_rule_set_yields_nodes_only() {
        let a = seq("a", "arm", &["MOV R0, R4"]);
        let b = seq("b", "mips", &["MOVE V0, A0"]);
        let cfg = GraphConfig {
            enabled_types: vec![],
            ..GraphConfig::default()
        };
        let g = build_graph(&a, &b, &cfg).unwrap();
        assert_eq!(g.num_nodes(), a.len() + b.len());
        assert!(g.edges.is_empty());
    }

    #[test]
    fn repeated_instruction_gives_occurrence_level_e1_edges() {
        let a = seq("a", "arm", &["MOV R0, R4", "MOV R0, R4"]);
        let e = edges_e0_e1(&a);
        let e1: Vec<_> = e
            .iter()
            .filter(|e| e.etype == EdgeType::E1OperandCooccur)
            .collect();
        assert_eq!(e1.len(), 2);
        assert_eq!((e1[0].src, e1[0].dst), (1, 2));
        assert_eq!((e1[1].src, e1[1].dst), (4, 5));
        assert!(e1.iter().all(|e| e.weight == 1));
    }

    #[test]
    fn zero_operand_instruction_has_no_mono_edges() {
        let a = seq("a", "x86", &["RET"]);
        assert!(edges_e0_e1(&a).is_empty());
    }

    #[test]
    fn three_operand_instruction_counts() {
        let a = seq("a", "mips", &["ADDIU SP, SP, -0x20"]);
        let e = edges_e0_e1(&a);
        let e0 = e.iter().filter(|e| e.etype == EdgeType::E0OpcodeOperand).count();
        let e1 = e.iter().filter(|e| e.etype == EdgeType::E1OperandCooccur).count();
        assert_eq!(e0, 3);
        assert_eq!(e1, 3); // C(3,2)
    }

    #[test]
    fn e2_prefix_examples() {
        let a = seq("a", "x86", &["SUBSD XMM0, XMM1"]);
        let b = seq("b", "arm", &["SUBS R0, R1"]);
        assert_eq!(edges_e2(&a, &b, 3).len(), 1);

        let a = seq("a", "arm", &["MOV R0, R1"]);
        let b = seq("b", "mips", &["MOVE V0, A0"]);
        assert_eq!(edges_e2(&a, &b, 3).len(), 1);
        // MOV is shorter than 4 chars
        assert_eq!(edges_e2(&a, &b, 4).len(), 0);
    }

    #[test]
    fn e3_value_match_examples() {
        let a = seq("a", "x86", &["ADD RAX, 0x10"]);
        let b = seq("b", "arm", &["ADD R0, 4"]);
        // both immediates normalize to "0"
        assert_eq!(edges_e3(&a, &b).len(), 1);

        let a = seq("a", "x86", &["MOV SP, SP"]);
        let b = seq("b", "arm", &["MOV SP, R1"]);
        assert_eq!(edges_e3(&a, &b).len(), 2);

        let a = seq("a", "arm", &["MOV R0, R0"]);
        let b = seq("b", "mips", &["MOVE V0, V0"]);
        assert!(edges_e3(&a, &b).is_empty());
    }

    #[test]
    fn e4_cartesian_count() {
        let a = seq("a", "arm", &["MOV R0, R1"]);
        let b = seq("b", "mips", &["ADDU V0, A0, A1"]);
        // 2 registers x 3 registers
        assert_eq!(edges_e4(&a, &b).len(), 6);

        let a = seq("a", "x86", &["PUSH 0x5"]);
        let b = seq("b", "arm", &["MOV R0, R1"]);
        // immediate vs registers: no match
        assert!(edges_e4(&a, &b).is_empty());
    }

    #[test]
    fn e5_alignment_examples() {
        // equal lengths: scaling is identity under either formula
        for formula in [AlignFormula::AsWritten, AlignFormula::Rescaled] {
            let js: Vec<usize> = (0..8)
                .filter(|&j| align_condition(5, j, 8, 8, 2.0, formula))
                .collect();
            assert_eq!(js, [4, 5, 6]);
        }
        // l_a=6, l_b=3, i=1, as-written: 1*6/3 = 2 -> j in {1,2}
        let js: Vec<usize> = (0..3)
            .filter(|&j| align_condition(1, j, 6, 3, 2.0, AlignFormula::AsWritten))
            .collect();
        assert_eq!(js, [1, 2]);
        // i=0 always matches j in {0,1} at iota=2
        for (la, lb) in [(5, 9), (9, 5), (1, 12)] {
            let js: Vec<usize> = (0..lb)
                .filter(|&j| align_condition(0, j, la, lb, 2.0, AlignFormula::AsWritten))
                .collect();
            assert_eq!(js, [0, 1][..2.min(lb)]);
        }
    }

    #[test]
    fn serialize_round_trip() {
        let a = seq("a", "arm", &["MOV R0, R4"]);
        let b = seq("b", "mips", &["MOVE V0, A0"]);
        let g = build_graph(&a, &b, &GraphConfig::default()).unwrap();
        let bytes = serialize_graph(&g);
        let g2 = deserialize_graph(&bytes).unwrap();
        assert_eq!(g, g2);

        let cfg = GraphConfig {
            enabled_types: vec![],
            ..GraphConfig::default()
        };
        let empty = build_graph(&a, &b, &cfg).unwrap();
        assert_eq!(deserialize_graph(&serialize_graph(&empty)).unwrap(), empty);
    }

    #[test]
    fn deserialize_malformed_reports_position() {
        let err = deserialize_graph(b"{\"nodes\": [,]}").unwrap_err();
        match err {
            crate::error::Error::Parse { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn determinism_two_builds_byte_identical() {
        let a = seq("a", "x86", &["MOV RAX, [RBP-0x8]", "ADD RAX, 0x10", "RET"]);
        let b = seq("b", "arm", &["LDR R0, [SP]", "ADDS R0, R0, 4"]);
        let g1 = build_graph(&a, &b, &GraphConfig::default()).unwrap();
        let g2 = build_graph(&a, &b, &GraphConfig::default()).unwrap();
        assert_eq!(serialize_graph(&g1), serialize_graph(&g2));
    }
}
