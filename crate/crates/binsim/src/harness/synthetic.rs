//! Synthetic cross-dialect corpus generator.
//!
//! Produces two toy "architectures" (dialect-a, dialect-b) from a shared
//! base instruction skeleton via a deterministic, invertible transform:
//! bijective opcode renaming (some renames preserve a 3-char prefix, some
//! do not), disjoint register renaming, operand reordering, different
//! immediate/memory syntax, and a one-to-two instruction split for one
//! opcode. Ground truth is function identity across dialects.

use crate::error::{Error, Result};
use crate::harness::store::{PairExample, SearchQuery, SnippetStore};
use crate::tokenizer::{RegisterTables, TokenSequence};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    A,
    B,
}

impl Dialect {
    pub fn arch_tag(self) -> &'static str {
        match self {
            Dialect::A => "dialect-a",
            Dialect::B => "dialect-b",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Pattern {
    /// d, s1, s2 registers; dialect B rotates to s1, s2, d.
    Regs3,
    /// d, s registers.
    Regs2,
    /// d, s registers plus an immediate.
    RegsImm,
    /// register plus a memory operand.
    Mem,
    /// a label operand.
    Jump,
    /// no operands.
    None,
    /// renders as one instruction in dialect A, two in dialect B.
    Split,
}

struct OpSpec {
    name_a: &'static str,
    name_b: &'static str,
    pattern: Pattern,
}

const SPLIT_B_FIRST: &str = "MULQ";
const SPLIT_B_SECOND: &str = "SUMQ";
/// Scheduling-hint opcode emitted only by dialect B; carries no semantics.
const PAD_B: &str = "HINT";
const SCRATCH_REG: usize = 8;

// Most renames are textually unrelated so that character-level similarity
// carries little cross-dialect signal; a handful keep a 3-char prefix to
// exercise opcode prefix matching.
const OPS: &[OpSpec] = &[
    OpSpec { name_a: "ADD", name_b: "ADDX", pattern: Pattern::Regs3 },
    OpSpec { name_a: "SUB", name_b: "SUBX", pattern: Pattern::Regs3 },
    OpSpec { name_a: "MUL", name_b: "TIMES", pattern: Pattern::Regs3 },
    OpSpec { name_a: "AND", name_b: "CONJ", pattern: Pattern::Regs3 },
    OpSpec { name_a: "ORR", name_b: "DISJ", pattern: Pattern::Regs3 },
    OpSpec { name_a: "EOR", name_b: "FLIP", pattern: Pattern::Regs3 },
    OpSpec { name_a: "MOV", name_b: "COPY", pattern: Pattern::Regs2 },
    OpSpec { name_a: "CMP", name_b: "TEST", pattern: Pattern::Regs2 },
    OpSpec { name_a: "LSL", name_b: "SHIFT", pattern: Pattern::RegsImm },
    OpSpec { name_a: "ADDI", name_b: "INCR", pattern: Pattern::RegsImm },
    OpSpec { name_a: "LDR", name_b: "FETCH", pattern: Pattern::Mem },
    OpSpec { name_a: "STR", name_b: "STASH", pattern: Pattern::Mem },
    OpSpec { name_a: "JMP", name_b: "GOTO", pattern: Pattern::Jump },
    OpSpec { name_a: "CALL", name_b: "INVOKE", pattern: Pattern::Jump },
    OpSpec { name_a: "RET", name_b: "BACK", pattern: Pattern::None },
    OpSpec { name_a: "NOP", name_b: "IDLE", pattern: Pattern::None },
    OpSpec { name_a: "FMA", name_b: "", pattern: Pattern::Split },
];

/// One abstract instruction of the base (dialect-independent) skeleton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseInstr {
    op: usize,
    regs: [usize; 3],
    imm: i64,
    label: usize,
    /// Dialect B emits a semantically empty `HINT` line after this
    /// instruction, so the two renderings do not align line-for-line.
    pad_b: bool,
}

/// A base function: the ground-truth object both dialect renderings share.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseFunction {
    pub index: usize,
    pub instrs: Vec<BaseInstr>,
}

impl BaseFunction {
    /// The dialect-independent opcode skeleton.
    pub fn opcode_skeleton(&self) -> Vec<&'static str> {
        self.instrs.iter().map(|i| OPS[i.op].name_a).collect()
    }
}

fn reg(d: Dialect, i: usize) -> String {
    match d {
        Dialect::A => format!("R{i}"),
        // dialect B permutes the register file (3i+1 mod 8 is a bijection),
        // so matching registers never share a digit either
        Dialect::B if i < SCRATCH_REG => format!("V{}", (3 * i + 1) % 8),
        Dialect::B => format!("V{i}"),
    }
}

fn imm(d: Dialect, v: i64) -> String {
    match d {
        Dialect::A => format!("{v}"),
        Dialect::B => {
            if v < 0 {
                format!("#-{:#x}", -v)
            } else {
                format!("#{v:#x}")
            }
        }
    }
}

fn mem(d: Dialect, r: usize, offset: i64) -> String {
    match d {
        Dialect::A => format!("[R{r}+{offset}]"),
        Dialect::B => format!("{offset:#x}(V{r})"),
    }
}

/// Render one base instruction in a dialect (one or two output lines).
fn render_instr(instr: &BaseInstr, d: Dialect) -> Vec<String> {
    let spec = &OPS[instr.op];
    let [r0, r1, r2] = instr.regs;
    match (spec.pattern, d) {
        (Pattern::Regs3, Dialect::A) => {
            vec![format!("{} {}, {}, {}", spec.name_a, reg(d, r0), reg(d, r1), reg(d, r2))]
        }
        (Pattern::Regs3, Dialect::B) => {
            // destination moves last
            vec![format!("{} {}, {}, {}", spec.name_b, reg(d, r1), reg(d, r2), reg(d, r0))]
        }
        (Pattern::Regs2, Dialect::A) => {
            vec![format!("{} {}, {}", spec.name_a, reg(d, r0), reg(d, r1))]
        }
        (Pattern::Regs2, Dialect::B) => {
            vec![format!("{} {}, {}", spec.name_b, reg(d, r1), reg(d, r0))]
        }
        (Pattern::RegsImm, Dialect::A) => {
            vec![format!(
                "{} {}, {}, {}",
                spec.name_a,
                reg(d, r0),
                reg(d, r1),
                imm(d, instr.imm)
            )]
        }
        (Pattern::RegsImm, Dialect::B) => {
            vec![format!(
                "{} {}, {}, {}",
                spec.name_b,
                reg(d, r1),
                imm(d, instr.imm),
                reg(d, r0)
            )]
        }
        (Pattern::Mem, Dialect::A) => {
            vec![format!("{} {}, {}", spec.name_a, reg(d, r0), mem(d, r1, instr.imm))]
        }
        (Pattern::Mem, Dialect::B) => {
            vec![format!("{} {}, {}", spec.name_b, mem(d, r1, instr.imm), reg(d, r0))]
        }
        (Pattern::Jump, _) => {
            let name = if d == Dialect::A { spec.name_a } else { spec.name_b };
            vec![format!("{} L{}", name, instr.label)]
        }
        (Pattern::None, _) => {
            let name = if d == Dialect::A { spec.name_a } else { spec.name_b };
            vec![name.to_string()]
        }
        (Pattern::Split, Dialect::A) => {
            vec![format!("FMA {}, {}, {}", reg(d, r0), reg(d, r1), reg(d, r2))]
        }
        (Pattern::Split, Dialect::B) => {
            let scratch = reg(d, SCRATCH_REG);
            vec![
                format!("{} {}, {}, {}", SPLIT_B_FIRST, scratch, reg(d, r1), reg(d, r2)),
                format!("{} {}, {}", SPLIT_B_SECOND, reg(d, r0), scratch),
            ]
        }
    }
}

/// Render a full base function in a dialect.
pub fn render_function(f: &BaseFunction, d: Dialect) -> Vec<String> {
    let mut lines = Vec::new();
    for instr in &f.instrs {
        lines.extend(render_instr(instr, d));
        if d == Dialect::B && instr.pad_b {
            let r = (instr.regs[0] + instr.regs[1]) % SCRATCH_REG;
            lines.push(format!("{} {}, {}", PAD_B, reg(d, r), imm(d, instr.imm)));
        }
    }
    lines
}

/// Invert a dialect rendering back to the opcode skeleton. The transform is
/// a bijection on function identity, so this must always succeed on
/// generated output.
pub fn invert_to_skeleton(lines: &[String], d: Dialect) -> Result<Vec<&'static str>> {
    let mut skeleton = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let opcode = lines[i].split_whitespace().next().unwrap_or("");
        if d == Dialect::B && opcode == PAD_B {
            i += 1;
            continue;
        }
        if d == Dialect::B && opcode == SPLIT_B_FIRST {
            let next = lines
                .get(i + 1)
                .and_then(|l| l.split_whitespace().next())
                .unwrap_or("");
            if next != SPLIT_B_SECOND {
                return Err(Error::Config(format!(
                    "unpaired {SPLIT_B_FIRST} at line {i}"
                )));
            }
            skeleton.push("FMA");
            i += 2;
            continue;
        }
        let base = OPS
            .iter()
            .find(|s| match d {
                Dialect::A => s.name_a == opcode,
                Dialect::B => s.name_b == opcode,
            })
            .ok_or_else(|| Error::Config(format!("unknown opcode {opcode:?} at line {i}")))?;
        skeleton.push(base.name_a);
        i += 1;
    }
    Ok(skeleton)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCorpusSpec {
    pub num_functions: usize,
    pub min_instructions: usize,
    pub max_instructions: usize,
    pub seed: u64,
    /// Negative candidates per search query.
    pub n_neg: usize,
    /// Negative pairs per positive pair in the pair datasets.
    pub negatives_per_positive: usize,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            num_functions: 100,
            min_instructions: 5,
            max_instructions: 12,
            seed: 0,
            n_neg: 20,
            negatives_per_positive: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub store: SnippetStore,
    pub functions: Vec<BaseFunction>,
    /// Function indices per split (train/dev/test), disjoint by id.
    pub train_ids: Vec<usize>,
    pub dev_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub train_pairs: Vec<PairExample>,
    pub dev_pairs: Vec<PairExample>,
    pub test_pairs: Vec<PairExample>,
    /// One query per function over the whole corpus.
    pub all_queries: Vec<SearchQuery>,
    /// Per-split queries with in-split negatives; empty when a split is too
    /// small for `n_neg`.
    pub test_queries: Vec<SearchQuery>,
}

pub fn snippet_id(index: usize, d: Dialect) -> String {
    match d {
        Dialect::A => format!("f{index:04}_a"),
        Dialect::B => format!("f{index:04}_b"),
    }
}

/// Generate a corpus: snippets for both dialects, train/dev/test pair sets
/// (80/10/10 by function id), and search queries. Deterministic per seed.
pub fn gen_synthetic_corpus(spec: &SyntheticCorpusSpec) -> Result<SyntheticCorpus> {
    if spec.num_functions < 2 {
        return Err(Error::Config("need at least 2 functions".into()));
    }
    if spec.min_instructions < 1 || spec.max_instructions < spec.min_instructions {
        return Err(Error::Config("bad instruction count range".into()));
    }
    if spec.n_neg + 1 > spec.num_functions {
        return Err(Error::NotEnoughNegatives {
            requested: spec.n_neg,
            available: spec.num_functions - 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut functions = Vec::with_capacity(spec.num_functions);
    for index in 0..spec.num_functions {
        let len = rng.gen_range(spec.min_instructions..=spec.max_instructions);
        let instrs = (0..len)
            .map(|_| BaseInstr {
                op: rng.gen_range(0..OPS.len()),
                regs: [
                    rng.gen_range(0..SCRATCH_REG),
                    rng.gen_range(0..SCRATCH_REG),
                    rng.gen_range(0..SCRATCH_REG),
                ],
                imm: rng.gen_range(1..64),
                label: rng.gen_range(0..4),
                pad_b: rng.gen_bool(0.4),
            })
            .collect();
        functions.push(BaseFunction { index, instrs });
    }

    let tables = RegisterTables::builtin();
    let mut store = SnippetStore::new();
    for f in &functions {
        for d in [Dialect::A, Dialect::B] {
            let lines = render_function(f, d);
            let seq = TokenSequence::from_instructions(snippet_id(f.index, d), d.arch_tag(), &lines, &tables)?;
            store.insert(seq);
        }
    }

    // 80/10/10 split by function id, at least one function in dev/test
    let mut order: Vec<usize> = (0..spec.num_functions).collect();
    order.shuffle(&mut rng);
    let n_test = (spec.num_functions / 10).max(1);
    let n_dev = (spec.num_functions / 10).max(1);
    let n_train = spec.num_functions - n_dev - n_test;
    let train_ids: Vec<usize> = order[..n_train].to_vec();
    let dev_ids: Vec<usize> = order[n_train..n_train + n_dev].to_vec();
    let test_ids: Vec<usize> = order[n_train + n_dev..].to_vec();

    // negatives are length-matched where possible so that instruction count
    // alone cannot separate the classes
    let make_pairs = |ids: &[usize], rng: &mut ChaCha8Rng| -> Vec<PairExample> {
        let mut by_len: HashMap<usize, Vec<usize>> = HashMap::new();
        for &f in ids {
            by_len.entry(functions[f].instrs.len()).or_default().push(f);
        }
        let mut pairs = Vec::new();
        for &f in ids {
            pairs.push(PairExample {
                id_a: snippet_id(f, Dialect::A),
                id_b: snippet_id(f, Dialect::B),
                label: 1,
            });
            if ids.len() < 2 {
                // a single-function split has no negatives to draw
                continue;
            }
            let bucket = &by_len[&functions[f].instrs.len()];
            let pool: &[usize] = if bucket.len() > 1 { bucket } else { ids };
            for _ in 0..spec.negatives_per_positive {
                let g = loop {
                    let g = pool[rng.gen_range(0..pool.len())];
                    if g != f {
                        break g;
                    }
                };
                pairs.push(PairExample {
                    id_a: snippet_id(f, Dialect::A),
                    id_b: snippet_id(g, Dialect::B),
                    label: 0,
                });
            }
        }
        pairs
    };
    let train_pairs = make_pairs(&train_ids, &mut rng);
    let dev_pairs = make_pairs(&dev_ids, &mut rng);
    let test_pairs = make_pairs(&test_ids, &mut rng);

    let make_queries = |ids: &[usize], rng: &mut ChaCha8Rng| -> Vec<SearchQuery> {
        ids.iter()
            .map(|&f| {
                let mut others: Vec<usize> = ids.iter().copied().filter(|&g| g != f).collect();
                others.shuffle(rng);
                others.truncate(spec.n_neg);
                SearchQuery {
                    query_id: snippet_id(f, Dialect::A),
                    positive_id: snippet_id(f, Dialect::B),
                    negative_ids: others.into_iter().map(|g| snippet_id(g, Dialect::B)).collect(),
                }
            })
            .collect()
    };
    let all_ids: Vec<usize> = (0..spec.num_functions).collect();
    let all_queries = make_queries(&all_ids, &mut rng);
    let test_queries = if test_ids.len() > spec.n_neg {
        make_queries(&test_ids, &mut rng)
    } else {
        Vec::new()
    };

    Ok(SyntheticCorpus {
        store,
        functions,
        train_ids,
        dev_ids,
        test_ids,
        train_pairs,
        dev_pairs,
        test_pairs,
        all_queries,
        test_queries,
    })
}
