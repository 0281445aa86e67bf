//! Disassembly tokenization, normalization, and vocabularies.
//!
//! Instructions split into one opcode token plus one token per operand
//! field. Numeric constants are rewritten to `0` (`-0` when negative) and
//! every operand is classified as register / immediate / memory / symbol.

mod registers;
mod vocab;

pub use registers::RegisterTables;
pub(crate) use vocab::json_to_parse_error;
pub use vocab::{Vocab, CHAR_PAD_ID, CHAR_UNK_ID, PAD_ID, UNK_ID};

use crate::error::{Error, Result};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// One raw disassembly line plus its architecture tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInstruction {
    pub mnemonic_text: String,
    pub arch: String,
}

impl RawInstruction {
    pub fn new(text: impl Into<String>, arch: impl Into<String>) -> Self {
        RawInstruction {
            mnemonic_text: text.into(),
            arch: arch.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenRole {
    Opcode,
    Operand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperandKind {
    Register,
    Immediate,
    Memory,
    Symbol,
    None,
}

/// A normalized token occurrence within a snippet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub role: TokenRole,
    pub operand_kind: OperandKind,
    /// 0-based index of the owning instruction.
    pub instr_index: usize,
    /// 0-based index within the whole token sequence.
    pub position: usize,
}

/// The full normalized token sequence of one snippet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub snippet_id: String,
    pub arch: String,
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokenize a list of raw instruction lines into one sequence.
    pub fn from_instructions(
        snippet_id: impl Into<String>,
        arch: &str,
        lines: &[String],
        tables: &RegisterTables,
    ) -> Result<TokenSequence> {
        let snippet_id = snippet_id.into();
        let mut tokens = Vec::new();
        for (instr_index, line) in lines.iter().enumerate() {
            let raw = RawInstruction::new(line.clone(), arch);
            let instr_tokens = tokenize(&raw, tables)?;
            for mut t in instr_tokens {
                t.instr_index = instr_index;
                t.position = tokens.len();
                tokens.push(t);
            }
        }
        if tokens.is_empty() {
            return Err(Error::EmptySequence { snippet_id });
        }
        Ok(TokenSequence {
            snippet_id,
            arch: arch.to_string(),
            tokens,
        })
    }

    /// Build a sequence from pre-tokenized instruction fields (the second
    /// accepted JSONL form). The first field of each instruction is the
    /// opcode, the rest are operand fields.
    pub fn from_pretokenized(
        snippet_id: impl Into<String>,
        arch: &str,
        instructions: &[Vec<String>],
        tables: &RegisterTables,
    ) -> Result<TokenSequence> {
        let snippet_id = snippet_id.into();
        let mut tokens = Vec::new();
        for (instr_index, fields) in instructions.iter().enumerate() {
            let mut first = true;
            for field in fields {
                let field = field.trim();
                if field.is_empty() {
                    return Err(Error::MalformedInstruction {
                        line: fields.join(" "),
                    });
                }
                let mut t = if first {
                    opcode_token(field)
                } else {
                    operand_token(field, arch, tables)
                };
                first = false;
                t.instr_index = instr_index;
                t.position = tokens.len();
                tokens.push(t);
            }
            if first {
                return Err(Error::MalformedInstruction {
                    line: String::new(),
                });
            }
        }
        if tokens.is_empty() {
            return Err(Error::EmptySequence { snippet_id });
        }
        Ok(TokenSequence {
            snippet_id,
            arch: arch.to_string(),
            tokens,
        })
    }

    /// Canonical textual form: one instruction per line, opcode then
    /// comma-separated operands. Re-tokenizing this reproduces the sequence.
    pub fn detokenize(&self) -> Vec<String> {
        let mut lines: Vec<Vec<&str>> = Vec::new();
        let mut current = usize::MAX;
        for t in &self.tokens {
            if t.instr_index != current {
                current = t.instr_index;
                lines.push(Vec::new());
            }
            lines.last_mut().expect("just pushed").push(&t.text);
        }
        lines
            .into_iter()
            .map(|parts| match parts.split_first() {
                Some((opcode, [])) => (*opcode).to_string(),
                Some((opcode, operands)) => format!("{opcode} {}", operands.join(", ")),
                None => String::new(),
            })
            .collect()
    }
}

/// Tokenize one raw instruction into an opcode token plus operand tokens.
///
/// The first whitespace-delimited field is the opcode; the remainder splits
/// into operand fields on commas and whitespace at bracket depth zero, so
/// `LW T0, 0x20(SP)` and `MOV RAX, [RBP - 8]` each yield two operands.
pub fn tokenize(instr: &RawInstruction, tables: &RegisterTables) -> Result<Vec<Token>> {
    let text = instr.mnemonic_text.trim();
    if text.is_empty() {
        return Err(Error::MalformedInstruction {
            line: instr.mnemonic_text.clone(),
        });
    }
    let (opcode, rest) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim_start()),
        None => (text, ""),
    };
    let mut tokens = vec![opcode_token(opcode)];
    for field in split_operand_fields(rest) {
        tokens.push(operand_token(&field, &instr.arch, tables));
    }
    for (i, t) in tokens.iter_mut().enumerate() {
        t.position = i;
    }
    Ok(tokens)
}

/// Split an operand list on commas and whitespace outside brackets.
fn split_operand_fields(rest: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in rest.chars() {
        match c {
            '[' | '(' => {
                depth += 1;
                cur.push(c);
            }
            ']' | ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ',' if depth == 0 => {
                if !cur.trim().is_empty() {
                    fields.push(cur.trim().to_string());
                }
                cur.clear();
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.trim().is_empty() {
                    fields.push(cur.trim().to_string());
                }
                cur.clear();
            }
            c if c.is_whitespace() => {
                // whitespace inside a memory expression is dropped
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        fields.push(cur.trim().to_string());
    }
    fields
}

fn opcode_token(field: &str) -> Token {
    Token {
        text: field.to_uppercase(),
        role: TokenRole::Opcode,
        operand_kind: OperandKind::None,
        instr_index: 0,
        position: 0,
    }
}

fn operand_token(field: &str, arch: &str, tables: &RegisterTables) -> Token {
    let raw_upper = field.to_uppercase();
    let is_memory = field.contains(['[', ']', '(', ')']);
    let text = if is_memory {
        normalize_embedded_numbers(&raw_upper)
    } else {
        normalize_numeric(&raw_upper)
    };
    let kind = if is_memory {
        OperandKind::Memory
    } else {
        classify_operand(&text, arch, tables)
    };
    Token {
        text,
        role: TokenRole::Operand,
        operand_kind: kind,
        instr_index: 0,
        position: 0,
    }
}

/// Replace a whole-token numeric constant with `0`, keeping a leading minus.
///
/// Accepts decimal and `0x` hexadecimal, with an optional leading `-`.
/// Anything else is returned unchanged; the function is total and idempotent.
pub fn normalize_numeric(token_text: &str) -> String {
    let (neg, body) = match token_text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token_text),
    };
    if is_numeric_body(body) {
        if neg { "-0".to_string() } else { "0".to_string() }
    } else {
        token_text.to_string()
    }
}

fn is_numeric_body(body: &str) -> bool {
    if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        !hex.is_empty() && hex.chars().all(|c| c.is_ascii_hexdigit())
    } else {
        !body.is_empty() && body.chars().all(|c| c.is_ascii_digit())
    }
}

fn embedded_number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // A constant not glued to a preceding identifier char, so `R4` and
        // `0x8` inside `[RBP+0x8]` are distinguished.
        Regex::new(r"(^|[^A-Za-z0-9_])(0[xX][0-9A-Fa-f]+|[0-9]+)").expect("static regex")
    })
}

/// Normalize every numeric constant inside a memory expression, keeping the
/// surrounding punctuation: `[RBP-0x8]` becomes `[RBP-0]`.
fn normalize_embedded_numbers(text: &str) -> String {
    embedded_number_re().replace_all(text, "${1}0").into_owned()
}

/// Classify a normalized operand field.
///
/// Memory operands are detected from dereference punctuation, registers from
/// the per-architecture table, immediates from the numeric grammar; anything
/// else is a symbol. For architectures without a register table a
/// register-shaped heuristic (`R0`, `V3`, ...) is applied instead and a
/// warning is logged once per architecture.
pub fn classify_operand(token_text: &str, arch: &str, tables: &RegisterTables) -> OperandKind {
    if token_text.contains(['[', ']', '(', ')']) {
        return OperandKind::Memory;
    }
    if token_text == "0" || token_text == "-0" || normalize_numeric(token_text) != token_text {
        return OperandKind::Immediate;
    }
    match tables.lookup(arch) {
        Some(set) => {
            if set.contains(token_text) {
                OperandKind::Register
            } else {
                OperandKind::Symbol
            }
        }
        None => {
            warn_once_per_arch(arch);
            if looks_like_register(token_text) {
                OperandKind::Register
            } else {
                OperandKind::Symbol
            }
        }
    }
}

fn warn_once_per_arch(arch: &str) {
    use std::collections::HashSet;
    use std::sync::Mutex;
    static WARNED: std::sync::OnceLock<Mutex<HashSet<String>>> = std::sync::OnceLock::new();
    let mut warned = WARNED
        .get_or_init(|| Mutex::new(HashSet::new()))
        .lock()
        .unwrap();
    if warned.insert(arch.to_string()) {
        log::warn!("no register table for arch {arch:?}, using heuristic classification");
    }
}

fn looks_like_register(text: &str) -> bool {
    let bytes = text.as_bytes();
    if bytes.len() < 2 || bytes.len() > 4 {
        return false;
    }
    let letters = bytes.iter().take_while(|b| b.is_ascii_alphabetic()).count();
    (1..=2).contains(&letters) && bytes[letters..].iter().all(|b| b.is_ascii_digit())
}

/// Build token and char vocabularies over a corpus, insertion-ordered.
pub fn build_vocab<'a, I>(corpus: I) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let mut vocab = Vocab::new();
    let mut seen_any = false;
    for seq in corpus {
        seen_any = true;
        for token in &seq.tokens {
            vocab.insert_token(&token.text);
        }
    }
    if !seen_any {
        return Err(Error::EmptyCorpus);
    }
    Ok(vocab)
}
