//! Snippet storage and JSONL dataset formats.

use crate::error::{Error, Result};
use crate::tokenizer::{RegisterTables, TokenSequence};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::io::{BufWriter, Write};
use std::path::Path;

/// One line of the snippet JSONL format. Instructions are either raw lines
/// or pre-tokenized field lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub id: String,
    pub arch: String,
    pub instructions: InstructionsField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstructionsField {
    Raw(Vec<String>),
    Pretokenized(Vec<Vec<String>>),
}

/// In-memory snippet collection keyed by id, insertion-ordered.
#[derive(Debug, Clone, Default)]
pub struct SnippetStore {
    seqs: IndexMap<String, TokenSequence>,
}

impl SnippetStore {
    pub fn new() -> Self {
        SnippetStore::default()
    }

    pub fn insert(&mut self, seq: TokenSequence) {
        self.seqs.insert(seq.snippet_id.clone(), seq);
    }

    pub fn get(&self, id: &str) -> Result<&TokenSequence> {
        self.seqs
            .get(id)
            .ok_or_else(|| Error::UnknownSnippet(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.seqs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TokenSequence> {
        self.seqs.values()
    }

    /// Load snippets from the JSONL disassembly format.
    pub fn load_jsonl(path: &Path, tables: &RegisterTables) -> Result<SnippetStore> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut store = SnippetStore::new();
        let mut offset = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line_offset = offset;
            offset += line.len() + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: SnippetRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: lineno + 1,
                column: e.column(),
                offset: line_offset + e.column().saturating_sub(1),
                message: e.to_string(),
            })?;
            let seq = match &record.instructions {
                InstructionsField::Raw(lines) => TokenSequence::from_instructions(
                    record.id.clone(),
                    &record.arch,
                    lines,
                    tables,
                )?,
                InstructionsField::Pretokenized(instrs) => TokenSequence::from_pretokenized(
                    record.id.clone(),
                    &record.arch,
                    instrs,
                    tables,
                )?,
            };
            store.insert(seq);
        }
        Ok(store)
    }

    /// Write snippets in canonical (detokenized raw-line) form.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(f);
        for seq in self.iter() {
            let record = SnippetRecord {
                id: seq.snippet_id.clone(),
                arch: seq.arch.clone(),
                instructions: InstructionsField::Raw(seq.detokenize()),
            };
            serde_json::to_writer(&mut w, &record)?;
            writeln!(w).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        w.flush().map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// A labeled snippet pair: label 1 means "compiled from the same source".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    #[serde(rename = "a")]
    pub id_a: String,
    #[serde(rename = "b")]
    pub id_b: String,
    pub label: u8,
}

impl PairExample {
    pub fn validate(&self, store: &SnippetStore) -> Result<()> {
        if self.label > 1 {
            return Err(Error::BadLabel(self.label as i64));
        }
        store.get(&self.id_a)?;
        store.get(&self.id_b)?;
        Ok(())
    }
}

/// A function-search query: one positive candidate plus N_neg negatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchQuery {
    #[serde(rename = "query")]
    pub query_id: String,
    #[serde(rename = "positive")]
    pub positive_id: String,
    #[serde(rename = "negatives")]
    pub negative_ids: Vec<String>,
}

impl SearchQuery {
    pub fn validate(&self) -> Result<()> {
        if self.negative_ids.contains(&self.positive_id) {
            return Err(Error::Config(format!(
                "query {}: positive id appears among negatives",
                self.query_id
            )));
        }
        if self.positive_id == self.query_id
            || self.negative_ids.iter().any(|n| *n == self.query_id)
        {
            return Err(Error::Config(format!(
                "query {}: candidate ids must differ from the query id",
                self.query_id
            )));
        }
        Ok(())
    }
}

pub fn load_pairs_jsonl(path: &Path) -> Result<Vec<PairExample>> {
    load_jsonl_records(path)
}

pub fn save_pairs_jsonl(path: &Path, pairs: &[PairExample]) -> Result<()> {
    save_jsonl_records(path, pairs)
}

pub fn load_queries_jsonl(path: &Path) -> Result<Vec<SearchQuery>> {
    let queries: Vec<SearchQuery> = load_jsonl_records(path)?;
    for q in &queries {
        q.validate()?;
    }
    Ok(queries)
}

pub fn save_queries_jsonl(path: &Path, queries: &[SearchQuery]) -> Result<()> {
    save_jsonl_records(path, queries)
}

fn load_jsonl_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_offset = offset;
        offset += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno + 1,
            column: e.column(),
            offset: line_offset + e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn save_jsonl_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}
