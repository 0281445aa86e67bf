//! Token and character lookup dictionaries.

use crate::error::{Error, Result};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CHAR_PAD_ID: usize = 0;
pub const CHAR_UNK_ID: usize = 1;

const VOCAB_VERSION: u32 = 1;

/// Insertion-ordered token and char dictionaries with reserved PAD/UNK ids.
///
/// Lookups of unseen items return UNK and never fail.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocab {
    version: u32,
    tokens: IndexMap<String, usize>,
    chars: IndexMap<char, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        let mut tokens = IndexMap::new();
        tokens.insert("<PAD>".to_string(), PAD_ID);
        tokens.insert("<UNK>".to_string(), UNK_ID);
        let mut chars = IndexMap::new();
        chars.insert('\u{0}', CHAR_PAD_ID);
        chars.insert('\u{1}', CHAR_UNK_ID);
        Vocab {
            version: VOCAB_VERSION,
            tokens,
            chars,
        }
    }

    /// Insert a token text and its characters, assigning dense ids in
    /// insertion order. Idempotent per item.
    pub fn insert_token(&mut self, text: &str) {
        let next = self.tokens.len();
        self.tokens.entry(text.to_string()).or_insert(next);
        for c in text.chars() {
            let next = self.chars.len();
            self.chars.entry(c).or_insert(next);
        }
    }

    pub fn token_id(&self, text: &str) -> usize {
        self.tokens.get(text).copied().unwrap_or(UNK_ID)
    }

    pub fn char_id(&self, c: char) -> usize {
        self.chars.get(&c).copied().unwrap_or(CHAR_UNK_ID)
    }

    pub fn char_ids(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.char_id(c)).collect()
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    /// SHA-256 over the canonical JSON serialization, hex-encoded. Used by
    /// checkpoints to pin the vocabulary they were trained with.
    pub fn sha256_hex(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("vocab serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let vocab: Vocab = serde_json::from_str(&text).map_err(json_to_parse_error(&text))?;
        if vocab.version != VOCAB_VERSION {
            return Err(Error::Config(format!(
                "unsupported vocab version {}",
                vocab.version
            )));
        }
        Ok(vocab)
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::new()
    }
}

/// Map a serde_json error to a parse error carrying line/column and the
/// equivalent byte offset into the source text.
pub(crate) fn json_to_parse_error(source: &str) -> impl Fn(serde_json::Error) -> Error + '_ {
    move |e| {
        let (line, column) = (e.line(), e.column());
        let offset = source
            .lines()
            .take(line.saturating_sub(1))
            .map(|l| l.len() + 1)
            .sum::<usize>()
            + column.saturating_sub(1);
        Error::Parse {
            line,
            column,
            offset,
            message: e.to_string(),
        }
    }
}
