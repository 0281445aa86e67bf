//! Model checkpoints: a binary parameter blob plus a JSON sidecar pinning
//! the model/graph configuration and the vocabulary hash.

use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::model::ModelConfig;
use crate::nn::ParamSet;
use crate::tokenizer::Vocab;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 8] = b"BSIMPRM1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub version: u32,
    pub model_config: ModelConfig,
    pub graph_config: GraphConfig,
    pub vocab_sha256: String,
}

/// Sidecar path next to a parameter blob: `model.bin` -> `model.json`.
pub fn sidecar_path(blob_path: &Path) -> PathBuf {
    blob_path.with_extension("json")
}

pub fn save(
    blob_path: &Path,
    params: &ParamSet,
    model_config: &ModelConfig,
    graph_config: &GraphConfig,
    vocab: &Vocab,
) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, m) in params.iter() {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
        for v in m.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(blob_path)
        .map_err(|e| Error::io(blob_path.display().to_string(), e))?;
    f.write_all(&buf)
        .map_err(|e| Error::io(blob_path.display().to_string(), e))?;

    let sidecar = Sidecar {
        version: FORMAT_VERSION,
        model_config: model_config.clone(),
        graph_config: graph_config.clone(),
        vocab_sha256: vocab.sha256_hex(),
    };
    let sc_path = sidecar_path(blob_path);
    std::fs::write(&sc_path, serde_json::to_vec_pretty(&sidecar)?)
        .map_err(|e| Error::io(sc_path.display().to_string(), e))?;
    Ok(())
}

/// Load a checkpoint and verify it was trained with `vocab`.
pub fn load(blob_path: &Path, vocab: &Vocab) -> Result<(ParamSet, Sidecar)> {
    let sc_path = sidecar_path(blob_path);
    let sc_text = std::fs::read_to_string(&sc_path)
        .map_err(|e| Error::io(sc_path.display().to_string(), e))?;
    let sidecar: Sidecar = serde_json::from_str(&sc_text)?;
    if sidecar.version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint version {}",
            sidecar.version
        )));
    }
    let expected = vocab.sha256_hex();
    if sidecar.vocab_sha256 != expected {
        return Err(Error::VocabHashMismatch {
            expected,
            found: sidecar.vocab_sha256,
        });
    }

    let mut f = std::fs::File::open(blob_path)
        .map_err(|e| Error::io(blob_path.display().to_string(), e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)
        .map_err(|e| Error::io(blob_path.display().to_string(), e))?;
    let mut cursor = 0usize;
    if take(&buf, &mut cursor, 8)? != MAGIC {
        return Err(Error::Config("not a checkpoint blob (bad magic)".into()));
    }
    let version = read_u32(&buf, &mut cursor)?;
    if version != FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported blob version {version}")));
    }
    let n_entries = read_u32(&buf, &mut cursor)? as usize;
    let mut params = ParamSet::new();
    for _ in 0..n_entries {
        let name_len = read_u32(&buf, &mut cursor)? as usize;
        let name = String::from_utf8(take(&buf, &mut cursor, name_len)?.to_vec())
            .map_err(|_| Error::Config("invalid parameter name in blob".into()))?;
        let rows = read_u32(&buf, &mut cursor)? as usize;
        let cols = read_u32(&buf, &mut cursor)? as usize;
        let bytes = take(&buf, &mut cursor, rows * cols * 8)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let m = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::Config(format!("bad parameter shape: {e}")))?;
        params.insert(&name, m);
    }
    Ok((params, sidecar))
}

fn take<'a>(buf: &'a [u8], cursor: &mut usize, n: usize) -> Result<&'a [u8]> {
    if *cursor + n > buf.len() {
        return Err(Error::Config("truncated checkpoint blob".into()));
    }
    let s = &buf[*cursor..*cursor + n];
    *cursor += n;
    Ok(s)
}

fn read_u32(buf: &[u8], cursor: &mut usize) -> Result<u32> {
    let b = take(buf, cursor, 4)?;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::tokenizer::build_vocab;
    use crate::tokenizer::{RegisterTables, TokenSequence};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_vocab_hash_check() {
        let tables = RegisterTables::builtin();
        let seq = TokenSequence::from_instructions(
            "s",
            "arm",
            &["MOV R0, R4".to_string()],
            &tables,
        )
        .unwrap();
        let vocab = build_vocab([&seq]).unwrap();
        let cfg = ModelConfig::tiny(8);
        let gcfg = GraphConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = init_params(&cfg, &vocab, &mut rng).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let blob = dir.path().join("model.bin");
        save(&blob, &params, &cfg, &gcfg, &vocab).unwrap();
        let (loaded, sidecar) = load(&blob, &vocab).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(sidecar.model_config, cfg);

        // a different vocab must be rejected
        let other_seq = TokenSequence::from_instructions(
            "s2",
            "arm",
            &["ADD R1, R2".to_string()],
            &tables,
        )
        .unwrap();
        let other_vocab = build_vocab([&other_seq]).unwrap();
        assert!(matches!(
            load(&blob, &other_vocab),
            Err(Error::VocabHashMismatch { .. })
        ));
    }
}
