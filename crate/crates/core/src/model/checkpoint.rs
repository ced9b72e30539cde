//! Checkpoint container: versioned JSON header (config, vocabulary,
//! parameter index) followed by a little-endian f64 blob.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backbone, BackboneConfig};
use crate::tokenizer::Tokenizer;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TODCKPT1";

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    tool_version: String,
    config: BackboneConfig,
    vocab: Vec<String>,
    params: Vec<ParamEntry>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    backbone: &Backbone,
    tokenizer: &Tokenizer,
) -> Result<()> {
    let path = path.as_ref();
    let header = Header {
        format_version: 1,
        tool_version: crate::TOOL_VERSION.to_string(),
        config: backbone.config.clone(),
        vocab: tokenizer.tokens().to_vec(),
        params: backbone
            .params()
            .iter()
            .map(|(name, value)| ParamEntry {
                name: name.to_string(),
                rows: value.nrows(),
                cols: value.ncols(),
            })
            .collect(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let mut file =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let io = |e| Error::io(path.display().to_string(), e);
    file.write_all(MAGIC).map_err(io)?;
    file.write_all(&(header_json.len() as u64).to_le_bytes())
        .map_err(io)?;
    file.write_all(&header_json).map_err(io)?;
    let mut buf: Vec<u8> = Vec::new();
    for (_, value) in backbone.params().iter() {
        for &x in value.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    file.write_all(&buf).map_err(io)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Backbone, Tokenizer)> {
    let path = path.as_ref();
    let corrupt = |detail: &str| Error::Checkpoint {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };
    let mut file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|_| corrupt("missing magic"))?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic: not a checkpoint file"));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)
        .map_err(|_| corrupt("truncated header length"))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)
        .map_err(|_| corrupt("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&header_json).map_err(|e| corrupt(&format!("bad header: {e}")))?;
    if header.format_version != 1 {
        return Err(corrupt(&format!(
            "unsupported format version {}",
            header.format_version
        )));
    }

    // Rebuild the layout, then overwrite every parameter from the blob.
    let mut backbone = Backbone::new(header.config, 0)?;
    if backbone.params().len() != header.params.len() {
        return Err(corrupt("parameter index does not match the layout"));
    }
    let mut blob = Vec::new();
    file.read_to_end(&mut blob)
        .map_err(|_| corrupt("truncated data"))?;
    let mut offset = 0usize;
    for (i, entry) in header.params.iter().enumerate() {
        if backbone.params().name(i) != entry.name {
            return Err(corrupt(&format!(
                "parameter {i} is '{}' in the layout but '{}' in the file",
                backbone.params().name(i),
                entry.name
            )));
        }
        let value = backbone.params_mut().value_mut(i);
        if value.dim() != (entry.rows, entry.cols) {
            return Err(corrupt(&format!("parameter '{}' shape mismatch", entry.name)));
        }
        for x in value.iter_mut() {
            let bytes: [u8; 8] = blob
                .get(offset..offset + 8)
                .ok_or_else(|| corrupt("data blob too short"))?
                .try_into()
                .expect("slice of 8");
            *x = f64::from_le_bytes(bytes);
            offset += 8;
        }
    }
    if offset != blob.len() {
        return Err(corrupt("trailing bytes after parameter data"));
    }
    let mut tokenizer = Tokenizer::from_tokens(header.vocab);
    tokenizer.reindex();
    Ok((backbone, tokenizer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{fixture_db, fixture_schema, sample_session};

    #[test]
    fn checkpoint_round_trip_preserves_outputs() {
        let sessions = vec![sample_session()];
        let tokenizer = Tokenizer::build(&fixture_schema(), &fixture_db(), [sessions.as_slice()]);
        let config = BackboneConfig {
            vocab_size: tokenizer.vocab_size(),
            d_model: 16,
            encoder_layers: 1,
            decoder_layers: 1,
            heads: 2,
            ffn_dim: 32,
            max_len: 64,
            dropout: 0.0,
        };
        let backbone = Backbone::new(config, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &backbone, &tokenizer).unwrap();
        let (loaded, loaded_tok) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_tok, tokenizer);
        let ids = tokenizer.encode_str("[attraction] type theatre");
        let a = backbone.encode_eval(&ids, tokenizer.pad_id()).unwrap();
        let b = loaded.encode_eval(&ids, tokenizer.pad_id()).unwrap();
        assert_eq!(a.pooled, b.pooled);
    }

    #[test]
    fn junk_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::Checkpoint { .. })
        ));
    }
}
