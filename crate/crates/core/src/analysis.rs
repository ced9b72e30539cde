//! Representation diagnostics: paired cosine similarity between contexts and
//! their states, cross-space Euclidean distance, and cross-attention export.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_context, ContextKind, DialogSession};
use crate::model::{Backbone, DecoderKind};
use crate::tokenizer::Tokenizer;
use crate::trainer::turn_sequences;
use crate::{Error, Result};

/// Pooled representations of one turn: state-task context (h_cd), dialog
/// state (h_dd), response-task context (h_ca), action state (h_aa).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub session_id: String,
    pub turn_index: usize,
    pub h_cd: Vec<f64>,
    pub h_dd: Vec<f64>,
    pub h_ca: Vec<f64>,
    pub h_aa: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepDump {
    pub dim: usize,
    pub records: Vec<RepRecord>,
}

/// Encode every turn of every session (oracle contexts, gold blocks) and
/// collect the four pooled representations.
pub fn compute_dump(
    backbone: &Backbone,
    tokenizer: &Tokenizer,
    sessions: &[DialogSession],
) -> Result<RepDump> {
    let pad = tokenizer.pad_id();
    let mut records = Vec::new();
    for session in sessions {
        for t in 0..session.turns.len() {
            let seqs = turn_sequences(session, t, tokenizer)?;
            let h_cd = backbone.encode_eval(&seqs.ctx_state, pad)?.pooled;
            let h_dd = backbone.encode_eval(&seqs.state_repr, pad)?.pooled;
            let h_ca = backbone.encode_eval(&seqs.ctx_resp, pad)?.pooled;
            let h_aa = backbone.encode_eval(&seqs.act_repr, pad)?.pooled;
            records.push(RepRecord {
                session_id: session.session_id.clone(),
                turn_index: t,
                h_cd: h_cd.into_raw_vec_and_offset().0,
                h_dd: h_dd.into_raw_vec_and_offset().0,
                h_ca: h_ca.into_raw_vec_and_offset().0,
                h_aa: h_aa.into_raw_vec_and_offset().0,
            });
        }
    }
    let dim = records
        .first()
        .map(|r| r.h_cd.len())
        .ok_or_else(|| Error::InvalidArgument("no turns to dump".into()))?;
    Ok(RepDump { dim, records })
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormRow(0));
    }
    Ok(dot / (na * nb))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean over turns of cos(h_cd, h_dd) and cos(h_ca, h_aa).
pub fn paired_cosine_report(dump: &RepDump) -> Result<(f64, f64)> {
    if dump.records.is_empty() {
        return Err(Error::InvalidArgument("empty representation dump".into()));
    }
    let mut state_sum = 0.0;
    let mut act_sum = 0.0;
    for r in &dump.records {
        state_sum += cosine(&r.h_cd, &r.h_dd)?;
        act_sum += cosine(&r.h_ca, &r.h_aa)?;
    }
    let n = dump.records.len() as f64;
    Ok((state_sum / n, act_sum / n))
}

/// Mean Euclidean distance over the full cross product of context and state
/// representations (same-index pairs included), per state family.
pub fn space_distance_report(dump: &RepDump) -> Result<(f64, f64)> {
    if dump.records.is_empty() {
        return Err(Error::InvalidArgument("empty representation dump".into()));
    }
    let n = dump.records.len();
    let mut state_sum = 0.0;
    let mut act_sum = 0.0;
    for a in &dump.records {
        for b in &dump.records {
            state_sum += euclidean(&a.h_cd, &b.h_dd);
            act_sum += euclidean(&a.h_ca, &b.h_aa);
        }
    }
    let pairs = (n * n) as f64;
    Ok((state_sum / pairs, act_sum / pairs))
}

#[derive(Serialize, Deserialize)]
struct DumpIndex {
    dim: usize,
    fields: Vec<String>,
    records: Vec<DumpIndexRecord>,
}

#[derive(Serialize, Deserialize)]
struct DumpIndexRecord {
    session_id: String,
    turn_index: usize,
}

fn index_path(data_path: &Path) -> PathBuf {
    let mut os = data_path.as_os_str().to_owned();
    os.push(".index.json");
    PathBuf::from(os)
}

/// Write the dump as a flat little-endian f64 array (`n x 4 x dim`) plus a
/// JSON index sidecar at `<path>.index.json`.
pub fn save_dump(path: impl AsRef<Path>, dump: &RepDump) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path.display().to_string(), e);
    let mut file = fs::File::create(path).map_err(io)?;
    let mut buf = Vec::with_capacity(dump.records.len() * 4 * dump.dim * 8);
    for r in &dump.records {
        for field in [&r.h_cd, &r.h_dd, &r.h_ca, &r.h_aa] {
            for &x in field {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    file.write_all(&buf).map_err(io)?;
    let index = DumpIndex {
        dim: dump.dim,
        fields: ["h_cd", "h_dd", "h_ca", "h_aa"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        records: dump
            .records
            .iter()
            .map(|r| DumpIndexRecord {
                session_id: r.session_id.clone(),
                turn_index: r.turn_index,
            })
            .collect(),
    };
    fs::write(
        index_path(path),
        serde_json::to_string_pretty(&index).expect("index serializes"),
    )
    .map_err(io)?;
    Ok(())
}

pub fn load_dump(path: impl AsRef<Path>) -> Result<RepDump> {
    let path = path.as_ref();
    let io = |e| Error::io(path.display().to_string(), e);
    let index_text = fs::read_to_string(index_path(path))
        .map_err(|e| Error::io(index_path(path).display().to_string(), e))?;
    let index: DumpIndex = serde_json::from_str(&index_text).map_err(|e| Error::MalformedLine {
        path: index_path(path).display().to_string(),
        line: e.line(),
        detail: e.to_string(),
    })?;
    let mut blob = Vec::new();
    fs::File::open(path)
        .map_err(io)?
        .read_to_end(&mut blob)
        .map_err(io)?;
    let expected = index.records.len() * 4 * index.dim * 8;
    if blob.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "dump data is {} bytes but the index implies {expected}",
            blob.len()
        )));
    }
    let mut offset = 0usize;
    let mut read_vec = |blob: &[u8]| {
        let mut v = Vec::with_capacity(index.dim);
        for _ in 0..index.dim {
            let bytes: [u8; 8] = blob[offset..offset + 8].try_into().expect("in range");
            v.push(f64::from_le_bytes(bytes));
            offset += 8;
        }
        v
    };
    let mut records = Vec::with_capacity(index.records.len());
    for rec in &index.records {
        let h_cd = read_vec(&blob);
        let h_dd = read_vec(&blob);
        let h_ca = read_vec(&blob);
        let h_aa = read_vec(&blob);
        records.push(RepRecord {
            session_id: rec.session_id.clone(),
            turn_index: rec.turn_index,
            h_cd,
            h_dd,
            h_ca,
            h_aa,
        });
    }
    Ok(RepDump {
        dim: index.dim,
        records,
    })
}

/// Head-averaged last-layer cross-attention between the oracle context and
/// the state sequence the model generates for it.
pub struct AttentionExport {
    /// Rows: generated state tokens; cols: context tokens. Row-stochastic.
    pub matrix: Array2<f64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

pub fn export_cross_attention(
    backbone: &Backbone,
    tokenizer: &Tokenizer,
    session: &DialogSession,
    turn: usize,
    max_new: usize,
) -> Result<AttentionExport> {
    let ctx = build_context(session, turn, ContextKind::ForState, true, None)?;
    let ctx_ids = tokenizer.encode(&ctx.tokens);
    let pad = tokenizer.pad_id();
    let src = backbone.encode_eval(&ctx_ids, pad)?;
    let eos = tokenizer.id(crate::tokenizer::EOS_STATE);
    let generated = backbone.greedy_decode(DecoderKind::State, &src, eos, max_new)?;
    if generated.is_empty() {
        return Err(Error::NotFound(format!(
            "model generated an empty state for session {} turn {turn}",
            session.session_id
        )));
    }
    let layers = backbone.cross_attention_eval(DecoderKind::State, &src, &generated)?;
    let matrix = layers
        .last()
        .cloned()
        .ok_or_else(|| Error::InvalidArgument("decoder has no layers".into()))?;
    Ok(AttentionExport {
        matrix,
        row_labels: tokenizer.decode(&generated),
        col_labels: ctx.tokens,
    })
}

/// Write the attention matrix as TSV plus a JSON label file at
/// `<path>.labels.json`; any plotting tool can consume the pair.
pub fn save_attention(path: impl AsRef<Path>, export: &AttentionExport) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in export.matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))?;
    let labels = serde_json::json!({
        "rows": export.row_labels,
        "cols": export.col_labels,
    });
    let label_path = {
        let mut os = path.as_os_str().to_owned();
        os.push(".labels.json");
        PathBuf::from(os)
    };
    fs::write(
        &label_path,
        serde_json::to_string_pretty(&labels).expect("labels serialize"),
    )
    .map_err(|e| Error::io(label_path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dump_of(rows: &[(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)]) -> RepDump {
        RepDump {
            dim: rows[0].0.len(),
            records: rows
                .iter()
                .enumerate()
                .map(|(i, (cd, dd, ca, aa))| RepRecord {
                    session_id: format!("s{i}"),
                    turn_index: 0,
                    h_cd: cd.clone(),
                    h_dd: dd.clone(),
                    h_ca: ca.clone(),
                    h_aa: aa.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn paired_cosine_identical_and_orthogonal() {
        let identical = dump_of(&[(
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            vec![0.5, 0.0],
            vec![0.5, 0.0],
        )]);
        let (s, a) = paired_cosine_report(&identical).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        let orthogonal = dump_of(&[(
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 2.0],
            vec![3.0, 0.0],
        )]);
        let (s, a) = paired_cosine_report(&orthogonal).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_unit_axes() {
        let dump = dump_of(&[(
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        )]);
        let (s, a) = space_distance_report(&dump).unwrap();
        assert_abs_diff_eq!(s, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(a, 2f64.sqrt(), epsilon = 1e-12);
        let zero = dump_of(&[(
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 0.0],
            vec![2.0, 0.0],
        )]);
        let (s, a) = space_distance_report(&zero).unwrap();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_scale_invariant_distance_not() {
        let base = dump_of(&[(
            vec![1.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        )]);
        let scaled = dump_of(&[(
            vec![3.0, 3.0],
            vec![2.0, 0.0],
            vec![0.0, 5.0],
            vec![4.0, 4.0],
        )]);
        let (cs_a, ca_a) = paired_cosine_report(&base).unwrap();
        let (cs_b, ca_b) = paired_cosine_report(&scaled).unwrap();
        assert_abs_diff_eq!(cs_a, cs_b, epsilon = 1e-12);
        assert_abs_diff_eq!(ca_a, ca_b, epsilon = 1e-12);
        let (ds_a, _) = space_distance_report(&base).unwrap();
        let (ds_b, _) = space_distance_report(&scaled).unwrap();
        assert!((ds_a - ds_b).abs() > 1e-6);
    }

    #[test]
    fn reports_invariant_to_record_order() {
        let mut dump = dump_of(&[
            (vec![1.0, 0.2], vec![0.1, 1.0], vec![0.4, 0.4], vec![1.0, 0.0]),
            (vec![0.3, 0.9], vec![1.0, 1.0], vec![0.2, 0.8], vec![0.5, 0.5]),
        ]);
        let fwd_cos = paired_cosine_report(&dump).unwrap();
        let fwd_dist = space_distance_report(&dump).unwrap();
        dump.records.reverse();
        let rev_cos = paired_cosine_report(&dump).unwrap();
        let rev_dist = space_distance_report(&dump).unwrap();
        assert_abs_diff_eq!(fwd_cos.0, rev_cos.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd_dist.0, rev_dist.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd_dist.1, rev_dist.1, epsilon = 1e-12);
    }

    #[test]
    fn dump_file_round_trip() {
        let dump = dump_of(&[
            (vec![1.0, 0.2], vec![0.1, 1.0], vec![0.4, 0.4], vec![1.0, 0.0]),
            (vec![0.3, 0.9], vec![1.0, 1.0], vec![0.2, 0.8], vec![0.5, 0.5]),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reps.f64");
        save_dump(&path, &dump).unwrap();
        let loaded = load_dump(&path).unwrap();
        assert_eq!(dump, loaded);
    }
}
