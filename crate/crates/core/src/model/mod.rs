//! The shared-encoder / dual-decoder seq2seq backbone.
//!
//! One encoder serves all four representation families (state-task context,
//! response-task context, dialog state, action state); two decoders with
//! separate parameters generate the dialog state and the joint action/response
//! sequence. The desk-scale default (d=128, 2+2 layers) trains on CPU and
//! overfits fixtures in seconds.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Gradients, NodeId, Tape};
use crate::tokenizer;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            vocab_size: 0, // set from the tokenizer at build time
            d_model: 128,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            ffn_dim: 256,
            max_len: 512,
            dropout: 0.1,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("encoder_layers", self.encoder_layers),
            ("decoder_layers", self.decoder_layers),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("max_len", self.max_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "d_model {} not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Which decoder to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    State,
    ActResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Flat named-parameter container; indices are stable across the model's life.
#[derive(Clone)]
pub struct ParamStore {
    entries: Vec<(String, Array2<f64>)>,
}

impl ParamStore {
    fn new() -> Self {
        ParamStore { entries: Vec::new() }
    }

    fn add(&mut self, name: String, value: Array2<f64>) -> ParamId {
        self.entries.push((name, value));
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.entries[id].0
    }

    pub fn value(&self, id: usize) -> &Array2<f64> {
        &self.entries[id].1
    }

    pub fn value_mut(&mut self, id: usize) -> &mut Array2<f64> {
        &mut self.entries[id].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).sum()
    }
}

#[derive(Clone, Copy)]
struct LinearP {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Copy)]
struct NormP {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Clone, Copy)]
struct AttnP {
    q: LinearP,
    k: LinearP,
    v: LinearP,
    o: LinearP,
}

#[derive(Clone, Copy)]
struct EncLayerP {
    norm1: NormP,
    attn: AttnP,
    norm2: NormP,
    ff1: LinearP,
    ff2: LinearP,
}

#[derive(Clone, Copy)]
struct DecLayerP {
    norm1: NormP,
    self_attn: AttnP,
    norm2: NormP,
    cross_attn: AttnP,
    norm3: NormP,
    ff1: LinearP,
    ff2: LinearP,
}

#[derive(Clone)]
struct DecoderP {
    layers: Vec<DecLayerP>,
    final_norm: NormP,
}

#[derive(Clone)]
pub struct Backbone {
    pub config: BackboneConfig,
    params: ParamStore,
    tok_embed: ParamId,
    pos_embed: ParamId,
    encoder: Vec<EncLayerP>,
    enc_final: NormP,
    state_decoder: DecoderP,
    joint_decoder: DecoderP,
}

const LN_EPS: f64 = 1e-5;

impl Backbone {
    pub fn new(config: BackboneConfig, seed: u64) -> Result<Backbone> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let d = config.d_model;

        let mut init = |params: &mut ParamStore, name: String, rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let value = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
            params.add(name, value)
        };
        let tok_embed = init(&mut params, "embed.tok".into(), config.vocab_size, d);
        let pos_embed = init(&mut params, "embed.pos".into(), config.max_len, d);

        let linear = |params: &mut ParamStore,
                      rng: &mut ChaCha8Rng,
                      name: &str,
                      rows: usize,
                      cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let w = params.add(
                format!("{name}.w"),
                Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound)),
            );
            let b = params.add(format!("{name}.b"), Array2::zeros((1, cols)));
            LinearP { w, b }
        };
        let norm = |params: &mut ParamStore, name: &str| NormP {
            gain: params.add(format!("{name}.gain"), Array2::ones((1, d))),
            bias: params.add(format!("{name}.bias"), Array2::zeros((1, d))),
        };
        let attn = |params: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str| AttnP {
            q: linear(params, rng, &format!("{name}.q"), d, d),
            k: linear(params, rng, &format!("{name}.k"), d, d),
            v: linear(params, rng, &format!("{name}.v"), d, d),
            o: linear(params, rng, &format!("{name}.o"), d, d),
        };

        let mut encoder = Vec::new();
        for l in 0..config.encoder_layers {
            let base = format!("enc.{l}");
            encoder.push(EncLayerP {
                norm1: norm(&mut params, &format!("{base}.norm1")),
                attn: attn(&mut params, &mut rng, &format!("{base}.attn")),
                norm2: norm(&mut params, &format!("{base}.norm2")),
                ff1: linear(&mut params, &mut rng, &format!("{base}.ff1"), d, config.ffn_dim),
                ff2: linear(&mut params, &mut rng, &format!("{base}.ff2"), config.ffn_dim, d),
            });
        }
        let enc_final = norm(&mut params, "enc.final");

        let build_decoder = |tag: &str, rng: &mut ChaCha8Rng, params: &mut ParamStore| {
            let mut layers = Vec::new();
            for l in 0..config.decoder_layers {
                let base = format!("{tag}.{l}");
                layers.push(DecLayerP {
                    norm1: norm(params, &format!("{base}.norm1")),
                    self_attn: attn(params, rng, &format!("{base}.self")),
                    norm2: norm(params, &format!("{base}.norm2")),
                    cross_attn: attn(params, rng, &format!("{base}.cross")),
                    norm3: norm(params, &format!("{base}.norm3")),
                    ff1: linear(params, rng, &format!("{base}.ff1"), d, config.ffn_dim),
                    ff2: linear(params, rng, &format!("{base}.ff2"), config.ffn_dim, d),
                });
            }
            DecoderP {
                layers,
                final_norm: norm(params, &format!("{tag}.final")),
            }
        };
        let state_decoder = build_decoder("dec_state", &mut rng, &mut params);
        let joint_decoder = build_decoder("dec_joint", &mut rng, &mut params);

        Ok(Backbone {
            config,
            params,
            tok_embed,
            pos_embed,
            encoder,
            enc_final,
            state_decoder,
            joint_decoder,
        })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Index range of parameters belonging to the shared encoder (plus
    /// embeddings). Useful for asserting the encoder really is shared.
    pub fn encoder_param_indices(&self) -> Vec<usize> {
        let mut out = vec![self.tok_embed.0, self.pos_embed.0];
        for layer in &self.encoder {
            for p in [
                layer.norm1.gain, layer.norm1.bias, layer.attn.q.w, layer.attn.q.b,
                layer.attn.k.w, layer.attn.k.b, layer.attn.v.w, layer.attn.v.b,
                layer.attn.o.w, layer.attn.o.b, layer.norm2.gain, layer.norm2.bias,
                layer.ff1.w, layer.ff1.b, layer.ff2.w, layer.ff2.b,
            ] {
                out.push(p.0);
            }
        }
        out.push(self.enc_final.gain.0);
        out.push(self.enc_final.bias.0);
        out
    }

    /// Start a forward pass. Training mode applies dropout from a dedicated
    /// stream; reseed it per pass so optional passes never shift shared ones.
    pub fn forward(&self, train: bool) -> Forward<'_> {
        Forward {
            tape: Tape::new(),
            bb: self,
            param_nodes: vec![None; self.params.len()],
            train,
            dropout_rng: None,
        }
    }

    fn decoder(&self, kind: DecoderKind) -> &DecoderP {
        match kind {
            DecoderKind::State => &self.state_decoder,
            DecoderKind::ActResponse => &self.joint_decoder,
        }
    }

    /// Evaluation-mode encode returning materialized states.
    pub fn encode_eval(&self, ids: &[u32], pad_id: u32) -> Result<EncodedEval> {
        let mut fw = self.forward(false);
        let enc = fw.encode(ids, pad_id)?;
        Ok(EncodedEval {
            states: fw.tape.value(enc.states).clone(),
            pooled: fw.tape.value(enc.pooled).clone(),
            valid: enc.valid,
        })
    }

    /// Greedy decoding until `eos_id` or `max_new` tokens. Returns generated
    /// ids without the end token.
    pub fn greedy_decode(
        &self,
        kind: DecoderKind,
        src: &EncodedEval,
        eos_id: u32,
        max_new: usize,
    ) -> Result<Vec<u32>> {
        let mut generated: Vec<u32> = Vec::new();
        for _ in 0..max_new {
            let mut fw = self.forward(false);
            let src_node = fw.tape.leaf(src.states.clone());
            let logits = fw.decode_over(kind, src_node, &src.valid, &generated)?;
            let last = fw.tape.value(logits);
            let row = last.row(last.nrows() - 1);
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (i, &v) in row.iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = i;
                }
            }
            if best as u32 == eos_id {
                break;
            }
            generated.push(best as u32);
        }
        Ok(generated)
    }

    /// Teacher-forced pass over `target` collecting per-layer head-averaged
    /// cross-attention (rows: target positions, cols: source positions).
    pub fn cross_attention_eval(
        &self,
        kind: DecoderKind,
        src: &EncodedEval,
        target: &[u32],
    ) -> Result<Vec<Array2<f64>>> {
        if target.is_empty() {
            return Err(Error::InvalidArgument(
                "cross-attention export needs a non-empty target".into(),
            ));
        }
        let mut fw = self.forward(false);
        let src_node = fw.tape.leaf(src.states.clone());
        let mut records: Vec<Vec<NodeId>> = Vec::new();
        fw.decode_core(
            kind,
            src_node,
            &src.valid,
            &target[..target.len() - 1],
            Some(&mut records),
        )?;
        Ok(records
            .into_iter()
            .map(|heads| {
                let mut sum = fw.tape.value(heads[0]).clone();
                for h in &heads[1..] {
                    sum += fw.tape.value(*h);
                }
                sum.mapv_into(|x| x / heads.len() as f64)
            })
            .collect())
    }
}

/// Tape-backed encoded sequence.
pub struct EncodedSeq {
    /// Final-layer token states (seq_len x d).
    pub states: NodeId,
    /// Mean of states over valid (non-pad) positions, 1 x d.
    pub pooled: NodeId,
    /// Indices of non-pad positions.
    pub valid: Vec<usize>,
}

/// Materialized encoder output for generation-time reuse.
pub struct EncodedEval {
    pub states: Array2<f64>,
    pub pooled: Array2<f64>,
    pub valid: Vec<usize>,
}

/// Teacher-forced decode result.
pub struct DecodedTrain {
    pub logits: NodeId,
    /// Mean token NLL over the target.
    pub loss: NodeId,
    /// Per-layer, per-head cross-attention probability nodes.
    pub cross_attention: Vec<Vec<NodeId>>,
}

pub struct Forward<'a> {
    pub tape: Tape,
    bb: &'a Backbone,
    param_nodes: Vec<Option<NodeId>>,
    train: bool,
    dropout_rng: Option<ChaCha8Rng>,
}

impl<'a> Forward<'a> {
    /// Reseed the dropout stream; call before each pass in training so the
    /// mask sequence of one pass is independent of how many passes ran.
    pub fn reseed_dropout(&mut self, seed: u64) {
        if self.train {
            self.dropout_rng = Some(ChaCha8Rng::seed_from_u64(seed));
        }
    }

    fn p(&mut self, id: ParamId) -> NodeId {
        if let Some(node) = self.param_nodes[id.0] {
            return node;
        }
        let node = self.tape.leaf(self.bb.params.value(id.0).clone());
        self.param_nodes[id.0] = Some(node);
        node
    }

    /// Collect gradients for every parameter touched by this pass, indexed
    /// by parameter position.
    pub fn param_grads(&self, grads: &mut Gradients) -> Vec<Option<Array2<f64>>> {
        self.param_nodes
            .iter()
            .map(|slot| slot.and_then(|node| grads.take(node)))
            .collect()
    }

    fn linear(&mut self, x: NodeId, lin: &LinearP) -> NodeId {
        let w = self.p(lin.w);
        let b = self.p(lin.b);
        let xw = self.tape.matmul(x, w);
        self.tape.add_row(xw, b)
    }

    fn norm(&mut self, x: NodeId, n: &NormP) -> NodeId {
        let gain = self.p(n.gain);
        let bias = self.p(n.bias);
        self.tape.layer_norm(x, gain, bias, LN_EPS)
    }

    fn dropout(&mut self, x: NodeId) -> NodeId {
        let p = self.bb.config.dropout;
        if !self.train || p == 0.0 {
            return x;
        }
        let rng = self
            .dropout_rng
            .as_mut()
            .expect("training pass without a dropout seed");
        let keep = 1.0 - p;
        let dim = self.tape.value(x).dim();
        let mask = Array2::from_shape_fn(dim, |_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        self.tape.mul_const(x, mask)
    }

    fn embed(&mut self, ids: &[u32]) -> Result<NodeId> {
        let cfg = &self.bb.config;
        if ids.is_empty() {
            return Err(Error::InvalidArgument("cannot embed an empty sequence".into()));
        }
        if ids.len() > cfg.max_len {
            return Err(Error::InvalidArgument(format!(
                "sequence length {} exceeds max length {}",
                ids.len(),
                cfg.max_len
            )));
        }
        for &id in ids {
            if id as usize >= cfg.vocab_size {
                return Err(Error::InvalidArgument(format!(
                    "token id {id} outside vocabulary of {}",
                    cfg.vocab_size
                )));
            }
        }
        let tok_table = self.p(self.bb.tok_embed);
        let pos_table = self.p(self.bb.pos_embed);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let ids_usize: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let tok = self.tape.gather(tok_table, &ids_usize);
        let pos = self.tape.gather(pos_table, &positions);
        let sum = self.tape.add(tok, pos);
        Ok(self.dropout(sum))
    }

    /// Multi-head attention. `key_mask` is an additive seq-shaped row mask
    /// over source positions; `causal` restricts each query to keys at or
    /// before it. Returns the output and, optionally, per-head probability
    /// nodes via `record`.
    fn attention(
        &mut self,
        queries: NodeId,
        keys_values: NodeId,
        attn: &AttnP,
        mask: &Array2<f64>,
        record: Option<&mut Vec<NodeId>>,
    ) -> NodeId {
        let heads = self.bb.config.heads;
        let head_dim = self.bb.config.d_model / heads;
        let q = self.linear(queries, &attn.q);
        let k = self.linear(keys_values, &attn.k);
        let v = self.linear(keys_values, &attn.v);
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut contexts = Vec::with_capacity(heads);
        let mut recorded = Vec::new();
        for h in 0..heads {
            let qh = self.tape.slice_cols(q, h * head_dim, head_dim);
            let kh = self.tape.slice_cols(k, h * head_dim, head_dim);
            let vh = self.tape.slice_cols(v, h * head_dim, head_dim);
            let scores = self.tape.matmul_nt(qh, kh);
            let scaled = self.tape.scale(scores, scale);
            let masked = self.tape.add_const(scaled, mask);
            let probs = self.tape.row_softmax(masked);
            recorded.push(probs);
            contexts.push(self.tape.matmul(probs, vh));
        }
        if let Some(out) = record {
            *out = recorded;
        }
        let merged = self.tape.concat_cols(&contexts);
        let projected = self.linear(merged, &attn.o);
        self.dropout(projected)
    }

    /// Encode a token sequence. Trailing (or interior) `pad_id` positions are
    /// masked out of attention keys and excluded from pooling, so padding
    /// never changes the representation of valid positions.
    pub fn encode(&mut self, ids: &[u32], pad_id: u32) -> Result<EncodedSeq> {
        let valid: Vec<usize> = ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| id != pad_id)
            .map(|(i, _)| i)
            .collect();
        if valid.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot encode a sequence of only padding".into(),
            ));
        }
        let mut x = self.embed(ids)?;
        let n = ids.len();
        let mut mask = Array2::<f64>::zeros((n, n));
        for (k, &id) in ids.iter().enumerate() {
            if id == pad_id {
                for q in 0..n {
                    mask[(q, k)] = f64::NEG_INFINITY;
                }
            }
        }
        let layers = self.bb.encoder.clone();
        for layer in &layers {
            let normed = self.norm(x, &layer.norm1);
            let attended = self.attention(normed, normed, &layer.attn, &mask, None);
            x = self.tape.add(x, attended);
            let normed = self.norm(x, &layer.norm2);
            let ff = self.ffn(normed, &layer.ff1, &layer.ff2);
            x = self.tape.add(x, ff);
        }
        let final_norm = self.bb.enc_final;
        let states = self.norm(x, &final_norm);
        let pooled = self.tape.mean_pool_rows(states, &valid);
        Ok(EncodedSeq {
            states,
            pooled,
            valid,
        })
    }

    fn ffn(&mut self, x: NodeId, ff1: &LinearP, ff2: &LinearP) -> NodeId {
        let hidden = self.linear(x, ff1);
        let act = self.tape.relu(hidden);
        let out = self.linear(act, ff2);
        self.dropout(out)
    }

    /// Teacher-forced decode: the decoder consumes `<s> target[..L-1]` and
    /// the loss scores all L target positions.
    pub fn decode_train(
        &mut self,
        kind: DecoderKind,
        src: &EncodedSeq,
        target: &[u32],
        pad_id: u32,
    ) -> Result<DecodedTrain> {
        if target.is_empty() {
            return Err(Error::InvalidArgument("empty decode target".into()));
        }
        let mut records: Vec<Vec<NodeId>> = Vec::new();
        // Teacher forcing: the decoder input is the target shifted right
        // behind <s>, so logits row i scores target[i].
        let suffix = &target[..target.len() - 1];
        let logits =
            self.decode_core(kind, src.states, &src.valid, suffix, Some(&mut records))?;
        let loss = self.tape.cross_entropy(logits, target, pad_id)?;
        Ok(DecodedTrain {
            logits,
            loss,
            cross_attention: records,
        })
    }

    /// Decoder forward over `<s> prefix`; generation reads the last logits
    /// row to pick the next token.
    fn decode_over(
        &mut self,
        kind: DecoderKind,
        src_states: NodeId,
        src_valid: &[usize],
        prefix: &[u32],
    ) -> Result<NodeId> {
        self.decode_core(kind, src_states, src_valid, prefix, None)
    }

    fn decode_core(
        &mut self,
        kind: DecoderKind,
        src_states: NodeId,
        src_valid: &[usize],
        input_suffix: &[u32],
        mut record: Option<&mut Vec<Vec<NodeId>>>,
    ) -> Result<NodeId> {
        let mut input_ids: Vec<u32> = Vec::with_capacity(input_suffix.len() + 1);
        input_ids.push(tokenizer_start_id());
        input_ids.extend_from_slice(input_suffix);
        let len = input_ids.len();
        let mut x = self.embed(&input_ids)?;

        let mut causal = Array2::<f64>::zeros((len, len));
        for q in 0..len {
            for k in (q + 1)..len {
                causal[(q, k)] = f64::NEG_INFINITY;
            }
        }
        let src_len = self.tape.value(src_states).nrows();
        let mut cross_mask = Array2::<f64>::from_elem((len, src_len), f64::NEG_INFINITY);
        for &k in src_valid {
            for q in 0..len {
                cross_mask[(q, k)] = 0.0;
            }
        }

        let decoder = self.bb.decoder(kind);
        let layers = decoder.layers.clone();
        let final_norm = decoder.final_norm;
        for layer in &layers {
            let normed = self.norm(x, &layer.norm1);
            let attended = self.attention(normed, normed, &layer.self_attn, &causal, None);
            x = self.tape.add(x, attended);
            let normed = self.norm(x, &layer.norm2);
            let mut heads = Vec::new();
            let attended = self.attention(
                normed,
                src_states,
                &layer.cross_attn,
                &cross_mask,
                Some(&mut heads),
            );
            if let Some(rec) = record.as_deref_mut() {
                rec.push(heads);
            }
            x = self.tape.add(x, attended);
            let normed = self.norm(x, &layer.norm3);
            let ff = self.ffn(normed, &layer.ff1, &layer.ff2);
            x = self.tape.add(x, ff);
        }
        let states = self.norm(x, &final_norm);
        // Weight-tied output projection: logits = states . E^T.
        let embed = self.p(self.bb.tok_embed);
        Ok(self.tape.matmul_nt(states, embed))
    }
}

/// Fixed id of the decoder start token (see [`crate::tokenizer`]).
fn tokenizer_start_id() -> u32 {
    2
}

/// Split a generated joint sequence into (action tokens, response tokens).
/// Missing boundary markers degrade gracefully with a warning.
pub fn split_act_response(tokens: &[String]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut warnings = Vec::new();
    let is_marker = |t: &str| {
        matches!(
            t,
            tokenizer::BOS_ACT | tokenizer::EOS_ACT | tokenizer::BOS_RESP | tokenizer::EOS_RESP
        )
    };
    let bos_resp = tokens.iter().position(|t| t == tokenizer::BOS_RESP);
    let (act_part, resp_part): (&[String], &[String]) = match bos_resp {
        Some(idx) => (&tokens[..idx], &tokens[idx + 1..]),
        None => {
            warnings.push("missing <bos_resp>: treating whole output as acts".to_string());
            (tokens, &[])
        }
    };
    let acts: Vec<String> = act_part
        .iter()
        .filter(|t| !is_marker(t))
        .cloned()
        .collect();
    let resp_end = resp_part
        .iter()
        .position(|t| t == tokenizer::EOS_RESP)
        .unwrap_or(resp_part.len());
    let response: Vec<String> = resp_part[..resp_end]
        .iter()
        .filter(|t| !is_marker(t))
        .cloned()
        .collect();
    (acts, response, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_backbone(vocab: usize) -> Backbone {
        Backbone::new(
            BackboneConfig {
                vocab_size: vocab,
                d_model: 16,
                encoder_layers: 1,
                decoder_layers: 1,
                heads: 2,
                ffn_dim: 32,
                max_len: 32,
                dropout: 0.0,
            },
            7,
        )
        .unwrap()
    }

    #[test]
    fn single_token_pooled_equals_state_row() {
        let bb = tiny_backbone(10);
        let enc = bb.encode_eval(&[3], 0).unwrap();
        assert_eq!(enc.states.nrows(), 1);
        for c in 0..enc.states.ncols() {
            assert_abs_diff_eq!(enc.states[(0, c)], enc.pooled[(0, c)], epsilon = 0.0);
        }
    }

    #[test]
    fn eval_encode_is_deterministic() {
        let bb = tiny_backbone(10);
        let a = bb.encode_eval(&[1, 2, 3, 4], 0).unwrap();
        let b = bb.encode_eval(&[1, 2, 3, 4], 0).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.pooled, b.pooled);
    }

    #[test]
    fn trailing_padding_leaves_pooled_unchanged() {
        let bb = tiny_backbone(10);
        let plain = bb.encode_eval(&[5, 6, 7], 0).unwrap();
        let padded = bb.encode_eval(&[5, 6, 7, 0, 0], 0).unwrap();
        assert_eq!(plain.pooled, padded.pooled);
        for (r, &orig) in plain.valid.iter().enumerate() {
            for c in 0..plain.states.ncols() {
                assert_eq!(plain.states[(orig, c)], padded.states[(r, c)]);
            }
        }
    }

    #[test]
    fn over_length_and_oob_errors() {
        let bb = tiny_backbone(10);
        let too_long: Vec<u32> = (0..33).map(|i| (i % 9 + 1) as u32).collect();
        assert!(bb.encode_eval(&too_long, 0).is_err());
        assert!(bb.encode_eval(&[11], 0).is_err());
        assert!(bb.encode_eval(&[0, 0], 0).is_err());
    }

    #[test]
    fn teacher_forced_logits_shape_and_attention_rows() {
        let bb = tiny_backbone(12);
        let mut fw = bb.forward(true);
        fw.reseed_dropout(1);
        let enc = fw.encode(&[1, 2, 3, 4, 5], 0).unwrap();
        let target = [6u32, 7, 8];
        let out = fw.decode_train(DecoderKind::State, &enc, &target, 0).unwrap();
        let logits = fw.tape.value(out.logits);
        assert_eq!(logits.dim(), (3, 12));
        assert_eq!(out.cross_attention.len(), 1);
        for heads in &out.cross_attention {
            for &h in heads {
                let probs = fw.tape.value(h);
                assert_eq!(probs.dim(), (3, 5));
                for row in probs.rows() {
                    assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-9);
                    assert!(row.iter().all(|&p| p >= 0.0));
                }
            }
        }
    }

    #[test]
    fn generation_max_len_zero_is_empty() {
        let bb = tiny_backbone(12);
        let enc = bb.encode_eval(&[1, 2], 0).unwrap();
        let out = bb.greedy_decode(DecoderKind::State, &enc, 3, 0).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn decoders_have_separate_parameters_one_encoder() {
        let bb = tiny_backbone(12);
        let names: Vec<&str> = bb.params.iter().map(|(n, _)| n).collect();
        assert!(names.iter().any(|n| n.starts_with("dec_state.")));
        assert!(names.iter().any(|n| n.starts_with("dec_joint.")));
        let enc_count = names.iter().filter(|n| n.starts_with("enc.")).count();
        assert!(enc_count > 0);
        // Shared-encoder check: the encode path touches the same parameter
        // indices no matter which task the context feeds.
        let idx = bb.encoder_param_indices();
        let mut fw = bb.forward(false);
        let _ = fw.encode(&[1, 2, 3], 0).unwrap();
        let touched: Vec<usize> = (0..bb.params.len())
            .filter(|&i| fw.param_nodes[i].is_some())
            .collect();
        assert_eq!(touched, {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted
        });
    }

    #[test]
    fn split_joint_sequence() {
        let toks = |s: &str| -> Vec<String> { s.split_whitespace().map(String::from).collect() };
        let (acts, resp, warnings) = split_act_response(&toks(
            "<bos_act> [attraction] [inform] name <eos_act> <bos_resp> try [value_name] . <eos_resp>",
        ));
        assert_eq!(acts.join(" "), "[attraction] [inform] name");
        assert_eq!(resp.join(" "), "try [value_name] .");
        assert!(warnings.is_empty());

        let (acts, resp, warnings) =
            split_act_response(&toks("<bos_act> [general] [reqmore] <eos_act>"));
        assert_eq!(acts.join(" "), "[general] [reqmore]");
        assert!(resp.is_empty());
        assert_eq!(warnings.len(), 1);
    }
}
