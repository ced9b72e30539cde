//! Cascaded inference: generated state -> DB query -> generated act and
//! response, with every generated block feeding the next turn's context.
//! Gold dialog states, action states, and responses are never read.

use crate::corpus::{
    build_context, ContextKind, DialogSession, DialogState, GeneratedBlocks, GeneratedTurn,
};
use crate::dbkit::{active_domain, query, DbBucket, EntityDb};
use crate::metrics::PredTurn;
use crate::model::{split_act_response, Backbone, DecoderKind};
use crate::schema::Schema;
use crate::tokenizer::{Tokenizer, EOS_RESP, EOS_STATE};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct RolloutOptions {
    pub max_state_tokens: usize,
    pub max_joint_tokens: usize,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        RolloutOptions {
            max_state_tokens: 48,
            max_joint_tokens: 96,
        }
    }
}

/// Roll the model through each session turn by turn.
pub fn rollout(
    sessions: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
    backbone: &Backbone,
    tokenizer: &Tokenizer,
    options: &RolloutOptions,
) -> Result<Vec<PredTurn>> {
    let pad = tokenizer.pad_id();
    let eos_state = tokenizer.id(EOS_STATE);
    let eos_resp = tokenizer.id(EOS_RESP);
    let mut preds = Vec::new();
    for session in sessions {
        let mut blocks = GeneratedBlocks::default();
        let mut prev_state = DialogState::new();
        for t in 0..session.turns.len() {
            let ctx = build_context(session, t, ContextKind::ForState, false, Some(&blocks))?;
            let src = backbone.encode_eval(&tokenizer.encode(&ctx.tokens), pad)?;
            let state_ids = backbone.greedy_decode(
                DecoderKind::State,
                &src,
                eos_state,
                options.max_state_tokens,
            )?;
            let state_text = tokenizer.decode_str(&state_ids);
            let (state, _warnings) = DialogState::parse(schema, &state_text);

            let count = match active_domain(&prev_state, &state, schema) {
                // Malformed generations degrade to an empty match set
                // rather than aborting the rollout.
                Some(domain) => query(db, &state, &domain).unwrap_or(0),
                None => 0,
            };
            let db_token = DbBucket::from_count(count).token();
            blocks.turns.push(GeneratedTurn {
                state: state_text.clone(),
                db_token: db_token.clone(),
                acts: String::new(),
                response: String::new(),
            });

            let ctx =
                build_context(session, t, ContextKind::ForResponse, false, Some(&blocks))?;
            let src = backbone.encode_eval(&tokenizer.encode(&ctx.tokens), pad)?;
            let joint_ids = backbone.greedy_decode(
                DecoderKind::ActResponse,
                &src,
                eos_resp,
                options.max_joint_tokens,
            )?;
            let joint_tokens = tokenizer.decode(&joint_ids);
            let (act_tokens, resp_tokens, _warnings) = split_act_response(&joint_tokens);
            let acts_text = act_tokens.join(" ");
            let resp_text = resp_tokens.join(" ");
            let last = blocks.turns.last_mut().expect("just pushed");
            last.acts = acts_text.clone();
            last.response = resp_text.clone();

            preds.push(PredTurn {
                session_id: session.session_id.clone(),
                turn_index: t,
                state: state_text,
                db: db_token,
                acts: acts_text,
                response: resp_text,
            });
            prev_state = state;
        }
    }
    Ok(preds)
}
