//! Token-sequence assembly for one training turn: the two encoder contexts,
//! the two decoder targets, and the two state-representation sequences the
//! contrastive terms encode.

use crate::corpus::{build_context, tokenize, ContextKind, DialogSession};
use crate::tokenizer::{Tokenizer, BOS_ACT, BOS_RESP, EOS_ACT, EOS_RESP, EOS_STATE};
use crate::Result;

pub struct TurnSequences {
    /// Encoder input for dialog-state generation: (C_t, U_t).
    pub ctx_state: Vec<u32>,
    /// Decoder target: linearized state then `<eos_state>`.
    pub state_target: Vec<u32>,
    /// Encoder input for act/response generation: (C_t, U_t, DB_t).
    pub ctx_resp: Vec<u32>,
    /// Decoder target: `<bos_act> A <eos_act> <bos_resp> R <eos_resp>`.
    pub joint_target: Vec<u32>,
    /// Encoder input for the dialog-state representation (Mars terms).
    pub state_repr: Vec<u32>,
    /// Encoder input for the action-state representation (Mars terms).
    pub act_repr: Vec<u32>,
}

/// Oracle-mode sequences for turn `t` of a session.
pub fn turn_sequences(
    session: &DialogSession,
    t: usize,
    tokenizer: &Tokenizer,
) -> Result<TurnSequences> {
    let turn = &session.turns[t];
    let ctx_state_tokens = build_context(session, t, ContextKind::ForState, true, None)?.tokens;
    let ctx_resp_tokens = build_context(session, t, ContextKind::ForResponse, true, None)?.tokens;

    let state_tokens = tokenize(&turn.dialog_state.linearize());
    let mut state_target = tokenizer.encode(&state_tokens);
    state_target.push(tokenizer.id(EOS_STATE));

    let act_tokens = tokenize(&turn.action_state.linearize());
    let resp_tokens = tokenize(&turn.response);
    let mut joint_target = vec![tokenizer.id(BOS_ACT)];
    joint_target.extend(tokenizer.encode(&act_tokens));
    joint_target.push(tokenizer.id(EOS_ACT));
    joint_target.push(tokenizer.id(BOS_RESP));
    joint_target.extend(tokenizer.encode(&resp_tokens));
    joint_target.push(tokenizer.id(EOS_RESP));

    // The representation sequences reuse the target framing so an empty
    // state still encodes to something (at least the end marker).
    let state_repr = state_target.clone();
    let mut act_repr = vec![tokenizer.id(BOS_ACT)];
    act_repr.extend(tokenizer.encode(&act_tokens));
    act_repr.push(tokenizer.id(EOS_ACT));

    Ok(TurnSequences {
        ctx_state: tokenizer.encode(&ctx_state_tokens),
        state_target,
        ctx_resp: tokenizer.encode(&ctx_resp_tokens),
        joint_target,
        state_repr,
        act_repr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{fixture_db, fixture_schema, sample_session};

    #[test]
    fn sequences_have_expected_framing() {
        let session = sample_session();
        let sessions = vec![session.clone()];
        let tok = Tokenizer::build(&fixture_schema(), &fixture_db(), [sessions.as_slice()]);
        let seqs = turn_sequences(&session, 1, &tok).unwrap();
        assert_eq!(
            *seqs.state_target.last().unwrap(),
            tok.id(EOS_STATE)
        );
        assert_eq!(seqs.joint_target[0], tok.id(BOS_ACT));
        assert_eq!(*seqs.joint_target.last().unwrap(), tok.id(EOS_RESP));
        // The response context is the state context plus the DB token.
        assert_eq!(seqs.ctx_resp.len(), seqs.ctx_state.len() + 1);
        assert_eq!(
            seqs.ctx_resp.last().copied().unwrap(),
            tok.id(&session.turns[1].db_bucket().token())
        );
        // No unknown tokens in fixture sequences.
        let unk = tok.id("<unk>");
        for seq in [
            &seqs.ctx_state,
            &seqs.state_target,
            &seqs.ctx_resp,
            &seqs.joint_target,
        ] {
            assert!(!seq.contains(&unk));
        }
    }
}
