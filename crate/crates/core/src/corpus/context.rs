//! Context assembly: the encoder input sequences for the two generation
//! tasks. The history for turn t is the concatenation of the full previous
//! turn blocks in the order U, D, DB, A, R, followed by the current user
//! utterance (and, for the response task, the current DB token).

use serde::{Deserialize, Serialize};

use super::{tokenize, DialogSession};
use crate::{Error, Result};

/// Which generation task the context feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContextKind {
    /// Dialog-state generation: (C_t, U_t).
    ForState,
    /// Action/response generation: (C_t, U_t, DB_t).
    ForResponse,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextSequence {
    pub tokens: Vec<String>,
    pub kind: ContextKind,
}

/// Model-generated blocks recorded during a rollout; they replace the gold
/// annotations when assembling inference-mode contexts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedBlocks {
    pub turns: Vec<GeneratedTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTurn {
    /// Linearized generated dialog state.
    pub state: String,
    /// DB token from re-querying with the generated state.
    pub db_token: String,
    /// Linearized generated action state.
    pub acts: String,
    /// Generated delexicalized response.
    pub response: String,
}

/// Assemble the encoder input for turn `t`.
///
/// With `oracle` set, the D/DB/A/R blocks of previous turns come from the
/// gold annotations (training mode); otherwise they come from `generated`
/// (inference mode), which must cover every previous turn — and, for
/// [`ContextKind::ForResponse`], the current turn's DB token.
pub fn build_context(
    session: &DialogSession,
    t: usize,
    kind: ContextKind,
    oracle: bool,
    generated: Option<&GeneratedBlocks>,
) -> Result<ContextSequence> {
    if t >= session.turns.len() {
        return Err(Error::InvalidArgument(format!(
            "turn index {t} out of range for session {} with {} turns",
            session.session_id,
            session.turns.len()
        )));
    }
    let generated = match (oracle, generated) {
        (true, _) => None,
        (false, Some(g)) => {
            let needed = if kind == ContextKind::ForResponse { t + 1 } else { t };
            if g.turns.len() < needed {
                return Err(Error::InvalidArgument(format!(
                    "generated blocks cover {} turns but turn {t} needs {needed}",
                    g.turns.len()
                )));
            }
            Some(g)
        }
        (false, None) => {
            return Err(Error::InvalidArgument(
                "non-oracle context requested without generated blocks".into(),
            ))
        }
    };

    let mut tokens: Vec<String> = Vec::new();
    for u in 0..t {
        let turn = &session.turns[u];
        tokens.extend(tokenize(&turn.user_utterance));
        match generated {
            None => {
                tokens.extend(tokenize(&turn.dialog_state.linearize()));
                tokens.push(turn.db_bucket().token());
                tokens.extend(tokenize(&turn.action_state.linearize()));
                tokens.extend(tokenize(&turn.response));
            }
            Some(g) => {
                let gen = &g.turns[u];
                tokens.extend(tokenize(&gen.state));
                tokens.push(gen.db_token.clone());
                tokens.extend(tokenize(&gen.acts));
                tokens.extend(tokenize(&gen.response));
            }
        }
    }
    tokens.extend(tokenize(&session.turns[t].user_utterance));
    if kind == ContextKind::ForResponse {
        let db_token = match generated {
            None => session.turns[t].db_bucket().token(),
            Some(g) => g.turns[t].db_token.clone(),
        };
        tokens.push(db_token);
    }
    Ok(ContextSequence { tokens, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::synth::sample_session;

    #[test]
    fn turn_zero_state_context_is_user_only() {
        let session = sample_session();
        let ctx = build_context(&session, 0, ContextKind::ForState, true, None).unwrap();
        assert_eq!(ctx.tokens, tokenize(&session.turns[0].user_utterance));
    }

    #[test]
    fn turn_one_oracle_context_has_full_block_order() {
        let session = sample_session();
        let ctx = build_context(&session, 1, ContextKind::ForState, true, None).unwrap();
        let t0 = &session.turns[0];
        let mut expect = tokenize(&t0.user_utterance);
        expect.extend(tokenize(&t0.dialog_state.linearize()));
        expect.push(t0.db_bucket().token());
        expect.extend(tokenize(&t0.action_state.linearize()));
        expect.extend(tokenize(&t0.response));
        expect.extend(tokenize(&session.turns[1].user_utterance));
        assert_eq!(ctx.tokens, expect);
    }

    #[test]
    fn response_context_appends_db_token() {
        let session = sample_session();
        let state_ctx = build_context(&session, 1, ContextKind::ForState, true, None).unwrap();
        let resp_ctx = build_context(&session, 1, ContextKind::ForResponse, true, None).unwrap();
        let mut expect = state_ctx.tokens.clone();
        expect.push(session.turns[1].db_bucket().token());
        assert_eq!(resp_ctx.tokens, expect);
    }

    #[test]
    fn state_context_is_prefix_of_next_turn() {
        let session = sample_session();
        for t in 1..session.turns.len() {
            let prev = build_context(&session, t - 1, ContextKind::ForState, true, None).unwrap();
            let curr = build_context(&session, t, ContextKind::ForState, true, None).unwrap();
            assert!(curr.tokens.starts_with(&prev.tokens));
        }
    }

    #[test]
    fn non_oracle_without_blocks_is_error() {
        let session = sample_session();
        assert!(build_context(&session, 1, ContextKind::ForState, false, None).is_err());
    }

    #[test]
    fn non_oracle_uses_generated_blocks() {
        let session = sample_session();
        let blocks = GeneratedBlocks {
            turns: vec![GeneratedTurn {
                state: "[attraction] type museum".into(),
                db_token: "[db_3]".into(),
                acts: "[attraction] [inform] name".into(),
                response: "how about [value_name] ?".into(),
            }],
        };
        let ctx =
            build_context(&session, 1, ContextKind::ForState, false, Some(&blocks)).unwrap();
        let mut expect = tokenize(&session.turns[0].user_utterance);
        expect.extend(tokenize("[attraction] type museum"));
        expect.push("[db_3]".into());
        expect.extend(tokenize("[attraction] [inform] name"));
        expect.extend(tokenize("how about [value_name] ?"));
        expect.extend(tokenize(&session.turns[1].user_utterance));
        assert_eq!(ctx.tokens, expect);
        // The response-task context for turn 1 additionally needs the current
        // generated DB token.
        assert!(
            build_context(&session, 1, ContextKind::ForResponse, false, Some(&blocks)).is_err()
        );
    }
}
