//! Corpus ingestion: sessions, turns, goals, validation, context assembly,
//! and subsampling.
//!
//! The on-disk corpus format is line-delimited JSON, one session per line:
//!
//! ```text
//! {"session_id": "...",
//!  "goal": {"<domain>": {"informable": {"slot": "value"}, "requestable": ["slot"]}},
//!  "turns": [{"user": "...", "state": {"<domain>": {"slot": "value"}},
//!             "db": <matched entity count>, "acts": [["domain","act",["slot"]]],
//!             "response": "... [value_slot] ..."}]}
//! ```

mod context;
mod state;
mod subsample;

pub use context::{build_context, ContextKind, ContextSequence, GeneratedBlocks, GeneratedTurn};
pub use state::{ActTriple, ActionState, DialogState, ParseWarning};
pub use subsample::{subsample, SubsampleSpec};

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dbkit::DbBucket;
use crate::schema::{placeholder_slot, unbracket, Schema};
use crate::{Error, Result};

/// Per-domain user goal: hard constraints plus the slots the user will ask for.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    #[serde(default)]
    pub informable: IndexMap<String, String>,
    #[serde(default)]
    pub requestable: Vec<String>,
}

/// Whole-session goal, keyed by domain in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Goal {
    pub domains: IndexMap<String, DomainGoal>,
}

/// One user/system exchange with its gold annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogTurn {
    pub turn_index: usize,
    /// User utterance for this turn (lowercase, whitespace-tokenizable).
    #[serde(rename = "user")]
    pub user_utterance: String,
    /// Cumulative dialog state after this user turn.
    #[serde(rename = "state")]
    pub dialog_state: DialogState,
    /// Matched-entity count for the active domain under the gold state.
    #[serde(rename = "db")]
    pub db_count: usize,
    #[serde(rename = "acts")]
    pub action_state: ActionState,
    /// Delexicalized system response with `[value_*]` placeholders.
    pub response: String,
}

impl DialogTurn {
    pub fn db_bucket(&self) -> DbBucket {
        DbBucket::from_count(self.db_count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogSession {
    pub session_id: String,
    pub goal: Goal,
    pub turns: Vec<DialogTurn>,
}

impl DialogSession {
    /// Validate every type invariant against a schema. `turn_index` is
    /// reported for turn-level violations.
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.turns.is_empty() {
            return Err(Error::violation(
                &self.session_id,
                None,
                "turns",
                "session has no turns",
            ));
        }
        for (domain, goal) in &self.goal.domains {
            let def = schema.domain(domain).ok_or_else(|| {
                Error::violation(
                    &self.session_id,
                    None,
                    "goal",
                    format!("unknown domain [{domain}]"),
                )
            })?;
            for slot in goal.informable.keys().chain(goal.requestable.iter()) {
                if !def.slots.iter().any(|s| s == slot) {
                    return Err(Error::violation(
                        &self.session_id,
                        None,
                        "goal",
                        format!("unknown slot '{slot}' for domain [{domain}]"),
                    ));
                }
            }
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.turn_index != i {
                return Err(Error::violation(
                    &self.session_id,
                    Some(i),
                    "turn_index",
                    format!("expected {i}, found {}", turn.turn_index),
                ));
            }
            for (domain, slots) in turn.dialog_state.iter() {
                if !schema.is_domain(domain) {
                    return Err(Error::violation(
                        &self.session_id,
                        Some(i),
                        "state",
                        format!("unknown domain [{domain}]"),
                    ));
                }
                for slot in slots.keys() {
                    if !schema.is_domain_slot(domain, slot) {
                        return Err(Error::violation(
                            &self.session_id,
                            Some(i),
                            "state",
                            format!("unknown slot '{slot}' for domain [{domain}]"),
                        ));
                    }
                }
            }
            for act in turn.action_state.acts() {
                if !schema.is_domain(&act.domain) {
                    return Err(Error::violation(
                        &self.session_id,
                        Some(i),
                        "acts",
                        format!("unknown domain [{}]", act.domain),
                    ));
                }
                if !schema.is_act(&act.act) {
                    return Err(Error::violation(
                        &self.session_id,
                        Some(i),
                        "acts",
                        format!("unknown act [{}]", act.act),
                    ));
                }
            }
            for token in turn.response.split_whitespace() {
                if let Some(name) = unbracket(token) {
                    match placeholder_slot(token) {
                        Some(slot) if schema.is_placeholder(slot) => {}
                        _ => {
                            return Err(Error::violation(
                                &self.session_id,
                                Some(i),
                                "response",
                                format!("token [{name}] is not a declared placeholder"),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Load and validate a line-delimited session file. Sessions come back in
/// file order; session ids must be unique.
pub fn load_corpus(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<DialogSession>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut sessions = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let session: DialogSession =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.display().to_string(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
        session.validate(schema)?;
        if !seen_ids.insert(session.session_id.clone()) {
            return Err(Error::violation(
                &session.session_id,
                None,
                "session_id",
                "duplicate session id",
            ));
        }
        sessions.push(session);
    }
    Ok(sessions)
}

/// Write sessions in the line-delimited corpus format.
pub fn save_corpus(path: impl AsRef<Path>, sessions: &[DialogSession]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for session in sessions {
        out.push_str(&serde_json::to_string(session).expect("session serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Whitespace tokenization used throughout the pipeline.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_string()).collect()
}
