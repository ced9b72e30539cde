//! Whitespace-level tokenizer with a deterministic vocabulary.
//!
//! Special tokens occupy fixed low ids, followed by the DB bucket tokens,
//! the schema's bracket tokens, and finally every word observed in the
//! provided corpora and database values, sorted lexicographically.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::DialogSession;
use crate::dbkit::{DbBucket, EntityDb};
use crate::schema::Schema;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
/// Decoder start-of-sequence token, shared by both decoders.
pub const DECODER_START: &str = "<s>";
pub const EOS_STATE: &str = "<eos_state>";
pub const BOS_ACT: &str = "<bos_act>";
pub const EOS_ACT: &str = "<eos_act>";
pub const BOS_RESP: &str = "<bos_resp>";
pub const EOS_RESP: &str = "<eos_resp>";

const SPECIALS: [&str; 8] = [
    PAD,
    UNK,
    DECODER_START,
    EOS_STATE,
    BOS_ACT,
    EOS_ACT,
    BOS_RESP,
    EOS_RESP,
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tokenizer {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl PartialEq for Tokenizer {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Tokenizer {
    /// Build a vocabulary covering the schema, the database values, and the
    /// given corpora. Deterministic for identical inputs.
    pub fn build<'a>(
        schema: &Schema,
        db: &EntityDb,
        corpora: impl IntoIterator<Item = &'a [DialogSession]>,
    ) -> Tokenizer {
        let mut words: BTreeSet<String> = BTreeSet::new();
        for domain in db.domains() {
            for entity in db.entities(domain).unwrap_or(&[]) {
                for (slot, value) in entity {
                    words.insert(slot.clone());
                    for w in value.split_whitespace() {
                        words.insert(w.to_string());
                    }
                }
            }
        }
        for sessions in corpora {
            for session in sessions {
                for turn in &session.turns {
                    for text in [
                        turn.user_utterance.as_str(),
                        turn.response.as_str(),
                    ] {
                        for w in text.split_whitespace() {
                            words.insert(w.to_string());
                        }
                    }
                    for (domain, slots) in turn.dialog_state.iter() {
                        words.insert(domain.to_string());
                        for (slot, value) in slots {
                            words.insert(slot.clone());
                            for w in value.split_whitespace() {
                                words.insert(w.to_string());
                            }
                        }
                    }
                    for act in turn.action_state.acts() {
                        for slot in &act.slots {
                            words.insert(slot.clone());
                        }
                    }
                }
            }
        }
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(DbBucket::all_tokens());
        for t in schema.bracket_tokens() {
            if !tokens.contains(&t) {
                tokens.push(t);
            }
        }
        for w in words {
            if !tokens.contains(&w) {
                tokens.push(w);
            }
        }
        Tokenizer::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Tokenizer {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Tokenizer { tokens, index }
    }

    /// Rebuild the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index
            .get(token)
            .copied()
            .unwrap_or(self.index[UNK])
    }

    pub fn pad_id(&self) -> u32 {
        self.index[PAD]
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(UNK)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn encode_str(&self, text: &str) -> Vec<u32> {
        text.split_whitespace().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    pub fn decode_str(&self, ids: &[u32]) -> String {
        self.decode(ids).join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{fixture_db, fixture_schema, sample_session};

    fn tok() -> Tokenizer {
        let sessions = vec![sample_session()];
        Tokenizer::build(&fixture_schema(), &fixture_db(), [sessions.as_slice()])
    }

    #[test]
    fn specials_have_fixed_ids() {
        let t = tok();
        assert_eq!(t.id(PAD), 0);
        assert_eq!(t.id(UNK), 1);
        assert_eq!(t.id(DECODER_START), 2);
        assert_eq!(t.id("[db_0]"), 8);
        assert_eq!(t.id("[db_3]"), 11);
    }

    #[test]
    fn round_trip_known_tokens() {
        let t = tok();
        let ids = t.encode_str("[attraction] type theatre");
        assert_eq!(t.decode_str(&ids), "[attraction] type theatre");
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let t = tok();
        let ids = t.encode_str("zyzzyva");
        assert_eq!(ids, vec![t.id(UNK)]);
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(tok(), tok());
    }
}
