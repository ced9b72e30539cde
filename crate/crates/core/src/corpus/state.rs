//! Dialog-state and action-state structures with their linearization grammar.
//!
//! Dialog states render as `[domain] slot value ...` and action states as
//! `[domain] [act] slot ...`. Parsing is total: model output can be arbitrary
//! token soup, so the parsers never fail — they return a best-effort structure
//! plus a warning list.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::schema::{bracket, unbracket, Schema};

/// Structured dialog state: ordered map domain -> slot -> value.
///
/// Invariant: no empty domain blocks (the only way to add a domain is to add
/// a slot under it).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogState {
    constraints: IndexMap<String, IndexMap<String, String>>,
}

impl DialogState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, domain: &str, slot: &str, value: &str) {
        self.constraints
            .entry(domain.to_string())
            .or_default()
            .insert(slot.to_string(), value.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.constraints.keys().map(|s| s.as_str())
    }

    pub fn slots(&self, domain: &str) -> Option<&IndexMap<String, String>> {
        self.constraints.get(domain)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &IndexMap<String, String>)> {
        self.constraints.iter().map(|(d, m)| (d.as_str(), m))
    }

    /// `[domain] slot value ...` blocks in insertion order, lowercase.
    pub fn linearize(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for (domain, slots) in &self.constraints {
            parts.push(bracket(&domain.to_lowercase()));
            for (slot, value) in slots {
                parts.push(slot.to_lowercase());
                parts.extend(value.split_whitespace().map(|t| t.to_lowercase()));
            }
        }
        parts.join(" ")
    }

    /// Best-effort inverse of [`DialogState::linearize`]. A value runs until
    /// the next known slot name of the current domain or the next bracket
    /// token. Degraded input produces warnings, never errors.
    pub fn parse(schema: &Schema, text: &str) -> (DialogState, Vec<ParseWarning>) {
        let mut state = DialogState::new();
        let mut warnings = Vec::new();
        let mut domain: Option<String> = None;
        let mut open_slot: Option<(String, Vec<String>)> = None;
        let mut dropped_prefix = 0usize;

        let commit =
            |state: &mut DialogState, domain: &str, slot: Option<(String, Vec<String>)>, warnings: &mut Vec<ParseWarning>| {
                if let Some((slot, value)) = slot {
                    if value.is_empty() {
                        warnings.push(ParseWarning::MissingValue {
                            domain: domain.to_string(),
                            slot,
                        });
                    } else {
                        if state
                            .constraints
                            .get(domain)
                            .map(|m| m.contains_key(&slot))
                            .unwrap_or(false)
                        {
                            warnings.push(ParseWarning::DuplicateSlot {
                                domain: domain.to_string(),
                                slot: slot.clone(),
                            });
                        }
                        state.insert(domain, &slot, &value.join(" "));
                    }
                }
            };

        for token in text.split_whitespace() {
            if let Some(name) = unbracket(token) {
                if let Some(d) = &domain {
                    commit(&mut state, d, open_slot.take(), &mut warnings);
                }
                if schema.is_domain(name) {
                    if state.constraints.contains_key(name)
                        || domain.as_deref() == Some(name)
                    {
                        warnings.push(ParseWarning::DuplicateDomain(name.to_string()));
                    }
                    domain = Some(name.to_string());
                } else {
                    warnings.push(ParseWarning::UnknownBracket(token.to_string()));
                }
                continue;
            }
            match &domain {
                None => dropped_prefix += 1,
                Some(d) => {
                    if schema.is_domain_slot(d, token) {
                        commit(&mut state, d, open_slot.take(), &mut warnings);
                        open_slot = Some((token.to_string(), Vec::new()));
                    } else if let Some((_, value)) = &mut open_slot {
                        value.push(token.to_string());
                    } else {
                        warnings.push(ParseWarning::UnexpectedToken(token.to_string()));
                    }
                }
            }
        }
        if let Some(d) = &domain {
            commit(&mut state, d, open_slot.take(), &mut warnings);
        }
        if dropped_prefix > 0 {
            warnings.push(ParseWarning::DroppedPrefix(dropped_prefix));
        }
        (state, warnings)
    }
}

/// One dialog act: `(domain, act, slot names)`; the slot list may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActTriple {
    pub domain: String,
    pub act: String,
    pub slots: Vec<String>,
}

/// Structured action state: ordered act triples.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionState {
    acts: Vec<ActTriple>,
}

impl ActionState {
    pub fn new(acts: Vec<ActTriple>) -> Self {
        Self { acts }
    }

    pub fn push(&mut self, domain: &str, act: &str, slots: &[&str]) {
        self.acts.push(ActTriple {
            domain: domain.to_string(),
            act: act.to_string(),
            slots: slots.iter().map(|s| s.to_string()).collect(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }

    pub fn acts(&self) -> &[ActTriple] {
        &self.acts
    }

    /// `[domain] [act] slot ...`; the domain token is emitted once per run of
    /// consecutive acts sharing a domain.
    pub fn linearize(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        let mut prev_domain: Option<&str> = None;
        for act in &self.acts {
            if prev_domain != Some(act.domain.as_str()) {
                parts.push(bracket(&act.domain.to_lowercase()));
                prev_domain = Some(act.domain.as_str());
            }
            parts.push(bracket(&act.act.to_lowercase()));
            parts.extend(act.slots.iter().map(|s| s.to_lowercase()));
        }
        parts.join(" ")
    }

    /// Best-effort inverse of [`ActionState::linearize`]. Bracket tokens are
    /// classified by the schema (domain vs act); bare tokens are slot names
    /// of the currently open act.
    pub fn parse(schema: &Schema, text: &str) -> (ActionState, Vec<ParseWarning>) {
        let mut acts: Vec<ActTriple> = Vec::new();
        let mut domain: Option<String> = None;
        let mut warnings = Vec::new();
        for token in text.split_whitespace() {
            if let Some(name) = unbracket(token) {
                if schema.is_domain(name) {
                    domain = Some(name.to_string());
                } else if schema.is_act(name) {
                    match &domain {
                        Some(d) => acts.push(ActTriple {
                            domain: d.clone(),
                            act: name.to_string(),
                            slots: Vec::new(),
                        }),
                        None => warnings.push(ParseWarning::ActWithoutDomain(name.to_string())),
                    }
                } else {
                    warnings.push(ParseWarning::UnknownBracket(token.to_string()));
                }
            } else {
                match acts.last_mut() {
                    Some(act) => act.slots.push(token.to_string()),
                    None => warnings.push(ParseWarning::UnexpectedToken(token.to_string())),
                }
            }
        }
        (ActionState { acts }, warnings)
    }
}

/// Non-fatal findings from degraded parsing of generated text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// Tokens before the first `[domain]` were dropped (count).
    DroppedPrefix(usize),
    /// A `[domain]` block reopened an already-seen domain.
    DuplicateDomain(String),
    /// A slot was assigned twice within one domain; last value wins.
    DuplicateSlot { domain: String, slot: String },
    /// A slot name appeared with no following value tokens.
    MissingValue { domain: String, slot: String },
    /// A bracket token that is neither a schema domain nor act.
    UnknownBracket(String),
    /// A bare token with nowhere to attach.
    UnexpectedToken(String),
    /// An `[act]` token before any `[domain]`.
    ActWithoutDomain(String),
}
