//! Entity database lookup and DB-state bucketing.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::DialogState;
use crate::schema::Schema;
use crate::{Error, Result};

pub type Entity = IndexMap<String, String>;

/// Per-domain entity lists. File format is line-delimited JSON, one domain
/// per line: `{"domain": "...", "entities": [{"slot": "value"}, ...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityDb {
    domains: IndexMap<String, Vec<Entity>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DbLine {
    domain: String,
    entities: Vec<Entity>,
}

impl EntityDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_domain(&mut self, domain: &str, entities: Vec<Entity>) {
        self.domains.insert(domain.to_string(), entities);
    }

    pub fn entities(&self, domain: &str) -> Option<&[Entity]> {
        self.domains.get(domain).map(|v| v.as_slice())
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.domains.keys().map(|s| s.as_str())
    }

    pub fn load(path: impl AsRef<Path>, schema: &Schema) -> Result<EntityDb> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut db = EntityDb::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: DbLine = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.display().to_string(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
            let def = schema
                .domain(&parsed.domain)
                .ok_or_else(|| Error::UnknownDomain(parsed.domain.clone()))?;
            for entity in &parsed.entities {
                for slot in entity.keys() {
                    if !def.slots.iter().any(|s| s == slot) {
                        return Err(Error::MalformedLine {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            detail: format!(
                                "entity slot '{slot}' not declared for domain [{}]",
                                parsed.domain
                            ),
                        });
                    }
                }
            }
            db.domains.insert(parsed.domain, parsed.entities);
        }
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (domain, entities) in &self.domains {
            let line = DbLine {
                domain: domain.clone(),
                entities: entities.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("db line serializes"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Count entities in `domain` matching every constraint of `state[domain]`.
/// Matching is string equality after lowercasing and trimming; an entity
/// missing a constrained slot fails that constraint. An absent domain block
/// means no constraints, so the whole domain matches.
pub fn query(db: &EntityDb, state: &DialogState, domain: &str) -> Result<usize> {
    let empty = IndexMap::new();
    let constraints = state.slots(domain).unwrap_or(&empty);
    query_constraints(db, domain, constraints.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

/// Count entities in `domain` matching every `(slot, value)` constraint.
pub fn query_constraints<'a>(
    db: &EntityDb,
    domain: &str,
    constraints: impl Iterator<Item = (&'a str, &'a str)>,
) -> Result<usize> {
    let entities = db
        .entities(domain)
        .ok_or_else(|| Error::UnknownDomain(domain.to_string()))?;
    let constraints: Vec<(String, String)> = constraints
        .map(|(k, v)| (k.to_string(), norm(v)))
        .collect();
    Ok(entities
        .iter()
        .filter(|entity| {
            constraints.iter().all(|(slot, want)| {
                entity
                    .get(slot)
                    .map(|have| norm(have) == *want)
                    .unwrap_or(false)
            })
        })
        .count())
}

fn norm(value: &str) -> String {
    value.trim().to_lowercase()
}

/// DB state bucket: matched-entity counts collapse to four tokens
/// `[db_0]`..`[db_3]` with boundaries {0}, {1}, {2-3}, {>=4}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbBucket(u8);

impl DbBucket {
    pub fn from_count(count: usize) -> DbBucket {
        DbBucket(match count {
            0 => 0,
            1 => 1,
            2..=3 => 2,
            _ => 3,
        })
    }

    pub fn bucket(&self) -> u8 {
        self.0
    }

    pub fn token(&self) -> String {
        format!("[db_{}]", self.0)
    }

    /// All bucket tokens, used when building vocabularies.
    pub fn all_tokens() -> Vec<String> {
        (0..4).map(|b| DbBucket(b).token()).collect()
    }
}

/// The domain whose entities DB_t should count: the last domain (in state
/// order) whose constraints changed relative to the previous turn's state,
/// falling back to the last domain present, then to the schema's first
/// domain carried by the state.
pub fn active_domain(
    prev: &DialogState,
    curr: &DialogState,
    _schema: &Schema,
) -> Option<String> {
    let mut last_changed: Option<&str> = None;
    for (domain, slots) in curr.iter() {
        let changed = match prev.slots(domain) {
            None => true,
            Some(prev_slots) => prev_slots != slots,
        };
        if changed {
            last_changed = Some(domain);
        }
    }
    last_changed
        .or_else(|| curr.iter().last().map(|(d, _)| d))
        .map(|d| d.to_string())
}
