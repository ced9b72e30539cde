//! Dialog schema: the closed world of domains, slots, dialog acts, and
//! response placeholders a corpus is validated against.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One domain and the slots it may carry (both as constraints in dialog
/// states and as slot names in action states).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDef {
    pub name: String,
    pub slots: Vec<String>,
}

/// Declares every token family the corpus may use. Domain order is
/// significant: it is the tie-break order for active-domain selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub domains: Vec<DomainDef>,
    pub acts: Vec<String>,
    /// Slot names allowed as `[value_<slot>]` placeholders in responses.
    pub placeholders: Vec<String>,
}

impl Schema {
    pub fn load(path: impl AsRef<Path>) -> Result<Schema> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let schema: Schema = serde_json::from_str(&text).map_err(|e| Error::MalformedLine {
            path: path.display().to_string(),
            line: e.line(),
            detail: e.to_string(),
        })?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("schema serializes");
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::InvalidArgument("schema declares no domains".into()));
        }
        for dom in &self.domains {
            if dom.name.is_empty() {
                return Err(Error::InvalidArgument("empty domain name in schema".into()));
            }
        }
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Option<&DomainDef> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn is_domain(&self, name: &str) -> bool {
        self.domain(name).is_some()
    }

    pub fn is_act(&self, name: &str) -> bool {
        self.acts.iter().any(|a| a == name)
    }

    /// Position of a domain in schema order; used as a deterministic tie-break.
    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn is_domain_slot(&self, domain: &str, slot: &str) -> bool {
        self.domain(domain)
            .map(|d| d.slots.iter().any(|s| s == slot))
            .unwrap_or(false)
    }

    pub fn is_placeholder(&self, slot: &str) -> bool {
        self.placeholders.iter().any(|p| p == slot)
    }

    /// All bracket tokens the schema can produce, in deterministic order.
    /// Used when building tokenizer vocabularies.
    pub fn bracket_tokens(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for d in &self.domains {
            out.push(bracket(&d.name));
        }
        for a in &self.acts {
            out.push(bracket(a));
        }
        for p in &self.placeholders {
            out.push(bracket(&format!("value_{p}")));
        }
        out
    }
}

/// Wraps a name in square brackets: `area` -> `[area]`.
pub fn bracket(name: &str) -> String {
    format!("[{name}]")
}

/// Strips one pair of square brackets: `[area]` -> `Some("area")`.
pub fn unbracket(token: &str) -> Option<&str> {
    token.strip_prefix('[').and_then(|t| t.strip_suffix(']'))
}

/// Placeholder slot name of a `[value_*]` token: `[value_name]` -> `Some("name")`.
pub fn placeholder_slot(token: &str) -> Option<&str> {
    unbracket(token).and_then(|t| t.strip_prefix("value_"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Schema {
        Schema {
            domains: vec![
                DomainDef {
                    name: "attraction".into(),
                    slots: vec!["type".into(), "area".into()],
                },
                DomainDef {
                    name: "general".into(),
                    slots: vec![],
                },
            ],
            acts: vec!["inform".into(), "reqmore".into()],
            placeholders: vec!["name".into()],
        }
    }

    #[test]
    fn bracket_round_trip() {
        assert_eq!(bracket("attraction"), "[attraction]");
        assert_eq!(unbracket("[attraction]"), Some("attraction"));
        assert_eq!(unbracket("attraction"), None);
        assert_eq!(placeholder_slot("[value_name]"), Some("name"));
        assert_eq!(placeholder_slot("[inform]"), None);
    }

    #[test]
    fn lookups() {
        let s = tiny();
        assert!(s.is_domain("attraction"));
        assert!(!s.is_domain("spaceport"));
        assert!(s.is_act("inform"));
        assert!(s.is_domain_slot("attraction", "area"));
        assert!(!s.is_domain_slot("general", "area"));
        assert_eq!(s.domain_index("general"), Some(1));
    }

    #[test]
    fn save_load_round_trip() {
        let s = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schema.json");
        s.save(&path).unwrap();
        let loaded = Schema::load(&path).unwrap();
        assert_eq!(s, loaded);
    }
}
