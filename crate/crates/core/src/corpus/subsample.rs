//! Low-resource subsampling: seeded uniform selection without replacement.
//!
//! Presets map to the fixed dialog counts of the low-resource protocol
//! (5% -> 400, 10% -> 800, 20% -> 1600, 50% -> 4000) rather than exact
//! percentage arithmetic; generic fractions select floor(f * n) sessions.

use sha2::{Digest, Sha256};

use super::DialogSession;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubsampleSpec {
    /// One of the protocol presets: 5, 10, 20, or 50 (percent).
    Preset(u8),
    /// An arbitrary fraction in (0, 1].
    Fraction(f64),
}

impl SubsampleSpec {
    pub fn parse(text: &str) -> Result<SubsampleSpec> {
        let trimmed = text.trim().trim_end_matches('%');
        if let Ok(p) = trimmed.parse::<u8>() {
            if matches!(p, 5 | 10 | 20 | 50) {
                return Ok(SubsampleSpec::Preset(p));
            }
        }
        let f: f64 = trimmed
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("unrecognized subsample spec '{text}'")))?;
        if f > 0.0 && f <= 1.0 {
            Ok(SubsampleSpec::Fraction(f))
        } else {
            Err(Error::InvalidArgument(format!(
                "fraction {f} outside (0, 1]"
            )))
        }
    }

    fn preset_count(percent: u8) -> usize {
        match percent {
            5 => 400,
            10 => 800,
            20 => 1600,
            50 => 4000,
            _ => unreachable!("validated at construction"),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SubsampleSpec::Preset(p) => format!("{p}%"),
            SubsampleSpec::Fraction(f) => format!("{f}"),
        }
    }
}

/// Select sessions uniformly without replacement, deterministically for a
/// fixed seed, returned in original corpus order.
///
/// Selection ranks sessions by a seeded hash of their id, so re-running the
/// same spec and seed on its own output is a no-op whenever the target count
/// is already met (presets and fraction 1.0).
pub fn subsample(
    sessions: &[DialogSession],
    spec: SubsampleSpec,
    seed: u64,
) -> Result<Vec<DialogSession>> {
    let n = sessions.len();
    let count = match spec {
        SubsampleSpec::Preset(p) => {
            let count = SubsampleSpec::preset_count(p);
            if count > n {
                return Err(Error::InvalidArgument(format!(
                    "preset {p}% needs {count} sessions but the corpus has {n}"
                )));
            }
            count
        }
        SubsampleSpec::Fraction(f) => {
            if !(0.0..=1.0).contains(&f) || f <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "fraction {f} outside (0, 1]"
                )));
            }
            ((f * n as f64).floor() as usize).min(n)
        }
    };
    let mut ranked: Vec<(u64, usize)> = sessions
        .iter()
        .enumerate()
        .map(|(i, s)| (id_rank(seed, &s.session_id), i))
        .collect();
    ranked.sort_unstable();
    let mut keep: Vec<usize> = ranked.into_iter().take(count).map(|(_, i)| i).collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| sessions[i].clone()).collect())
}

fn id_rank(seed: u64, session_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(session_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_sessions;

    #[test]
    fn fraction_one_is_identity() {
        let sessions = generate_sessions(11, 12, "s");
        let out = subsample(&sessions, SubsampleSpec::Fraction(1.0), 99).unwrap();
        assert_eq!(out, sessions);
    }

    #[test]
    fn same_seed_same_ids() {
        let sessions = generate_sessions(7, 30, "s");
        let a = subsample(&sessions, SubsampleSpec::Fraction(0.5), 7).unwrap();
        let b = subsample(&sessions, SubsampleSpec::Fraction(0.5), 7).unwrap();
        assert_eq!(a, b);
        let c = subsample(&sessions, SubsampleSpec::Fraction(0.5), 8).unwrap();
        assert_ne!(
            a.iter().map(|s| &s.session_id).collect::<Vec<_>>(),
            c.iter().map(|s| &s.session_id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn fraction_uses_floor() {
        let sessions = generate_sessions(3, 10, "s");
        let out = subsample(&sessions, SubsampleSpec::Fraction(0.55), 1).unwrap();
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn preset_exceeding_corpus_errors() {
        let sessions = generate_sessions(3, 10, "s");
        assert!(subsample(&sessions, SubsampleSpec::Preset(5), 1).is_err());
    }

    #[test]
    fn preset_reapplication_is_idempotent() {
        let sessions = generate_sessions(5, 420, "s");
        let once = subsample(&sessions, SubsampleSpec::Preset(5), 3).unwrap();
        assert_eq!(once.len(), 400);
        let twice = subsample(&once, SubsampleSpec::Preset(5), 3).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(SubsampleSpec::parse("5%").unwrap(), SubsampleSpec::Preset(5));
        assert_eq!(SubsampleSpec::parse("50").unwrap(), SubsampleSpec::Preset(50));
        assert_eq!(
            SubsampleSpec::parse("0.25").unwrap(),
            SubsampleSpec::Fraction(0.25)
        );
        assert!(SubsampleSpec::parse("1.5").is_err());
        assert!(SubsampleSpec::parse("nope").is_err());
    }
}
