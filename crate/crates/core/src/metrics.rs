//! Evaluation metrics: inform/success rates, corpus BLEU, combined score,
//! joint goal accuracy, act F1, turn-bucket breakdowns, and a heuristic
//! error taxonomy.
//!
//! Inform/success use a self-contained definition: a goal domain counts as
//! informed when some turn's response offers an entity (`[value_name]` or
//! `[value_id]`) while the same turn's generated state, merged with the goal
//! constraints and queried against the database, still matches at least one
//! entity. Success additionally requires every requested slot to appear as a
//! `[value_*]` placeholder somewhere in the session's responses.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{ActionState, DialogSession, DialogState};
use crate::dbkit::{query_constraints, EntityDb};
use crate::schema::{placeholder_slot, Schema};
use crate::{Error, Result};

/// One rollout record: everything the model generated for a turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredTurn {
    pub session_id: String,
    pub turn_index: usize,
    /// Linearized generated dialog state.
    pub state: String,
    /// DB token obtained by re-querying with the generated state.
    pub db: String,
    /// Linearized generated action state.
    pub acts: String,
    /// Generated delexicalized response.
    pub response: String,
}

pub fn save_predictions(path: impl AsRef<Path>, preds: &[PredTurn]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in preds {
        out.push_str(&serde_json::to_string(p).expect("prediction serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredTurn>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.display().to_string(),
                line: lineno + 1,
                detail: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// Predictions grouped per gold session, turn-aligned.
struct Paired<'a> {
    session: &'a DialogSession,
    turns: Vec<&'a PredTurn>,
}

fn pair_sessions<'a>(
    preds: &'a [PredTurn],
    gold: &'a [DialogSession],
) -> Result<Vec<Paired<'a>>> {
    let mut by_session: IndexMap<&str, Vec<&PredTurn>> = IndexMap::new();
    for p in preds {
        by_session.entry(p.session_id.as_str()).or_default().push(p);
    }
    for turns in by_session.values_mut() {
        turns.sort_by_key(|t| t.turn_index);
    }
    let mut out = Vec::new();
    for session in gold {
        let turns = by_session
            .shift_remove(session.session_id.as_str())
            .ok_or_else(|| {
                Error::NotFound(format!("no predictions for session {}", session.session_id))
            })?;
        if turns.len() != session.turns.len() {
            return Err(Error::InvalidArgument(format!(
                "session {} has {} predicted turns but {} gold turns",
                session.session_id,
                turns.len(),
                session.turns.len()
            )));
        }
        out.push(Paired { session, turns });
    }
    if let Some((id, _)) = by_session.first() {
        return Err(Error::NotFound(format!(
            "predicted session {id} has no gold session (goal required)"
        )));
    }
    Ok(out)
}

fn placeholders_of(text: &str) -> HashSet<String> {
    text.split_whitespace()
        .filter_map(placeholder_slot)
        .map(|s| s.to_string())
        .collect()
}

fn session_inform_success(
    paired: &Paired,
    db: &EntityDb,
    schema: &Schema,
) -> Result<(bool, bool)> {
    let goal = &paired.session.goal;
    let mut inform = true;
    for (domain, dgoal) in &goal.domains {
        if dgoal.informable.is_empty() {
            continue;
        }
        let mut offered = false;
        for pred in &paired.turns {
            let slots = placeholders_of(&pred.response);
            if !slots.contains("name") && !slots.contains("id") {
                continue;
            }
            let (state, _) = DialogState::parse(schema, &pred.state);
            let empty = IndexMap::new();
            let state_constraints = state.slots(domain).unwrap_or(&empty);
            let merged = state_constraints
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .chain(
                    dgoal
                        .informable
                        .iter()
                        .map(|(k, v)| (k.as_str(), v.as_str())),
                );
            if query_constraints(db, domain, merged)? >= 1 {
                offered = true;
                break;
            }
        }
        if !offered {
            inform = false;
            break;
        }
    }
    let mut success = inform;
    if success {
        let mut provided: HashSet<String> = HashSet::new();
        for pred in &paired.turns {
            provided.extend(placeholders_of(&pred.response));
        }
        'outer: for dgoal in goal.domains.values() {
            for requested in &dgoal.requestable {
                if !provided.contains(requested) {
                    success = false;
                    break 'outer;
                }
            }
        }
    }
    Ok((inform, success))
}

/// Session-level inform and success rates in percent.
pub fn inform_success(
    preds: &[PredTurn],
    gold: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
) -> Result<(f64, f64)> {
    let paired = pair_sessions(preds, gold)?;
    if paired.is_empty() {
        return Err(Error::InvalidArgument("no sessions to evaluate".into()));
    }
    let mut informed = 0usize;
    let mut succeeded = 0usize;
    for p in &paired {
        let (i, s) = session_inform_success(p, db, schema)?;
        informed += i as usize;
        succeeded += s as usize;
    }
    let n = paired.len() as f64;
    Ok((100.0 * informed as f64 / n, 100.0 * succeeded as f64 / n))
}

const BLEU_EPS: f64 = 1e-9;

/// Corpus-level 4-gram BLEU with brevity penalty, scaled to [0, 100].
/// Zero n-gram matches smooth to epsilon.
pub fn bleu(hypotheses: &[Vec<String>], references: &[Vec<String>]) -> Result<f64> {
    if hypotheses.is_empty() || hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "bleu needs equal non-zero counts, got {} hypotheses and {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=4usize {
            if hyp.len() < n {
                continue;
            }
            let mut ref_counts: IndexMap<&[String], usize> = IndexMap::new();
            if reference.len() >= n {
                for gram in reference.windows(n) {
                    *ref_counts.entry(gram).or_default() += 1;
                }
            }
            let mut hyp_counts: IndexMap<&[String], usize> = IndexMap::new();
            for gram in hyp.windows(n) {
                *hyp_counts.entry(gram).or_default() += 1;
            }
            totals[n - 1] += hyp.len() - n + 1;
            for (gram, count) in hyp_counts {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
            }
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if totals[n] == 0 {
            BLEU_EPS
        } else if matches[n] == 0 {
            BLEU_EPS / totals[n] as f64
        } else {
            matches[n] as f64 / totals[n] as f64
        };
        log_sum += p.ln();
    }
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * (log_sum / 4.0).exp())
}

/// Combined score: (inform + success) * 0.5 + bleu.
pub fn combined(inform: f64, success: f64, bleu: f64) -> f64 {
    (inform + success) * 0.5 + bleu
}

/// CamRest-style combined score: (inform + success F1) * 0.5 + bleu.
pub fn combined_f1(inform: f64, success_f1: f64, bleu: f64) -> f64 {
    (inform + success_f1) * 0.5 + bleu
}

/// Normalize a state value: lowercase, drop article tokens, collapse spaces.
fn normalize_value(value: &str) -> String {
    value
        .to_lowercase()
        .split_whitespace()
        .filter(|t| !matches!(*t, "the" | "a" | "an"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn state_triples(state: &DialogState) -> HashSet<(String, String, String)> {
    let mut out = HashSet::new();
    for (domain, slots) in state.iter() {
        for (slot, value) in slots {
            out.insert((
                domain.to_lowercase(),
                slot.to_lowercase(),
                normalize_value(value),
            ));
        }
    }
    out
}

/// Percent of turns whose predicted state exactly matches gold under set
/// semantics over (domain, slot, normalized value) triples.
pub fn joint_goal_accuracy(pred: &[DialogState], gold: &[DialogState]) -> Result<f64> {
    if pred.is_empty() || pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "jga needs equal non-zero counts, got {} and {}",
            pred.len(),
            gold.len()
        )));
    }
    let exact = pred
        .iter()
        .zip(gold)
        .filter(|(p, g)| state_triples(p) == state_triples(g))
        .count();
    Ok(100.0 * exact as f64 / pred.len() as f64)
}

fn act_triples(acts: &ActionState) -> HashSet<(String, String, Option<String>)> {
    let mut out = HashSet::new();
    for act in acts.acts() {
        if act.slots.is_empty() {
            out.insert((act.domain.to_lowercase(), act.act.to_lowercase(), None));
        } else {
            for slot in &act.slots {
                out.insert((
                    act.domain.to_lowercase(),
                    act.act.to_lowercase(),
                    Some(slot.to_lowercase()),
                ));
            }
        }
    }
    out
}

/// Micro-averaged F1 over flattened (domain, act, slot) triples; slot-less
/// acts contribute a (domain, act, none) triple.
pub fn act_f1(pred: &[ActionState], gold: &[ActionState]) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "act f1 needs aligned turns, got {} and {}",
            pred.len(),
            gold.len()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fun = 0usize;
    for (p, g) in pred.iter().zip(gold) {
        let ps = act_triples(p);
        let gs = act_triples(g);
        tp += ps.intersection(&gs).count();
        fp += ps.difference(&gs).count();
        fun += gs.difference(&ps).count();
    }
    if tp + fp + fun == 0 {
        return Ok(100.0);
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fun) as f64;
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Requested-slot micro-F1 (CamRest-style success F1). Provided slots are
/// the `[value_*]` placeholders of the predicted responses, excluding the
/// entity-offer and count placeholders (name, id, choice).
pub fn success_f1(preds: &[PredTurn], gold: &[DialogSession]) -> Result<f64> {
    let paired = pair_sessions(preds, gold)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fun = 0usize;
    for p in &paired {
        let mut requested: HashSet<String> = HashSet::new();
        for dgoal in p.session.goal.domains.values() {
            requested.extend(dgoal.requestable.iter().cloned());
        }
        let mut provided: HashSet<String> = HashSet::new();
        for turn in &p.turns {
            provided.extend(placeholders_of(&turn.response));
        }
        provided.retain(|s| !matches!(s.as_str(), "name" | "id" | "choice"));
        tp += provided.intersection(&requested).count();
        fp += provided.difference(&requested).count();
        fun += requested.difference(&provided).count();
    }
    if tp + fp + fun == 0 {
        return Ok(100.0);
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fun) as f64;
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Session-length buckets used by the per-turn analysis.
pub const TURN_BUCKETS: [(&str, usize, usize); 4] = [
    ("(0,4]", 1, 4),
    ("(4,8]", 5, 8),
    ("(8,12]", 9, 12),
    ("(12,20)", 13, usize::MAX),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    pub sessions: usize,
    pub inform: f64,
    pub success: f64,
}

/// Inform/success rates per session-length bucket.
pub fn turn_bucket_report(
    preds: &[PredTurn],
    gold: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
) -> Result<Vec<BucketRow>> {
    let paired = pair_sessions(preds, gold)?;
    let mut rows: Vec<BucketRow> = TURN_BUCKETS
        .iter()
        .map(|(label, _, _)| BucketRow {
            label: label.to_string(),
            sessions: 0,
            inform: 0.0,
            success: 0.0,
        })
        .collect();
    for p in &paired {
        let turns = p.session.turns.len();
        let slot = TURN_BUCKETS
            .iter()
            .position(|(_, lo, hi)| turns >= *lo && turns <= *hi)
            .expect("buckets cover all positive lengths");
        let (inform, success) = session_inform_success(p, db, schema)?;
        rows[slot].sessions += 1;
        rows[slot].inform += inform as usize as f64;
        rows[slot].success += success as usize as f64;
    }
    for row in &mut rows {
        if row.sessions > 0 {
            row.inform = 100.0 * row.inform / row.sessions as f64;
            row.success = 100.0 * row.success / row.sessions as f64;
        }
    }
    Ok(rows)
}

/// Heuristic failure category for one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLabel {
    InaccurateState,
    InadequateAct,
    AnnotationOrScript,
    AcceptableOrOther,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainErrors {
    pub total_sessions: usize,
    pub failed_sessions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Labels for sessions that failed the success metric.
    pub sessions: Vec<(String, ErrorLabel)>,
    pub per_domain: IndexMap<String, DomainErrors>,
    pub label_counts: IndexMap<String, usize>,
}

/// Label failed sessions: wrong goal-slot state first, then missing gold act
/// slots, then placeholder-identical predictions (annotation/script), else
/// acceptable/other.
pub fn error_report(
    preds: &[PredTurn],
    gold: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
) -> Result<ErrorReport> {
    let paired = pair_sessions(preds, gold)?;
    let mut report = ErrorReport::default();
    for label in [
        "inaccurate_state",
        "inadequate_act",
        "annotation_or_script",
        "acceptable_or_other",
    ] {
        report.label_counts.insert(label.to_string(), 0);
    }
    for p in &paired {
        let (_, success) = session_inform_success(p, db, schema)?;
        for domain in p.session.goal.domains.keys() {
            let entry = report.per_domain.entry(domain.clone()).or_default();
            entry.total_sessions += 1;
            if !success {
                entry.failed_sessions += 1;
            }
        }
        if success {
            continue;
        }
        let label = classify_failure(p, schema);
        let key = match label {
            ErrorLabel::InaccurateState => "inaccurate_state",
            ErrorLabel::InadequateAct => "inadequate_act",
            ErrorLabel::AnnotationOrScript => "annotation_or_script",
            ErrorLabel::AcceptableOrOther => "acceptable_or_other",
        };
        *report.label_counts.get_mut(key).expect("preseeded") += 1;
        report
            .sessions
            .push((p.session.session_id.clone(), label));
    }
    Ok(report)
}

fn classify_failure(p: &Paired, schema: &Schema) -> ErrorLabel {
    // Compare cumulative end-of-session states on goal slots.
    let last = p.session.turns.len() - 1;
    let (pred_state, _) = DialogState::parse(schema, &p.turns[last].state);
    let gold_state = &p.session.turns[last].dialog_state;
    for (domain, dgoal) in &p.session.goal.domains {
        for slot in dgoal.informable.keys() {
            let pred_v = pred_state
                .slots(domain)
                .and_then(|m| m.get(slot))
                .map(|v| normalize_value(v));
            let gold_v = gold_state
                .slots(domain)
                .and_then(|m| m.get(slot))
                .map(|v| normalize_value(v));
            if pred_v != gold_v {
                return ErrorLabel::InaccurateState;
            }
        }
    }
    for (turn, pred) in p.session.turns.iter().zip(&p.turns) {
        let (pred_acts, _) = ActionState::parse(schema, &pred.acts);
        let pred_set = act_triples(&pred_acts);
        for triple in act_triples(&turn.action_state) {
            if triple.2.is_some() && !pred_set.contains(&triple) {
                return ErrorLabel::InadequateAct;
            }
        }
    }
    let placeholders_match = p
        .session
        .turns
        .iter()
        .zip(&p.turns)
        .all(|(turn, pred)| placeholders_of(&turn.response) == placeholders_of(&pred.response));
    if placeholders_match {
        ErrorLabel::AnnotationOrScript
    } else {
        ErrorLabel::AcceptableOrOther
    }
}

/// Everything `evaluate` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub combined: f64,
    pub act_f1: f64,
    pub jga: f64,
    pub success_f1: f64,
    pub per_bucket: Vec<BucketRow>,
    pub per_domain: IndexMap<String, DomainErrors>,
    pub error_labels: IndexMap<String, usize>,
}

/// Score a full prediction set against gold sessions.
pub fn evaluate(
    preds: &[PredTurn],
    gold: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
) -> Result<MetricReport> {
    let paired = pair_sessions(preds, gold)?;
    let (inform, success) = inform_success(preds, gold, db, schema)?;
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    let mut pred_states = Vec::new();
    let mut gold_states = Vec::new();
    let mut pred_acts = Vec::new();
    let mut gold_acts = Vec::new();
    for p in &paired {
        for (turn, pred) in p.session.turns.iter().zip(&p.turns) {
            hyps.push(crate::corpus::tokenize(&pred.response));
            refs.push(crate::corpus::tokenize(&turn.response));
            pred_states.push(DialogState::parse(schema, &pred.state).0);
            gold_states.push(turn.dialog_state.clone());
            pred_acts.push(ActionState::parse(schema, &pred.acts).0);
            gold_acts.push(turn.action_state.clone());
        }
    }
    let bleu_score = bleu(&hyps, &refs)?;
    let errors = error_report(preds, gold, db, schema)?;
    Ok(MetricReport {
        inform,
        success,
        bleu: bleu_score,
        combined: combined(inform, success, bleu_score),
        act_f1: act_f1(&pred_acts, &gold_acts)?,
        jga: joint_goal_accuracy(&pred_states, &gold_states)?,
        success_f1: success_f1(preds, gold)?,
        per_bucket: turn_bucket_report(preds, gold, db, schema)?,
        per_domain: errors.per_domain,
        error_labels: errors.label_counts,
    })
}

/// Gold-faithful predictions for a session: what a perfect rollout emits.
pub fn gold_predictions(session: &DialogSession) -> Vec<PredTurn> {
    session
        .turns
        .iter()
        .map(|turn| PredTurn {
            session_id: session.session_id.clone(),
            turn_index: turn.turn_index,
            state: turn.dialog_state.linearize(),
            db: turn.db_bucket().token(),
            acts: turn.action_state.linearize(),
            response: turn.response.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::synth::{fixture_db, fixture_schema, sample_session};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn perfect_rollout_scores_perfectly() {
        let schema = fixture_schema();
        let db = fixture_db();
        let session = sample_session();
        let preds = gold_predictions(&session);
        let (inform, success) =
            inform_success(&preds, std::slice::from_ref(&session), &db, &schema).unwrap();
        assert_eq!((inform, success), (100.0, 100.0));
    }

    #[test]
    fn missing_requestable_fails_success_only() {
        let schema = fixture_schema();
        let db = fixture_db();
        let session = sample_session();
        let mut preds = gold_predictions(&session);
        // Drop the phone placeholder while keeping the entity offer.
        preds[1].response = "the address is [value_address] . anything else ?".into();
        let (inform, success) =
            inform_success(&preds, std::slice::from_ref(&session), &db, &schema).unwrap();
        assert_eq!((inform, success), (100.0, 0.0));
    }

    #[test]
    fn conflicting_state_fails_inform() {
        let schema = fixture_schema();
        let db = fixture_db();
        let session = sample_session();
        let mut preds = gold_predictions(&session);
        for p in &mut preds {
            p.state = "[attraction] type museum area centre".into();
        }
        // Goal wants a theatre; the generated state tracks museums, so no
        // entity satisfies both.
        let (inform, success) =
            inform_success(&preds, std::slice::from_ref(&session), &db, &schema).unwrap();
        assert_eq!((inform, success), (0.0, 0.0));
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let reference = vec![toks("the address is on bene street .")];
        assert_abs_diff_eq!(bleu(&reference, &reference).unwrap(), 100.0, epsilon = 1e-9);
        let hyp = vec![toks("zero overlap here whatsoever")];
        let score = bleu(&hyp, &reference).unwrap();
        assert!(score < 0.01, "smoothing floor, got {score}");
        assert!(score > 0.0);
    }

    #[test]
    fn bleu_matches_hand_transcription() {
        // Hypothesis/reference pair small enough to evaluate by hand.
        let hyp = vec![toks("the arts theatre is in the centre")];
        let reference = vec![toks("the arts theatre is located in the centre")];
        // 1-grams: 7 of 7 match; 2-grams: 5 of 6; 3-grams: 3 of 5; 4-grams: 1 of 4.
        // BP = exp(1 - 8/7).
        let p: [f64; 4] = [7.0 / 7.0, 5.0 / 6.0, 3.0 / 5.0, 1.0 / 4.0];
        let expected = 100.0
            * (1.0f64 - 8.0 / 7.0).exp()
            * (p.iter().map(|x| x.ln()).sum::<f64>() / 4.0).exp();
        assert_abs_diff_eq!(bleu(&hyp, &reference).unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn combined_paper_rows() {
        assert_abs_diff_eq!(combined(88.9, 78.0, 19.9), 103.35, epsilon = 1e-9);
        assert_abs_diff_eq!(combined_f1(98.5, 87.7, 24.2), 117.3, epsilon = 1e-9);
        assert_abs_diff_eq!(combined(0.0, 0.0, 0.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jga_counts_exact_turns() {
        let schema = fixture_schema();
        let gold: Vec<DialogState> = vec![
            DialogState::parse(&schema, "[restaurant] food italian area east").0,
            DialogState::parse(&schema, "[hotel] stars 4").0,
            DialogState::parse(&schema, "[train] day monday").0,
        ];
        let pred: Vec<DialogState> = vec![
            DialogState::parse(&schema, "[restaurant] area east food italian").0,
            DialogState::parse(&schema, "[hotel] stars 4").0,
            DialogState::parse(&schema, "[train] day friday").0,
        ];
        assert_abs_diff_eq!(
            joint_goal_accuracy(&pred, &gold).unwrap(),
            100.0 * 2.0 / 3.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn jga_normalizes_articles_and_case() {
        let schema = fixture_schema();
        let gold = vec![DialogState::parse(&schema, "[attraction] name arts theatre").0];
        let mut pred_state = DialogState::new();
        pred_state.insert("attraction", "name", "The Arts  Theatre");
        assert_abs_diff_eq!(
            joint_goal_accuracy(&[pred_state], &gold).unwrap(),
            100.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn act_f1_hand_count() {
        let mut gold = ActionState::default();
        gold.push("restaurant", "inform", &["food", "price"]);
        gold.push("general", "reqmore", &[]);
        let mut pred = ActionState::default();
        pred.push("restaurant", "inform", &["food"]);
        pred.push("general", "reqmore", &[]);
        pred.push("restaurant", "request", &["area"]);
        // TP = 2 (Ri-food, G-reqmore), FP = 1, FN = 1: P = R = 2/3.
        assert_abs_diff_eq!(
            act_f1(&[pred.clone()], &[gold.clone()]).unwrap(),
            100.0 * 2.0 / 3.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            act_f1(&[gold.clone()], &[gold.clone()]).unwrap(),
            100.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            act_f1(&[ActionState::default()], &[gold]).unwrap(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn bucket_assignment() {
        let schema = fixture_schema();
        let db = fixture_db();
        let session = sample_session(); // 3 turns -> (0,4]
        let preds = gold_predictions(&session);
        let rows = turn_bucket_report(&preds, &[session], &db, &schema).unwrap();
        assert_eq!(rows[0].sessions, 1);
        assert_eq!(rows[1].sessions + rows[2].sessions + rows[3].sessions, 0);
        assert_abs_diff_eq!(rows[0].inform, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn error_taxonomy_rules() {
        let schema = fixture_schema();
        let db = fixture_db();
        let session = sample_session();

        // Wrong goal-slot value in the state: inaccurate_state.
        let mut preds = gold_predictions(&session);
        for p in &mut preds {
            p.state = "[attraction] type museum area centre".into();
        }
        let report = error_report(&preds, std::slice::from_ref(&session), &db, &schema).unwrap();
        assert_eq!(report.sessions[0].1, ErrorLabel::InaccurateState);

        // Correct state, act missing a gold slot, response missing the
        // requested placeholder: inadequate_act.
        let mut preds = gold_predictions(&session);
        preds[1].acts = "[attraction] [inform] address [general] [reqmore]".into();
        preds[1].response = "the address is [value_address] . anything else ?".into();
        let report = error_report(&preds, std::slice::from_ref(&session), &db, &schema).unwrap();
        assert_eq!(report.sessions[0].1, ErrorLabel::InadequateAct);

        // Prediction identical to gold yet the session fails (goal asks for
        // a slot the gold dialog never provides): annotation_or_script.
        let mut session2 = sample_session();
        session2
            .goal
            .domains
            .get_mut("attraction")
            .unwrap()
            .requestable
            .push("postcode".into());
        let preds = gold_predictions(&session2);
        let report = error_report(&preds, &[session2], &db, &schema).unwrap();
        assert_eq!(report.sessions[0].1, ErrorLabel::AnnotationOrScript);
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let schema = fixture_schema();
        let db = fixture_db();
        let mut a = sample_session();
        a.session_id = "a".into();
        let mut b = sample_session();
        b.session_id = "b".into();
        // Make b fail success.
        let mut preds: Vec<PredTurn> = Vec::new();
        preds.extend(gold_predictions(&a));
        let mut pb = gold_predictions(&b);
        pb[1].response = "the address is [value_address] .".into();
        preds.extend(pb);
        let fwd = evaluate(&preds, &[a.clone(), b.clone()], &db, &schema).unwrap();
        let rev = evaluate(&preds, &[b, a], &db, &schema).unwrap();
        assert_abs_diff_eq!(fwd.inform, rev.inform, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd.success, rev.success, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd.bleu, rev.bleu, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd.jga, rev.jga, epsilon = 1e-12);
        assert_abs_diff_eq!(fwd.combined, rev.combined, epsilon = 1e-12);
    }
}
