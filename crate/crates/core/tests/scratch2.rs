// Temporary calibration for attention copy + representation direction.

use todkit::analysis::{compute_dump, export_cross_attention, paired_cosine_report, space_distance_report};
use todkit::corpus::{build_context, ContextKind, DialogState};
use todkit::losses::ObjectiveMode;
use todkit::model::BackboneConfig;
use todkit::synth::{fixture_db, fixture_schema, generate_sessions, overfit_session};
use todkit::trainer::{train, TrainConfig};

fn overfit_config() -> TrainConfig {
    let mut config = TrainConfig::for_mode(ObjectiveMode::Baseline);
    config.epochs = 200;
    config.learning_rate = 1e-3;
    config.validate_every = 0;
    config.seed = 3;
    config.backbone.dropout = 0.0;
    config
}

#[test]
#[ignore]
fn attention_copy_calibration() {
    let schema = fixture_schema();
    let db = fixture_db();
    let session = overfit_session();
    let sessions = vec![session.clone()];
    let config = overfit_config();
    let artifacts = train(&sessions, &[], &db, &schema, &config, None).unwrap();

    let mut copied = 0usize;
    let mut aligned = 0usize;
    for t in 0..session.turns.len() {
        let export = export_cross_attention(
            &artifacts.final_model,
            &artifacts.tokenizer,
            &session,
            t,
            48,
        )
        .unwrap();
        // Value tokens of the parsed generated state.
        let (state, _) = DialogState::parse(&schema, &export.row_labels.join(" "));
        let mut value_tokens: Vec<String> = Vec::new();
        for (_, slots) in state.iter() {
            for (_, value) in slots {
                value_tokens.extend(value.split_whitespace().map(String::from));
            }
        }
        let ctx = build_context(&session, t, ContextKind::ForState, true, None).unwrap();
        for (row, label) in export.row_labels.iter().enumerate() {
            if !value_tokens.iter().any(|v| v == label) {
                continue;
            }
            if !ctx.tokens.iter().any(|c| c == label) {
                continue;
            }
            copied += 1;
            let attn_row = export.matrix.row(row);
            let argmax = attn_row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let hit = export.col_labels[argmax] == *label;
            println!(
                "turn {t} row {row} token '{label}': argmax col {argmax} = '{}' hit={hit}",
                export.col_labels[argmax]
            );
            if hit {
                aligned += 1;
            }
        }
    }
    println!("copy alignment: {aligned}/{copied}");
    assert!(copied > 0);
    assert!(aligned as f64 >= 0.8 * copied as f64);
}

#[test]
#[ignore]
fn representation_direction_calibration() {
    let schema = fixture_schema();
    let db = fixture_db();
    let train_sessions = generate_sessions(101, 50, "fix");
    let test_sessions = generate_sessions(303, 8, "test");

    for mode in [ObjectiveMode::Baseline, ObjectiveMode::MarsP, ObjectiveMode::MarsG] {
        for seed in [1u64, 2, 3] {
            let start = std::time::Instant::now();
            let mut config = TrainConfig::for_mode(mode);
            config.epochs = 3;
            config.seed = seed;
            config.validate_every = 0;
            let artifacts = train(&train_sessions, &[], &db, &schema, &config, None).unwrap();
            let dump = compute_dump(&artifacts.final_model, &artifacts.tokenizer, &test_sessions)
                .unwrap();
            let (cos_s, cos_a) = paired_cosine_report(&dump).unwrap();
            let (dist_s, dist_a) = space_distance_report(&dump).unwrap();
            println!(
                "mode {:?} seed {seed}: cos=({cos_s:.3},{cos_a:.3}) dist=({dist_s:.3},{dist_a:.3}) elapsed {:?} final_total {:.3}",
                mode,
                start.elapsed(),
                artifacts.loss_log.last().unwrap().total,
            );
        }
    }
}
