// Temporary: inspect attention structure of the best-fitting config.

use todkit::analysis::export_cross_attention;
use todkit::corpus::{
    ActionState, DialogSession, DialogState, DialogTurn, DomainGoal, Goal,
};
use todkit::dbkit::query;
use todkit::losses::ObjectiveMode;
use todkit::synth::{fixture_db, fixture_schema};
use todkit::trainer::{train, TrainConfig};

fn templated_session() -> DialogSession {
    let db = fixture_db();
    let pairs = [
        ("theatre", "centre"),
        ("museum", "west"),
        ("college", "centre"),
        ("park", "north"),
        ("cinema", "south"),
        ("church", "east"),
        ("theatre", "east"),
        ("museum", "north"),
        ("college", "west"),
        ("park", "south"),
        ("cinema", "centre"),
        ("museum", "centre"),
    ];
    let mut goal = Goal::default();
    goal.domains.insert(
        "attraction".into(),
        DomainGoal {
            informable: [("type", "museum"), ("area", "centre")]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            requestable: vec![],
        },
    );
    let mut turns = Vec::new();
    let mut state = DialogState::new();
    for (i, (ty, area)) in pairs.iter().enumerate() {
        state.insert("attraction", "type", ty);
        state.insert("attraction", "area", area);
        let count = query(&db, &state, "attraction").unwrap();
        let mut acts = ActionState::default();
        acts.push("attraction", "recommend", &["name"]);
        turns.push(DialogTurn {
            turn_index: i,
            user_utterance: format!("i am looking for a {ty} in the {area} ."),
            dialog_state: state.clone(),
            db_count: count,
            action_state: acts,
            response: "how about [value_name] ?".into(),
        });
    }
    DialogSession {
        session_id: "overfit-0001".into(),
        goal,
        turns,
    }
}

#[test]
#[ignore]
fn inspect_attention() {
    let schema = fixture_schema();
    let db = fixture_db();
    let session = templated_session();
    session.validate(&schema).unwrap();
    let sessions = vec![session.clone()];

    let mut config = TrainConfig::for_mode(ObjectiveMode::Baseline);
    config.epochs = 100;
    config.learning_rate = 3e-3;
    config.weight_decay = 0.1;
    config.validate_every = 0;
    config.seed = 3;
    config.backbone.d_model = 64;
    config.backbone.ffn_dim = 128;
    config.backbone.dropout = 0.0;
    config.backbone.heads = 2;
    config.backbone.encoder_layers = 1;
    config.backbone.decoder_layers = 1;
    let artifacts = train(&sessions, &[], &db, &schema, &config, None).unwrap();
    println!("final total {:.4}", artifacts.loss_log.last().unwrap().total);

    for t in [0usize, 5, 11] {
        let export = export_cross_attention(
            &artifacts.final_model,
            &artifacts.tokenizer,
            &session,
            t,
            48,
        )
        .unwrap();
        println!("--- turn {t} (context len {})", export.col_labels.len());
        for (row, label) in export.row_labels.iter().enumerate() {
            let mut cells: Vec<(usize, f64)> = export
                .matrix
                .row(row)
                .iter()
                .cloned()
                .enumerate()
                .collect();
            cells.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let tops: Vec<String> = cells
                .iter()
                .take(3)
                .map(|(i, p)| format!("{}@{i}:{p:.2}", export.col_labels[*i]))
                .collect();
            println!("  row {row} out='{label}': {}", tops.join("  "));
        }
    }
}
