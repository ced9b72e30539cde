// Temporary: does a template-uniform overfit session force copy attention?

use todkit::analysis::export_cross_attention;
use todkit::corpus::{
    build_context, ActionState, ContextKind, DialogSession, DialogState, DialogTurn, DomainGoal,
    Goal,
};
use todkit::dbkit::query;
use todkit::losses::ObjectiveMode;
use todkit::metrics::gold_predictions;
use todkit::synth::{fixture_db, fixture_schema};
use todkit::trainer::{rollout, train, RolloutOptions, TrainConfig};

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
fn templated_copy_attention() {
    let schema = fixture_schema();
    let db = fixture_db();
    let session = templated_session();
    session.validate(&schema).unwrap();
    let sessions = vec![session.clone()];

    for (d_model, lr, wd, dropout) in [
        (32usize, 2e-3f64, 0.01f64, 0.1f64),
        (32, 3e-3, 0.01, 0.1),
        (32, 3e-3, 0.1, 0.1),
        (48, 2e-3, 0.01, 0.1),
        (48, 3e-3, 0.1, 0.1),
        (64, 2e-3, 0.1, 0.1),
        (64, 3e-3, 0.1, 0.0),
    ] {
        let mut config = TrainConfig::for_mode(ObjectiveMode::Baseline);
        config.epochs = 100; // 12 turns -> 2 steps/epoch -> 200 steps
        config.learning_rate = lr;
        config.weight_decay = wd;
        config.validate_every = 0;
        config.seed = 3;
        config.backbone.d_model = d_model;
        config.backbone.ffn_dim = 2 * d_model;
        config.backbone.dropout = dropout;
        config.backbone.heads = 2;
        config.backbone.encoder_layers = 1;
        config.backbone.decoder_layers = 1;
        let artifacts = train(&sessions, &[], &db, &schema, &config, None).unwrap();
        let last = artifacts.loss_log.last().unwrap();

        let preds = rollout(
            &sessions,
            &db,
            &schema,
            &artifacts.final_model,
            &artifacts.tokenizer,
            &RolloutOptions::default(),
        )
        .unwrap();
        let exact = preds == gold_predictions(&session);

        let mut copied = 0usize;
        let mut aligned = 0usize;
        for t in 0..session.turns.len() {
            let Ok(export) = export_cross_attention(
                &artifacts.final_model,
                &artifacts.tokenizer,
                &session,
                t,
                48,
            ) else {
                continue;
            };
            let (state, _) = DialogState::parse(&schema, &export.row_labels.join(" "));
            let mut value_tokens: Vec<String> = Vec::new();
            for (_, slots) in state.iter() {
                for (_, value) in slots {
                    value_tokens.extend(value.split_whitespace().map(String::from));
                }
            }
            let ctx = build_context(&session, t, ContextKind::ForState, true, None).unwrap();
            for (row, label) in export.row_labels.iter().enumerate() {
                if !value_tokens.iter().any(|v| v == label)
                    || !ctx.tokens.iter().any(|c| c == label)
                {
                    continue;
                }
                copied += 1;
                let argmax = export
                    .matrix
                    .row(row)
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                if export.col_labels[argmax] == *label {
                    aligned += 1;
                }
            }
        }
        println!(
            "d={d_model} lr={lr} wd={wd} drop={dropout}: total={:.4} exact={exact} copy={aligned}/{copied}",
            last.total
        );
    }
}
