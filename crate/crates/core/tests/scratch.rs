// Temporary calibration experiment; removed before finalizing.

use todkit::losses::ObjectiveMode;
use todkit::metrics::gold_predictions;
use todkit::model::BackboneConfig;
use todkit::synth::{fixture_db, fixture_schema, overfit_session};
use todkit::trainer::{rollout, train, RolloutOptions, TrainConfig};

#[test]
#[ignore]
fn overfit_calibration() {
    let schema = fixture_schema();
    let db = fixture_db();
    let session = overfit_session();
    let sessions = vec![session.clone()];

    let start = std::time::Instant::now();
    let mut config = TrainConfig::for_mode(ObjectiveMode::Baseline);
    config.epochs = 200; // batch of 3 turns -> 1 step per epoch
    config.batch_size = 8;
    config.learning_rate = 1e-3;
    config.validate_every = 0;
    config.seed = 3;
    config.backbone = BackboneConfig {
        vocab_size: 0,
        d_model: 128,
        encoder_layers: 2,
        decoder_layers: 2,
        heads: 4,
        ffn_dim: 256,
        max_len: 512,
        dropout: 0.0,
    };
    let artifacts = train(&sessions, &[], &db, &schema, &config, None).unwrap();
    let train_time = start.elapsed();
    let last = artifacts.loss_log.last().unwrap();
    println!(
        "train: {train_time:?}; final l_d={:.4} l_r={:.4} total={:.4}",
        last.l_d, last.l_r, last.total
    );
    for rec in artifacts.loss_log.iter().step_by(20) {
        println!(
            "step {} lr {:.6} l_d {:.4} l_r {:.4} total {:.4}",
            rec.step, rec.lr, rec.l_d, rec.l_r, rec.total
        );
    }

    let start = std::time::Instant::now();
    let preds = rollout(
        &sessions,
        &db,
        &schema,
        &artifacts.final_model,
        &artifacts.tokenizer,
        &RolloutOptions::default(),
    )
    .unwrap();
    println!("rollout: {:?}", start.elapsed());
    let gold = gold_predictions(&session);
    for (p, g) in preds.iter().zip(&gold) {
        println!("turn {}:", p.turn_index);
        println!("  state pred: {}", p.state);
        println!("  state gold: {}", g.state);
        println!("  db    pred: {} gold: {}", p.db, g.db);
        println!("  acts  pred: {}", p.acts);
        println!("  acts  gold: {}", g.acts);
        println!("  resp  pred: {}", p.response);
        println!("  resp  gold: {}", g.response);
    }
    assert_eq!(preds, gold);
    assert!(last.total < 0.05, "total {}", last.total);
}
