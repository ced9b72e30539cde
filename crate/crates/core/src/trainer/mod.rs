//! End-to-end training: seeded multi-task loop with the contrastive terms,
//! per-epoch validation rollouts, checkpoint selection, the hyperparameter
//! sweep runner, and the low-resource protocol.

mod adamw;
mod data;
mod lowres;
mod rollout;
mod schedule;
mod sweep;

pub use adamw::{clip_global_norm, AdamW};
pub use data::{turn_sequences, TurnSequences};
pub use lowres::{lowres, LowResRow, LowResTable};
pub use rollout::{rollout, RolloutOptions};
pub use schedule::LrSchedule;
pub use sweep::{sweep, SweepParam, SweepRow};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DialogSession;
use crate::dbkit::EntityDb;
use crate::losses::{
    contrastive_grad, total_loss, ContrastiveBatch, LossWeights, ObjectiveMode, PositiveRule,
};
use crate::metrics::{evaluate, MetricReport};
use crate::model::{save_checkpoint, Backbone, BackboneConfig, DecoderKind};
use crate::schema::Schema;
use crate::tokenizer::Tokenizer;
use crate::{Error, Result};

/// How the group-wise positive context is picked during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupwisePositive {
    Cyclic,
    Random,
}

/// Which validation metric picks the checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointMetric {
    Combined,
    Jga,
}

impl CheckpointMetric {
    pub fn name(&self) -> &'static str {
        match self {
            CheckpointMetric::Combined => "combined",
            CheckpointMetric::Jga => "jga",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: ObjectiveMode,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Contrastive temperature; `None` resolves the per-mode default
    /// (0.1 point-wise, 0.5 group-wise).
    pub temperature: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    pub seed: u64,
    /// Teacher-forced contexts use the stored gold DB count when set;
    /// otherwise the DB is re-queried with the gold state.
    pub oracle_db: bool,
    pub checkpoint_metric: CheckpointMetric,
    pub groupwise_positive: GroupwisePositive,
    /// Epochs between validation rollouts (0 disables validation).
    pub validate_every: usize,
    pub backbone: BackboneConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: ObjectiveMode::Baseline,
            lambda1: 1.0,
            lambda2: 0.1,
            temperature: None,
            batch_size: 8,
            epochs: 10,
            learning_rate: 5e-4,
            warmup_ratio: 0.2,
            weight_decay: 0.01,
            grad_clip: 1.0,
            seed: 1,
            oracle_db: true,
            checkpoint_metric: CheckpointMetric::Combined,
            groupwise_positive: GroupwisePositive::Cyclic,
            validate_every: 1,
            backbone: BackboneConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn for_mode(mode: ObjectiveMode) -> TrainConfig {
        TrainConfig {
            mode,
            ..TrainConfig::default()
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature.unwrap_or(match self.mode {
            ObjectiveMode::MarsP => 0.1,
            _ => 0.5,
        })
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            mode: self.mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch_size and epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_ratio) {
            return Err(Error::InvalidArgument("warmup_ratio outside [0, 1]".into()));
        }
        if !(self.temperature() > 0.0) {
            return Err(Error::InvalidArgument("temperature must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the per-step loss log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub l_d: f64,
    pub l_r: f64,
    pub l_dscl: f64,
    pub l_ascl: f64,
    pub total: f64,
}

/// Validation metrics after an epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub combined: f64,
    pub act_f1: f64,
    pub jga: f64,
}

impl EpochMetrics {
    fn from_report(epoch: usize, report: &MetricReport) -> EpochMetrics {
        EpochMetrics {
            epoch,
            inform: report.inform,
            success: report.success,
            bleu: report.bleu,
            combined: report.combined,
            act_f1: report.act_f1,
            jga: report.jga,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "inform" => Some(self.inform),
            "success" => Some(self.success),
            "bleu" => Some(self.bleu),
            "combined" => Some(self.combined),
            "act_f1" => Some(self.act_f1),
            "jga" => Some(self.jga),
            _ => None,
        }
    }
}

/// Everything a training run produces.
pub struct RunArtifacts {
    pub config: TrainConfig,
    pub loss_log: Vec<StepRecord>,
    pub val_metrics: Vec<EpochMetrics>,
    /// Checkpoints written to disk, one per validated epoch.
    pub checkpoint_paths: Vec<(usize, PathBuf)>,
    /// In-memory snapshots per validated epoch (kept when no run dir).
    snapshots: Vec<(usize, Backbone)>,
    pub final_model: Backbone,
    pub tokenizer: Tokenizer,
}

impl RunArtifacts {
    /// Model state at a validated epoch, from memory or disk.
    pub fn model_for_epoch(&self, epoch: usize) -> Result<Backbone> {
        if let Some((_, model)) = self.snapshots.iter().find(|(e, _)| *e == epoch) {
            return Ok(model.clone());
        }
        if let Some((_, path)) = self.checkpoint_paths.iter().find(|(e, _)| *e == epoch) {
            let (model, _) = crate::model::load_checkpoint(path)?;
            return Ok(model);
        }
        Err(Error::NotFound(format!("no checkpoint for epoch {epoch}")))
    }

    /// The checkpoint chosen by [`select_checkpoint`] on the config's metric.
    pub fn best_model(&self) -> Result<(usize, Backbone)> {
        let epoch = select_checkpoint(self, self.config.checkpoint_metric.name())?;
        Ok((epoch, self.model_for_epoch(epoch)?))
    }
}

/// Argmax of a validation metric over epochs; ties resolve to the earliest.
pub fn select_checkpoint(run: &RunArtifacts, metric: &str) -> Result<usize> {
    if run.val_metrics.is_empty() {
        return Err(Error::NotFound("no validation metrics recorded".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    for row in &run.val_metrics {
        let value = row
            .metric(metric)
            .ok_or_else(|| Error::NotFound(format!("metric '{metric}' absent from logs")))?;
        if best.map(|(b, _)| value > b).unwrap_or(true) {
            best = Some((value, row.epoch));
        }
    }
    Ok(best.expect("non-empty metrics").1)
}

fn mix(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &v in parts {
        h ^= v
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 31;
    }
    h
}

/// Train on `train_sessions`, validating on `val_sessions`. With `run_dir`
/// set, writes `config.json`, `loss_log.jsonl`, `val_metrics.jsonl`, and one
/// checkpoint per validated epoch under `ckpt/`.
pub fn train(
    train_sessions: &[DialogSession],
    val_sessions: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
    config: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<RunArtifacts> {
    config.validate()?;
    if train_sessions.is_empty() {
        return Err(Error::InvalidArgument("no training sessions".into()));
    }
    let tokenizer = Tokenizer::build(schema, db, [train_sessions, val_sessions]);
    let mut backbone_config = config.backbone.clone();
    backbone_config.vocab_size = tokenizer.vocab_size();
    let mut backbone = Backbone::new(backbone_config, config.seed)?;
    let mut optimizer = AdamW::new(backbone.params(), config.weight_decay);
    let weights = config.weights();
    let temperature = config.temperature();
    let pad = tokenizer.pad_id();

    let examples: Vec<(usize, usize)> = train_sessions
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.turns.len()).map(move |ti| (si, ti)))
        .collect();
    let batches_per_epoch = examples.len().div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let schedule = LrSchedule::new(config.learning_rate, config.warmup_ratio, total_steps);

    if let Some(dir) = run_dir {
        fs::create_dir_all(dir.join("ckpt"))
            .map_err(|e| Error::io(dir.display().to_string(), e))?;
        fs::write(
            dir.join("config.json"),
            serde_json::to_string_pretty(config).expect("config serializes"),
        )
        .map_err(|e| Error::io(dir.display().to_string(), e))?;
    }

    let mut loss_log: Vec<StepRecord> = Vec::with_capacity(total_steps);
    let mut val_metrics: Vec<EpochMetrics> = Vec::new();
    let mut checkpoint_paths: Vec<(usize, PathBuf)> = Vec::new();
    let mut snapshots: Vec<(usize, Backbone)> = Vec::new();
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(&[
            config.seed,
            epoch as u64,
        ])));
        for batch_ids in order.chunks(config.batch_size) {
            step += 1;
            let lr = schedule.lr_at(step as f64);
            let record = train_step(
                &mut backbone,
                &mut optimizer,
                train_sessions,
                db,
                schema,
                &tokenizer,
                config,
                &weights,
                temperature,
                batch_ids
                    .iter()
                    .map(|&i| examples[i])
                    .collect::<Vec<_>>()
                    .as_slice(),
                step,
                lr,
                pad,
            )?;
            if !record.total.is_finite() {
                return Err(Error::Diverged { step });
            }
            loss_log.push(record);
        }

        let validate_now = config.validate_every > 0 && epoch % config.validate_every == 0;
        if validate_now && !val_sessions.is_empty() {
            let preds = rollout(
                val_sessions,
                db,
                schema,
                &backbone,
                &tokenizer,
                &RolloutOptions::default(),
            )?;
            let report = evaluate(&preds, val_sessions, db, schema)?;
            val_metrics.push(EpochMetrics::from_report(epoch, &report));
            match run_dir {
                Some(dir) => {
                    let path = dir.join("ckpt").join(format!("epoch_{epoch}.ckpt"));
                    save_checkpoint(&path, &backbone, &tokenizer)?;
                    checkpoint_paths.push((epoch, path));
                }
                None => snapshots.push((epoch, backbone.clone())),
            }
        }
    }

    if let Some(dir) = run_dir {
        write_jsonl(dir.join("loss_log.jsonl"), &loss_log)?;
        write_jsonl(dir.join("val_metrics.jsonl"), &val_metrics)?;
        let final_path = dir.join("ckpt").join("final.ckpt");
        save_checkpoint(&final_path, &backbone, &tokenizer)?;
    }

    Ok(RunArtifacts {
        config: config.clone(),
        loss_log,
        val_metrics,
        checkpoint_paths,
        snapshots,
        final_model: backbone,
        tokenizer,
    })
}

fn write_jsonl<T: Serialize>(path: PathBuf, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    let mut file = fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    backbone: &mut Backbone,
    optimizer: &mut AdamW,
    sessions: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
    tokenizer: &Tokenizer,
    config: &TrainConfig,
    weights: &LossWeights,
    temperature: f64,
    batch: &[(usize, usize)],
    step: usize,
    lr: f64,
    pad: u32,
) -> Result<StepRecord> {
    let contrastive_active = weights.mode != ObjectiveMode::Baseline;
    let mut fw = backbone.forward(true);
    let mut state_losses = Vec::with_capacity(batch.len());
    let mut joint_losses = Vec::with_capacity(batch.len());
    let mut cd_nodes = Vec::new();
    let mut ca_nodes = Vec::new();
    let mut dd_nodes = Vec::new();
    let mut aa_nodes = Vec::new();

    for (bi, &(si, ti)) in batch.iter().enumerate() {
        let session = &sessions[si];
        let mut seqs = turn_sequences(session, ti, tokenizer)?;
        if !config.oracle_db {
            // Re-query with the gold state instead of trusting the stored
            // count; identical on consistent corpora.
            let turn = &session.turns[ti];
            let empty = crate::corpus::DialogState::new();
            let prev = if ti == 0 {
                &empty
            } else {
                &session.turns[ti - 1].dialog_state
            };
            let active = crate::dbkit::active_domain(prev, &turn.dialog_state, schema);
            let count = match active {
                Some(domain) => crate::dbkit::query(db, &turn.dialog_state, &domain).unwrap_or(0),
                None => 0,
            };
            let token = crate::dbkit::DbBucket::from_count(count).token();
            let last = seqs.ctx_resp.len() - 1;
            seqs.ctx_resp[last] = tokenizer.id(&token);
        }
        let tags = |pass: u64| mix(&[config.seed, step as u64, bi as u64, pass]);
        fw.reseed_dropout(tags(0));
        let enc_cd = fw.encode(&seqs.ctx_state, pad)?;
        fw.reseed_dropout(tags(1));
        let dec_state = fw.decode_train(DecoderKind::State, &enc_cd, &seqs.state_target, pad)?;
        fw.reseed_dropout(tags(2));
        let enc_ca = fw.encode(&seqs.ctx_resp, pad)?;
        fw.reseed_dropout(tags(3));
        let dec_joint =
            fw.decode_train(DecoderKind::ActResponse, &enc_ca, &seqs.joint_target, pad)?;
        state_losses.push(dec_state.loss);
        joint_losses.push(dec_joint.loss);
        if contrastive_active {
            fw.reseed_dropout(tags(4));
            let enc_dd = fw.encode(&seqs.state_repr, pad)?;
            fw.reseed_dropout(tags(5));
            let enc_aa = fw.encode(&seqs.act_repr, pad)?;
            cd_nodes.push(enc_cd.pooled);
            ca_nodes.push(enc_ca.pooled);
            dd_nodes.push(enc_dd.pooled);
            aa_nodes.push(enc_aa.pooled);
        }
    }

    let l_d_node = fw.tape.avg_scalars(&state_losses);
    let l_r_node = fw.tape.avg_scalars(&joint_losses);
    let l_d = fw.tape.scalar(l_d_node);
    let l_r = fw.tape.scalar(l_r_node);

    let mut seeds = vec![
        (l_d_node, Array2::ones((1, 1))),
        (l_r_node, Array2::ones((1, 1))),
    ];
    let mut l_dscl = 0.0;
    let mut l_ascl = 0.0;
    let n = batch.len();
    let groupwise_needs_pair = weights.mode == ObjectiveMode::MarsG && n < 2;
    if contrastive_active && !groupwise_needs_pair {
        let stack = |fw: &crate::model::Forward, nodes: &[crate::nn::NodeId]| {
            let d = fw.tape.value(nodes[0]).ncols();
            let mut m = Array2::zeros((nodes.len(), d));
            for (i, &node) in nodes.iter().enumerate() {
                m.row_mut(i).assign(&fw.tape.value(node).row(0));
            }
            m
        };
        let cd = stack(&fw, &cd_nodes);
        let dd = stack(&fw, &dd_nodes);
        let ca = stack(&fw, &ca_nodes);
        let aa = stack(&fw, &aa_nodes);
        let rule = match config.groupwise_positive {
            GroupwisePositive::Cyclic => PositiveRule::Cyclic,
            GroupwisePositive::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(&[config.seed, step as u64, 7]));
                PositiveRule::Indices(
                    (0..n)
                        .map(|i| {
                            let j = rng.random_range(0..n - 1);
                            if j >= i {
                                j + 1
                            } else {
                                j
                            }
                        })
                        .collect(),
                )
            }
        };
        let state_batch = ContrastiveBatch::new(cd.view(), dd.view(), temperature)?;
        let act_batch = ContrastiveBatch::new(ca.view(), aa.view(), temperature)?;
        let state_grad = contrastive_grad(weights.mode, &state_batch, &rule)?
            .expect("contrastive mode has a kernel");
        let act_grad = contrastive_grad(weights.mode, &act_batch, &rule)?
            .expect("contrastive mode has a kernel");
        l_dscl = state_grad.value;
        l_ascl = act_grad.value;
        for i in 0..n {
            if weights.lambda1 != 0.0 {
                seeds.push((
                    cd_nodes[i],
                    state_grad
                        .d_contexts
                        .row(i)
                        .mapv(|x| x * weights.lambda1)
                        .insert_axis(ndarray::Axis(0)),
                ));
                seeds.push((
                    dd_nodes[i],
                    state_grad
                        .d_states
                        .row(i)
                        .mapv(|x| x * weights.lambda1)
                        .insert_axis(ndarray::Axis(0)),
                ));
            }
            if weights.lambda2 != 0.0 {
                seeds.push((
                    ca_nodes[i],
                    act_grad
                        .d_contexts
                        .row(i)
                        .mapv(|x| x * weights.lambda2)
                        .insert_axis(ndarray::Axis(0)),
                ));
                seeds.push((
                    aa_nodes[i],
                    act_grad
                        .d_states
                        .row(i)
                        .mapv(|x| x * weights.lambda2)
                        .insert_axis(ndarray::Axis(0)),
                ));
            }
        }
    }

    let mut grads = fw.tape.backward(seeds)?;
    let mut param_grads = fw.param_grads(&mut grads);
    drop(fw);
    clip_global_norm(&mut param_grads, config.grad_clip);
    optimizer.step(backbone.params_mut(), &param_grads, lr);

    let total = total_loss(l_d, l_r, l_dscl, l_ascl, weights);
    Ok(StepRecord {
        step,
        lr,
        l_d,
        l_r,
        l_dscl,
        l_ascl,
        total,
    })
}
