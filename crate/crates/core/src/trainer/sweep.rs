//! Hyperparameter sweep: one full train + evaluate per grid point.

use serde::{Deserialize, Serialize};

use super::{rollout, train, RolloutOptions, TrainConfig};
use crate::corpus::DialogSession;
use crate::dbkit::EntityDb;
use crate::metrics::evaluate;
use crate::schema::Schema;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda1,
    Lambda2,
    Temperature,
}

impl SweepParam {
    pub fn parse(text: &str) -> Result<SweepParam> {
        match text {
            "lambda1" => Ok(SweepParam::Lambda1),
            "lambda2" => Ok(SweepParam::Lambda2),
            "T" | "temperature" => Ok(SweepParam::Temperature),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter '{other}' (expected lambda1|lambda2|T)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Lambda1 => "lambda1",
            SweepParam::Lambda2 => "lambda2",
            SweepParam::Temperature => "T",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub combined: f64,
}

/// Train once per grid value (in grid order) and evaluate the selected
/// checkpoint on `eval_sessions`.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    base: &TrainConfig,
    param: SweepParam,
    grid: &[f64],
    train_sessions: &[DialogSession],
    val_sessions: &[DialogSession],
    eval_sessions: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut config = base.clone();
        match param {
            SweepParam::Lambda1 => config.lambda1 = value,
            SweepParam::Lambda2 => config.lambda2 = value,
            SweepParam::Temperature => config.temperature = Some(value),
        }
        let artifacts = train(train_sessions, val_sessions, db, schema, &config, None)?;
        let model = match artifacts.best_model() {
            Ok((_, model)) => model,
            // No validation rows (validate_every = 0): fall back to final.
            Err(_) => artifacts.final_model.clone(),
        };
        let preds = rollout(
            eval_sessions,
            db,
            schema,
            &model,
            &artifacts.tokenizer,
            &RolloutOptions::default(),
        )?;
        let report = evaluate(&preds, eval_sessions, db, schema)?;
        rows.push(SweepRow {
            value,
            inform: report.inform,
            success: report.success,
            bleu: report.bleu,
            combined: report.combined,
        });
    }
    Ok(rows)
}
