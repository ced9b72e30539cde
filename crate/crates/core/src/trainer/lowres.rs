//! Low-resource protocol: subsample x seed grid of full train/rollout/
//! evaluate runs with per-preset means.

use serde::{Deserialize, Serialize};

use super::{rollout, train, RolloutOptions, TrainConfig};
use crate::corpus::{subsample, DialogSession, SubsampleSpec};
use crate::dbkit::EntityDb;
use crate::metrics::evaluate;
use crate::schema::Schema;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowResRow {
    pub preset: String,
    pub seed: u64,
    pub sessions: usize,
    pub inform: f64,
    pub success: f64,
    pub bleu: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LowResTable {
    pub runs: Vec<LowResRow>,
    /// One row per preset: metric means over seeds (seed column unused).
    pub means: Vec<LowResRow>,
}

/// For each preset and seed: subsample the training pool, train, roll out on
/// the test sessions, evaluate. The seed drives both the subsample and the
/// training run.
#[allow(clippy::too_many_arguments)]
pub fn lowres(
    pool: &[DialogSession],
    val_sessions: &[DialogSession],
    test_sessions: &[DialogSession],
    db: &EntityDb,
    schema: &Schema,
    base: &TrainConfig,
    presets: &[SubsampleSpec],
    seeds: &[u64],
) -> Result<LowResTable> {
    if presets.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "low-resource protocol needs at least one preset and one seed".into(),
        ));
    }
    let mut table = LowResTable::default();
    for preset in presets {
        let mut mean = LowResRow {
            preset: preset.label(),
            seed: 0,
            sessions: 0,
            inform: 0.0,
            success: 0.0,
            bleu: 0.0,
            combined: 0.0,
        };
        for &seed in seeds {
            let selected = subsample(pool, *preset, seed)?;
            let mut config = base.clone();
            config.seed = seed;
            let artifacts = train(&selected, val_sessions, db, schema, &config, None)?;
            let model = match artifacts.best_model() {
                Ok((_, model)) => model,
                Err(_) => artifacts.final_model.clone(),
            };
            let preds = rollout(
                test_sessions,
                db,
                schema,
                &model,
                &artifacts.tokenizer,
                &RolloutOptions::default(),
            )?;
            let report = evaluate(&preds, test_sessions, db, schema)?;
            let row = LowResRow {
                preset: preset.label(),
                seed,
                sessions: selected.len(),
                inform: report.inform,
                success: report.success,
                bleu: report.bleu,
                combined: report.combined,
            };
            mean.sessions = row.sessions;
            mean.inform += row.inform;
            mean.success += row.success;
            mean.bleu += row.bleu;
            mean.combined += row.combined;
            table.runs.push(row);
        }
        let n = seeds.len() as f64;
        mean.inform /= n;
        mean.success /= n;
        mean.bleu /= n;
        mean.combined /= n;
        table.means.push(mean);
    }
    Ok(table)
}
