//! Run directories: manifests, checksums, and consolidated report tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::losses::ObjectiveMode;
use crate::metrics::MetricReport;
use crate::trainer::{EpochMetrics, SweepRow, TrainConfig};
use crate::{Error, Result};

/// Everything needed to re-run a command bit-identically, plus the artifact
/// inventory. The timestamp is the only field allowed to differ between
/// reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_unix_secs: u64,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Input path -> sha256 of its bytes.
    pub input_checksums: IndexMap<String, String>,
    pub checkpoints: Vec<String>,
    pub best_checkpoint: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> RunManifest {
        RunManifest {
            tool_version: crate::TOOL_VERSION.to_string(),
            created_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            command: command.to_string(),
            seed,
            config,
            input_checksums: IndexMap::new(),
            checkpoints: Vec::new(),
            best_checkpoint: None,
            outputs: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let checksum = sha256_file(path)?;
        self.input_checksums
            .insert(path.display().to_string(), checksum);
        Ok(())
    }

    pub fn save(&self, run_dir: impl AsRef<Path>) -> Result<()> {
        let path = run_dir.as_ref().join("manifest.json");
        fs::write(
            &path,
            serde_json::to_string_pretty(self).expect("manifest serializes"),
        )
        .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(run_dir: impl AsRef<Path>) -> Result<RunManifest> {
        let path = run_dir.as_ref().join("manifest.json");
        let text =
            fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::MalformedLine {
            path: path.display().to_string(),
            line: e.line(),
            detail: e.to_string(),
        })
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sweep output file: the swept parameter plus its rows in grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub paired_cosine_state: f64,
    pub paired_cosine_act: f64,
    pub space_distance_state: f64,
    pub space_distance_act: f64,
}

fn fmt(value: f64) -> String {
    format!("{value:.4}")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Option<Vec<T>> {
    let text = fs::read_to_string(path).ok()?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).ok()?);
    }
    Some(out)
}

/// Ablation-table label for a run configuration.
pub fn ablation_label(config: &TrainConfig) -> &'static str {
    match config.mode {
        ObjectiveMode::Baseline => "baseline",
        _ => {
            if config.lambda1 == 0.0 && config.lambda2 == 0.0 {
                "baseline"
            } else if config.lambda1 == 0.0 {
                "w/o DSC"
            } else if config.lambda2 == 0.0 {
                "w/o ASC"
            } else {
                "full"
            }
        }
    }
}

/// Consolidate run directories into plot-ready TSV tables: `main.tsv`,
/// `ablation.tsv`, `buckets.tsv`, `sweep.tsv`, `analysis.tsv`. Missing
/// metrics render as `n/a`.
pub fn consolidate_report(run_dirs: &[PathBuf], out_dir: impl AsRef<Path>) -> Result<()> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let mut main = String::from(
        "run\tmode\tablation\tlambda1\tlambda2\tT\tseed\tinform\tsuccess\tbleu\tcombined\tact_f1\tjga\n",
    );
    let mut ablation = String::from("run\tablation\tinform\tsuccess\tbleu\tcombined\n");
    let mut buckets = String::from("run\tbucket\tsessions\tinform\tsuccess\n");
    let mut sweeps = String::from("run\tparam\tvalue\tinform\tsuccess\tbleu\tcombined\n");
    let mut analysis = String::from(
        "run\tpaired_cosine_state\tpaired_cosine_act\tspace_distance_state\tspace_distance_act\n",
    );

    for dir in run_dirs {
        let run = dir
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| dir.display().to_string());
        let config: Option<TrainConfig> = read_json(&dir.join("config.json"));
        let report: Option<MetricReport> = read_json(&dir.join("report.json"));
        let val: Option<Vec<EpochMetrics>> = read_jsonl(&dir.join("val_metrics.jsonl"));

        let na = "n/a".to_string();
        let (inform, success, bleu, combined, act_f1, jga) = match (&report, &val) {
            (Some(r), _) => (
                fmt(r.inform),
                fmt(r.success),
                fmt(r.bleu),
                fmt(r.combined),
                fmt(r.act_f1),
                fmt(r.jga),
            ),
            (None, Some(rows)) if !rows.is_empty() => {
                let r = rows.last().expect("non-empty");
                (
                    fmt(r.inform),
                    fmt(r.success),
                    fmt(r.bleu),
                    fmt(r.combined),
                    fmt(r.act_f1),
                    fmt(r.jga),
                )
            }
            _ => (na.clone(), na.clone(), na.clone(), na.clone(), na.clone(), na.clone()),
        };
        let (mode, label, l1, l2, temp, seed) = match &config {
            Some(c) => (
                c.mode.name().to_string(),
                ablation_label(c).to_string(),
                format!("{}", c.lambda1),
                format!("{}", c.lambda2),
                format!("{}", c.temperature()),
                format!("{}", c.seed),
            ),
            None => (na.clone(), na.clone(), na.clone(), na.clone(), na.clone(), na.clone()),
        };
        main.push_str(&format!(
            "{run}\t{mode}\t{label}\t{l1}\t{l2}\t{temp}\t{seed}\t{inform}\t{success}\t{bleu}\t{combined}\t{act_f1}\t{jga}\n"
        ));
        if config.is_some() {
            ablation.push_str(&format!(
                "{run}\t{label}\t{inform}\t{success}\t{bleu}\t{combined}\n"
            ));
        }
        if let Some(r) = &report {
            for row in &r.per_bucket {
                buckets.push_str(&format!(
                    "{run}\t{}\t{}\t{}\t{}\n",
                    row.label,
                    row.sessions,
                    fmt(row.inform),
                    fmt(row.success)
                ));
            }
        }
        if let Some(table) = read_json::<SweepTable>(&dir.join("sweep.json")) {
            for row in &table.rows {
                sweeps.push_str(&format!(
                    "{run}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    table.param,
                    row.value,
                    fmt(row.inform),
                    fmt(row.success),
                    fmt(row.bleu),
                    fmt(row.combined)
                ));
            }
        }
        if let Some(a) = read_json::<AnalysisReport>(&dir.join("analysis.json")) {
            analysis.push_str(&format!(
                "{run}\t{}\t{}\t{}\t{}\n",
                fmt(a.paired_cosine_state),
                fmt(a.paired_cosine_act),
                fmt(a.space_distance_state),
                fmt(a.space_distance_act)
            ));
        }
    }

    for (name, content) in [
        ("main.tsv", main),
        ("ablation.tsv", ablation),
        ("buckets.tsv", buckets),
        ("sweep.tsv", sweeps),
        ("analysis.tsv", analysis),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
