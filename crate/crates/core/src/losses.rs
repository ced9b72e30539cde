//! Objective functions: token-level generation cross-entropy, the point-wise
//! and group-wise in-batch contrastive kernels over pooled representations,
//! the similarity-only variant, and the weighted total.
//!
//! Each kernel comes in a value-only form (the spec'd operation) and a
//! `*_grad` form returning the analytic gradient w.r.t. every representation
//! row, which the trainer injects into backpropagation at the pooled nodes.
//! All kernels reduce over the batch with the arithmetic mean.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which objective shapes training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Generation losses only.
    Baseline,
    /// Point-wise context-state contrastive terms added.
    MarsP,
    /// Group-wise context-state contrastive terms added.
    MarsG,
    /// Similarity-only variant: pull paired cosines toward 1, no negatives.
    MarsVariant,
}

impl ObjectiveMode {
    pub fn parse(text: &str) -> Result<ObjectiveMode> {
        match text {
            "baseline" => Ok(ObjectiveMode::Baseline),
            "mars_p" => Ok(ObjectiveMode::MarsP),
            "mars_g" => Ok(ObjectiveMode::MarsG),
            "mars_variant" => Ok(ObjectiveMode::MarsVariant),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}' (expected baseline|mars_p|mars_g|mars_variant)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveMode::Baseline => "baseline",
            ObjectiveMode::MarsP => "mars_p",
            ObjectiveMode::MarsG => "mars_g",
            ObjectiveMode::MarsVariant => "mars_variant",
        }
    }
}

/// Weights on the two contrastive terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mode: ObjectiveMode,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::InvalidArgument(
                "contrastive weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One batch of pooled context rows paired with pooled state rows.
#[derive(Debug, Clone)]
pub struct ContrastiveBatch<'a> {
    /// N x d pooled context representations.
    pub contexts: ArrayView2<'a, f64>,
    /// N x d pooled state representations, row-aligned with `contexts`.
    pub states: ArrayView2<'a, f64>,
    pub temperature: f64,
}

impl<'a> ContrastiveBatch<'a> {
    pub fn new(
        contexts: ArrayView2<'a, f64>,
        states: ArrayView2<'a, f64>,
        temperature: f64,
    ) -> Result<Self> {
        if contexts.nrows() == 0 {
            return Err(Error::InvalidArgument("empty contrastive batch".into()));
        }
        if contexts.dim() != states.dim() {
            return Err(Error::InvalidArgument(format!(
                "context/state shape mismatch: {:?} vs {:?}",
                contexts.dim(),
                states.dim()
            )));
        }
        if !(temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            contexts,
            states,
            temperature,
        })
    }

    fn len(&self) -> usize {
        self.contexts.nrows()
    }
}

/// How the group-wise kernel picks its positive context index j != i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PositiveRule {
    /// j = (i + 1) mod N. Deterministic default.
    Cyclic,
    /// Explicit indices, one per batch row (each must differ from its row).
    Indices(Vec<usize>),
}

impl PositiveRule {
    fn resolve(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            PositiveRule::Cyclic => Ok((0..n).map(|i| (i + 1) % n).collect()),
            PositiveRule::Indices(idx) => {
                if idx.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "positive rule supplies {} indices for batch of {n}",
                        idx.len()
                    )));
                }
                for (i, &j) in idx.iter().enumerate() {
                    if j >= n || j == i {
                        return Err(Error::InvalidArgument(format!(
                            "positive index {j} invalid for row {i} in batch of {n}"
                        )));
                    }
                }
                Ok(idx.clone())
            }
        }
    }
}

/// Value plus analytic gradients of a contrastive kernel.
#[derive(Debug, Clone)]
pub struct ContrastiveGrad {
    pub value: f64,
    pub d_contexts: Array2<f64>,
    pub d_states: Array2<f64>,
}

/// Row norms, erroring on any exactly-zero row (cosine undefined).
fn row_norms(m: &ArrayView2<f64>, label: &str) -> Result<Vec<f64>> {
    m.axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                let _ = label;
                Err(Error::ZeroNormRow(i))
            } else {
                Ok(norm)
            }
        })
        .collect()
}

fn unit_rows(m: &ArrayView2<f64>, norms: &[f64]) -> Array2<f64> {
    let mut out = m.to_owned();
    for (mut row, &norm) in out.axis_iter_mut(Axis(0)).zip(norms) {
        row.mapv_inplace(|x| x / norm);
    }
    out
}

struct CosineTables {
    norms_c: Vec<f64>,
    norms_s: Vec<f64>,
    unit_c: Array2<f64>,
    unit_s: Array2<f64>,
    /// cc[(i, k)] = cos(c_i, c_k)
    cc: Array2<f64>,
    /// cs[(i, k)] = cos(c_i, s_k)
    cs: Array2<f64>,
}

fn cosine_tables(batch: &ContrastiveBatch) -> Result<CosineTables> {
    let norms_c = row_norms(&batch.contexts, "contexts")?;
    let norms_s = row_norms(&batch.states, "states")?;
    let unit_c = unit_rows(&batch.contexts, &norms_c);
    let unit_s = unit_rows(&batch.states, &norms_s);
    let cc = unit_c.dot(&unit_c.t());
    let cs = unit_c.dot(&unit_s.t());
    Ok(CosineTables {
        norms_c,
        norms_s,
        unit_c,
        unit_s,
        cc,
        cs,
    })
}

/// Shared InfoNCE-style core. The denominator for anchor i sums
/// exp(cos(c_i, c_k)/T) over k != i and exp(cos(c_i, s_k)/T) over all k; the
/// numerator is exp(cos(c_i, s_i)/T) for the point-wise form and
/// exp(cos(c_i, c_j)/T) for the group-wise form. Row maxima are subtracted
/// before exponentiation; per-anchor losses reduce by the mean, and the
/// returned weight matrices are d(mean loss)/d cos.
fn infonce(
    batch: &ContrastiveBatch,
    positives: Option<&[usize]>,
) -> Result<(f64, CosineTables, Array2<f64>, Array2<f64>)> {
    let n = batch.len();
    let t = batch.temperature;
    let tables = cosine_tables(batch)?;
    let mut w_cc = Array2::<f64>::zeros((n, n));
    let mut w_cs = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for k in 0..n {
            if k != i {
                max = max.max(tables.cc[(i, k)] / t);
            }
            max = max.max(tables.cs[(i, k)] / t);
        }
        let numerator_logit = match positives {
            None => tables.cs[(i, i)] / t,
            Some(idx) => tables.cc[(i, idx[i])] / t,
        };
        max = max.max(numerator_logit);
        let mut den = 0.0;
        for k in 0..n {
            if k != i {
                den += ((tables.cc[(i, k)] / t) - max).exp();
            }
            den += ((tables.cs[(i, k)] / t) - max).exp();
        }
        total += den.ln() - (numerator_logit - max);
        // d loss_i / d logit = softmax weight; the numerator logit takes -1.
        for k in 0..n {
            if k != i {
                w_cc[(i, k)] += ((tables.cc[(i, k)] / t) - max).exp() / den;
            }
            w_cs[(i, k)] += ((tables.cs[(i, k)] / t) - max).exp() / den;
        }
        match positives {
            None => w_cs[(i, i)] -= 1.0,
            Some(idx) => w_cc[(i, idx[i])] -= 1.0,
        }
    }
    let scale = 1.0 / (n as f64 * t);
    w_cc.mapv_inplace(|x| x * scale);
    w_cs.mapv_inplace(|x| x * scale);
    Ok((total / n as f64, tables, w_cc, w_cs))
}

/// Chain d(loss)/d(cosine) weights through the cosine into the raw rows.
fn chain_cosine_grads(
    batch: &ContrastiveBatch,
    tables: &CosineTables,
    w_cc: &Array2<f64>,
    w_cs: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let n = batch.len();
    let d = batch.contexts.ncols();
    let mut d_contexts = Array2::<f64>::zeros((n, d));
    let mut d_states = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for k in 0..n {
            let w = w_cc[(i, k)];
            if w != 0.0 && i != k {
                let cos = tables.cc[(i, k)];
                for col in 0..d {
                    let ui = tables.unit_c[(i, col)];
                    let uk = tables.unit_c[(k, col)];
                    d_contexts[(i, col)] += w * (uk - cos * ui) / tables.norms_c[i];
                    d_contexts[(k, col)] += w * (ui - cos * uk) / tables.norms_c[k];
                }
            }
            let w = w_cs[(i, k)];
            if w != 0.0 {
                let cos = tables.cs[(i, k)];
                for col in 0..d {
                    let ui = tables.unit_c[(i, col)];
                    let sk = tables.unit_s[(k, col)];
                    d_contexts[(i, col)] += w * (sk - cos * ui) / tables.norms_c[i];
                    d_states[(k, col)] += w * (ui - cos * sk) / tables.norms_s[k];
                }
            }
        }
    }
    (d_contexts, d_states)
}

/// Point-wise contrastive loss: each context is pulled toward its own paired
/// state; the other contexts and all states in the batch are negatives (the
/// paired state appears in the denominator too). N = 1 yields exactly 0.
pub fn pointwise_loss(batch: &ContrastiveBatch) -> Result<f64> {
    Ok(infonce(batch, None)?.0)
}

pub fn pointwise_loss_grad(batch: &ContrastiveBatch) -> Result<ContrastiveGrad> {
    let (value, tables, w_cc, w_cs) = infonce(batch, None)?;
    let (d_contexts, d_states) = chain_cosine_grads(batch, &tables, &w_cc, &w_cs);
    Ok(ContrastiveGrad {
        value,
        d_contexts,
        d_states,
    })
}

/// Group-wise contrastive loss: the positive for context i is another
/// context j != i, while every state in the batch stays a negative, pushing
/// the context group away from the state group. Requires N >= 2.
pub fn groupwise_loss(batch: &ContrastiveBatch, rule: &PositiveRule) -> Result<f64> {
    let positives = require_pair(batch, rule)?;
    Ok(infonce(batch, Some(&positives))?.0)
}

pub fn groupwise_loss_grad(
    batch: &ContrastiveBatch,
    rule: &PositiveRule,
) -> Result<ContrastiveGrad> {
    let positives = require_pair(batch, rule)?;
    let (value, tables, w_cc, w_cs) = infonce(batch, Some(&positives))?;
    let (d_contexts, d_states) = chain_cosine_grads(batch, &tables, &w_cc, &w_cs);
    Ok(ContrastiveGrad {
        value,
        d_contexts,
        d_states,
    })
}

fn require_pair(batch: &ContrastiveBatch, rule: &PositiveRule) -> Result<Vec<usize>> {
    if batch.len() < 2 {
        return Err(Error::InvalidArgument(
            "group-wise loss needs a batch of at least 2 (no valid positive otherwise)".into(),
        ));
    }
    rule.resolve(batch.len())
}

/// Similarity-only variant: mean over i of (1 - cos(c_i, s_i)).
pub fn variant_loss(batch: &ContrastiveBatch) -> Result<f64> {
    Ok(variant_loss_grad(batch)?.value)
}

pub fn variant_loss_grad(batch: &ContrastiveBatch) -> Result<ContrastiveGrad> {
    let n = batch.len();
    let d = batch.contexts.ncols();
    let tables = cosine_tables(batch)?;
    let mut value = 0.0;
    let mut d_contexts = Array2::<f64>::zeros((n, d));
    let mut d_states = Array2::<f64>::zeros((n, d));
    let w = -1.0 / n as f64;
    for i in 0..n {
        let cos = tables.cs[(i, i)];
        value += 1.0 - cos;
        for col in 0..d {
            let ui = tables.unit_c[(i, col)];
            let si = tables.unit_s[(i, col)];
            d_contexts[(i, col)] += w * (si - cos * ui) / tables.norms_c[i];
            d_states[(i, col)] += w * (ui - cos * si) / tables.norms_s[i];
        }
    }
    Ok(ContrastiveGrad {
        value: value / n as f64,
        d_contexts,
        d_states,
    })
}

/// Dispatch the mode's contrastive kernel; `None` for baseline.
pub fn contrastive_grad(
    mode: ObjectiveMode,
    batch: &ContrastiveBatch,
    rule: &PositiveRule,
) -> Result<Option<ContrastiveGrad>> {
    match mode {
        ObjectiveMode::Baseline => Ok(None),
        ObjectiveMode::MarsP => pointwise_loss_grad(batch).map(Some),
        ObjectiveMode::MarsG => groupwise_loss_grad(batch, rule).map(Some),
        ObjectiveMode::MarsVariant => variant_loss_grad(batch).map(Some),
    }
}

/// Mean token-level negative log-likelihood over non-pad target positions.
/// `logits` is one row per target position.
pub fn generation_loss(logits: ArrayView2<f64>, targets: &[u32], pad_id: u32) -> Result<f64> {
    Ok(generation_loss_grad(logits, targets, pad_id)?.0)
}

/// Loss plus d(loss)/d(logits).
pub fn generation_loss_grad(
    logits: ArrayView2<f64>,
    targets: &[u32],
    pad_id: u32,
) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "logits rows {} != targets {}",
            logits.nrows(),
            targets.len()
        )));
    }
    let vocab = logits.ncols();
    let valid: Vec<usize> = targets
        .iter()
        .enumerate()
        .filter(|(_, &t)| t != pad_id)
        .map(|(i, _)| i)
        .collect();
    if valid.is_empty() {
        return Err(Error::InvalidArgument(
            "all target positions are padding".into(),
        ));
    }
    let inv = 1.0 / valid.len() as f64;
    let mut grad = Array2::<f64>::zeros(logits.dim());
    let mut total = 0.0;
    for &i in &valid {
        let target = targets[i] as usize;
        if target >= vocab {
            return Err(Error::InvalidArgument(format!(
                "target id {target} out of vocabulary {vocab}"
            )));
        }
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut den = 0.0;
        for &x in row.iter() {
            den += (x - max).exp();
        }
        total += den.ln() - (row[target] - max);
        for (j, &x) in row.iter().enumerate() {
            grad[(i, j)] = ((x - max).exp() / den) * inv;
        }
        grad[(i, target)] -= inv;
    }
    Ok((total * inv, grad))
}

/// Weighted total objective: baseline adds the two generation losses;
/// contrastive modes add their weighted terms.
pub fn total_loss(l_d: f64, l_r: f64, l_dscl: f64, l_ascl: f64, weights: &LossWeights) -> f64 {
    match weights.mode {
        ObjectiveMode::Baseline => l_d + l_r,
        _ => l_d + weights.lambda1 * l_dscl + l_r + weights.lambda2 * l_ascl,
    }
}
