//! A small define-by-run reverse-mode autodiff tape over `f64` matrices.
//! Every value is a 2-D array; vectors are 1 x d rows and scalars 1 x 1.
//! The op set is exactly what the transformer backbone needs. Backward
//! accepts seed gradients on arbitrary nodes, which lets the trainer combine
//! in-graph generation losses with externally computed contrastive gradients
//! on the pooled representation nodes in one pass.

use ndarray::{Array2, Axis};

use crate::losses;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    /// Elementwise sum of two same-shape nodes.
    Add(NodeId, NodeId),
    /// m x n plus a broadcast 1 x n row.
    AddRow(NodeId, NodeId),
    /// Elementwise product with a constant matrix (dropout masks).
    MulConst(NodeId, Array2<f64>),
    /// Plus a constant matrix (attention masks).
    AddConst(NodeId),
    Scale(NodeId, f64),
    MatMul(NodeId, NodeId),
    /// a . b^T without materializing the transpose.
    MatMulNT(NodeId, NodeId),
    Relu(NodeId),
    RowSoftmax(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        /// Per-row (mean, 1/std) captured at forward time.
        cache: Vec<(f64, f64)>,
    },
    /// Rows of `table` selected by token id.
    Gather { table: NodeId, ids: Vec<usize> },
    /// 1 x d mean of the selected rows.
    MeanPoolRows { x: NodeId, rows: Vec<usize> },
    SliceCols { x: NodeId, start: usize },
    /// Horizontal concatenation; column widths recorded per part.
    ConcatCols { parts: Vec<(NodeId, usize)> },
    /// 1 x 1 mean token NLL; the logits gradient is captured at forward time.
    CrossEntropy { logits: NodeId, grad: Array2<f64> },
    /// 1 x 1 arithmetic mean of 1 x 1 scalars.
    AvgScalars(Vec<NodeId>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn take(&mut self, id: NodeId) -> Option<Array2<f64>> {
        self.grads[id.0].take()
    }

    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads[id.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let value = &self.nodes[a.0].value + &self.nodes[row.0].value;
        self.push(value, Op::AddRow(a, row))
    }

    pub fn mul_const(&mut self, a: NodeId, mask: Array2<f64>) -> NodeId {
        let value = &self.nodes[a.0].value * &mask;
        self.push(value, Op::MulConst(a, mask))
    }

    pub fn add_const(&mut self, a: NodeId, c: &Array2<f64>) -> NodeId {
        let value = &self.nodes[a.0].value + c;
        self.push(value, Op::AddConst(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x * c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value.t());
        self.push(value, Op::MatMulNT(a, b))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let mut value = self.nodes[a.0].value.clone();
        for mut row in value.axis_iter_mut(Axis(0)) {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(value, Op::RowSoftmax(a))
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId, eps: f64) -> NodeId {
        let input = &self.nodes[x.0].value;
        let d = input.ncols() as f64;
        let mut value = input.clone();
        let mut cache = Vec::with_capacity(input.nrows());
        for mut row in value.axis_iter_mut(Axis(0)) {
            let mean = row.sum() / d;
            let var = row.fold(0.0, |acc, &v| acc + (v - mean) * (v - mean)) / d;
            let inv_std = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv_std);
            cache.push((mean, inv_std));
        }
        let gain_row = &self.nodes[gain.0].value;
        let bias_row = &self.nodes[bias.0].value;
        let value = &value * gain_row + bias_row;
        self.push(value, Op::LayerNorm { x, gain, bias, cache })
    }

    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let src = &self.nodes[table.0].value;
        let mut value = Array2::zeros((ids.len(), src.ncols()));
        for (i, &id) in ids.iter().enumerate() {
            value.row_mut(i).assign(&src.row(id));
        }
        self.push(
            value,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn mean_pool_rows(&mut self, x: NodeId, rows: &[usize]) -> NodeId {
        assert!(!rows.is_empty(), "mean pool needs at least one row");
        let src = &self.nodes[x.0].value;
        let mut value = Array2::zeros((1, src.ncols()));
        for &r in rows {
            value.row_mut(0).scaled_add(1.0, &src.row(r));
        }
        value.mapv_inplace(|v| v / rows.len() as f64);
        self.push(
            value,
            Op::MeanPoolRows {
                x,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let src = &self.nodes[x.0].value;
        let value = src.slice(ndarray::s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let views: Vec<_> = parts.iter().map(|p| self.nodes[p.0].value.view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("compatible row counts");
        let widths = parts
            .iter()
            .map(|p| (*p, self.nodes[p.0].value.ncols()))
            .collect();
        self.push(value, Op::ConcatCols { parts: widths })
    }

    /// Mean token NLL over non-pad positions of a teacher-forced sequence.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[u32], pad_id: u32) -> Result<NodeId> {
        let (loss, grad) =
            losses::generation_loss_grad(self.nodes[logits.0].value.view(), targets, pad_id)?;
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy { logits, grad },
        ))
    }

    pub fn avg_scalars(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "mean of no scalars");
        let sum: f64 = parts.iter().map(|p| self.nodes[p.0].value[(0, 0)]).sum();
        self.push(
            Array2::from_elem((1, 1), sum / parts.len() as f64),
            Op::AvgScalars(parts.to_vec()),
        )
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id.0].value;
        debug_assert_eq!(v.dim(), (1, 1));
        v[(0, 0)]
    }

    /// Reverse pass from explicit seed gradients. Multiple seeds sum, which
    /// is how independently weighted loss terms combine.
    pub fn backward(&self, seeds: Vec<(NodeId, Array2<f64>)>) -> Result<Gradients> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (id, seed) in seeds {
            if seed.dim() != self.nodes[id.0].value.dim() {
                return Err(Error::InvalidArgument(format!(
                    "seed gradient shape {:?} does not match node shape {:?}",
                    seed.dim(),
                    self.nodes[id.0].value.dim()
                )));
            }
            accumulate(&mut grads[id.0], seed);
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.clone());
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads[row.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads[a.0], g.clone());
                }
                Op::MulConst(a, mask) => {
                    accumulate(&mut grads[a.0], &g * mask);
                }
                Op::AddConst(a) => {
                    accumulate(&mut grads[a.0], g.clone());
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads[a.0], g.mapv(|x| x * c));
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.nodes[b.0].value.t());
                    let db = self.nodes[a.0].value.t().dot(&g);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMulNT(a, b) => {
                    let da = g.dot(&self.nodes[b.0].value);
                    let db = g.t().dot(&self.nodes[a.0].value);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Relu(a) => {
                    let mask = self.nodes[a.0].value.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                    accumulate(&mut grads[a.0], &g * &mask);
                }
                Op::RowSoftmax(a) => {
                    let y = &self.nodes[idx].value;
                    let mut dx = &g * y;
                    for (mut row, (g_row, y_row)) in dx
                        .axis_iter_mut(Axis(0))
                        .zip(g.axis_iter(Axis(0)).zip(y.axis_iter(Axis(0))))
                    {
                        let dot = g_row.dot(&y_row);
                        row.zip_mut_with(&y_row, |d, &yv| *d -= dot * yv);
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::LayerNorm { x, gain, bias, cache } => {
                    let input = &self.nodes[x.0].value;
                    let gain_row = &self.nodes[gain.0].value;
                    let d = input.ncols();
                    let mut dx = Array2::zeros(input.dim());
                    let mut dgain = Array2::zeros((1, d));
                    let mut dbias = Array2::zeros((1, d));
                    for (r, (&(mean, inv_std), g_row)) in
                        cache.iter().zip(g.axis_iter(Axis(0))).enumerate()
                    {
                        let x_row = input.row(r);
                        // dxhat, plus parameter grads
                        let mut dxhat = vec![0.0; d];
                        let mut sum_dxhat = 0.0;
                        let mut sum_dxhat_xhat = 0.0;
                        for c in 0..d {
                            let xhat = (x_row[c] - mean) * inv_std;
                            dgain[(0, c)] += g_row[c] * xhat;
                            dbias[(0, c)] += g_row[c];
                            let dh = g_row[c] * gain_row[(0, c)];
                            dxhat[c] = dh;
                            sum_dxhat += dh;
                            sum_dxhat_xhat += dh * xhat;
                        }
                        let inv_d = 1.0 / d as f64;
                        for c in 0..d {
                            let xhat = (x_row[c] - mean) * inv_std;
                            dx[(r, c)] = inv_std
                                * (dxhat[c] - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat);
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[gain.0], dgain);
                    accumulate(&mut grads[bias.0], dbias);
                }
                Op::Gather { table, ids } => {
                    let mut dt = Array2::zeros(self.nodes[table.0].value.dim());
                    for (i, &id) in ids.iter().enumerate() {
                        dt.row_mut(id).scaled_add(1.0, &g.row(i));
                    }
                    accumulate(&mut grads[table.0], dt);
                }
                Op::MeanPoolRows { x, rows } => {
                    let mut dx = Array2::zeros(self.nodes[x.0].value.dim());
                    let w = 1.0 / rows.len() as f64;
                    for &r in rows {
                        dx.row_mut(r).scaled_add(w, &g.row(0));
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::SliceCols { x, start } => {
                    let mut dx = Array2::zeros(self.nodes[x.0].value.dim());
                    dx.slice_mut(ndarray::s![.., *start..start + g.ncols()])
                        .assign(&g);
                    accumulate(&mut grads[x.0], dx);
                }
                Op::ConcatCols { parts } => {
                    let mut offset = 0;
                    for (part, width) in parts {
                        let dg = g.slice(ndarray::s![.., offset..offset + width]).to_owned();
                        accumulate(&mut grads[part.0], dg);
                        offset += width;
                    }
                }
                Op::CrossEntropy { logits, grad } => {
                    accumulate(&mut grads[logits.0], grad.mapv(|x| x * g[(0, 0)]));
                }
                Op::AvgScalars(parts) => {
                    let w = g[(0, 0)] / parts.len() as f64;
                    for part in parts {
                        accumulate(&mut grads[part.0], Array2::from_elem((1, 1), w));
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(existing) => *existing += &delta,
        None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    /// Central finite differences of sum(f(inputs)) against backward grads.
    fn check_grads(build: impl Fn(&mut Tape, &[NodeId]) -> NodeId, inputs: &[Array2<f64>]) {
        let h = 1e-5;
        let eval = |perturbed: &[Array2<f64>]| {
            let mut tape = Tape::new();
            let ids: Vec<NodeId> = perturbed.iter().map(|v| tape.leaf(v.clone())).collect();
            let out = build(&mut tape, &ids);
            tape.value(out).sum()
        };
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = inputs.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = build(&mut tape, &ids);
        let seed = Array2::ones(tape.value(out).dim());
        let mut grads = tape.backward(vec![(out, seed)]).unwrap();
        for (which, (slot, input)) in ids.iter().zip(inputs).enumerate() {
            let analytic = grads
                .take(*slot)
                .unwrap_or_else(|| Array2::zeros(input.dim()));
            for r in 0..input.nrows() {
                for c in 0..input.ncols() {
                    let mut plus = inputs.to_vec();
                    plus[which][(r, c)] += h;
                    let mut minus = inputs.to_vec();
                    minus[which][(r, c)] -= h;
                    let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let denom = analytic[(r, c)].abs().max(numeric.abs()).max(1e-4);
                    assert!(
                        (analytic[(r, c)] - numeric).abs() / denom < 1e-4,
                        "grad mismatch input {which} at ({r},{c}): analytic {} vs numeric {}",
                        analytic[(r, c)],
                        numeric
                    );
                }
            }
        }
    }

    #[test]
    fn matmul_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&mut rng, 3, 4);
        let b = random(&mut rng, 4, 2);
        check_grads(|t, ids| t.matmul(ids[0], ids[1]), &[a, b]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 3, 4);
        let b = random(&mut rng, 2, 4);
        check_grads(|t, ids| t.matmul_nt(ids[0], ids[1]), &[a, b]);
    }

    #[test]
    fn softmax_and_relu_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&mut rng, 3, 5);
        check_grads(
            |t, ids| {
                let s = t.row_softmax(ids[0]);
                // Compose with a nonlinearity so the seed is not uniform.
                let sq = t.mul_const(s, Array2::from_shape_fn((3, 5), |(r, c)| (r + c) as f64));
                sq
            },
            &[x],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&mut rng, 2, 6);
        check_grads(|t, ids| t.relu(ids[0]), &[x]);
    }

    #[test]
    fn layer_norm_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 3, 4);
        let gain = random(&mut rng, 1, 4);
        let bias = random(&mut rng, 1, 4);
        check_grads(
            |t, ids| t.layer_norm(ids[0], ids[1], ids[2], 1e-5),
            &[x, gain, bias],
        );
    }

    #[test]
    fn gather_pool_slice_concat_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let table = random(&mut rng, 5, 3);
        check_grads(|t, ids| t.gather(ids[0], &[1, 1, 4, 0]), &[table]);
        let x = random(&mut rng, 4, 3);
        check_grads(|t, ids| t.mean_pool_rows(ids[0], &[0, 2]), &[x]);
        let x = random(&mut rng, 3, 6);
        check_grads(
            |t, ids| {
                let left = t.slice_cols(ids[0], 0, 3);
                let right = t.slice_cols(ids[0], 3, 3);
                let joined = t.concat_cols(&[right, left]);
                t.relu(joined)
            },
            &[x],
        );
    }

    #[test]
    fn cross_entropy_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let logits = random(&mut rng, 4, 5);
        check_grads(
            |t, ids| t.cross_entropy(ids[0], &[1, 3, 0, 2], 99).unwrap(),
            &[logits],
        );
    }

    #[test]
    fn seeded_backward_sums_terms() {
        let mut tape = Tape::new();
        let x = tape.leaf(array![[1.0, 2.0]]);
        let doubled = tape.scale(x, 2.0);
        let tripled = tape.scale(x, 3.0);
        let mut grads = tape
            .backward(vec![
                (doubled, Array2::ones((1, 2))),
                (tripled, Array2::ones((1, 2))),
            ])
            .unwrap();
        let gx = grads.take(x).unwrap();
        assert_abs_diff_eq!(gx[(0, 0)], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gx[(0, 1)], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn avg_scalars_value_and_grad() {
        let mut tape = Tape::new();
        let a = tape.leaf(Array2::from_elem((1, 1), 2.0));
        let b = tape.leaf(Array2::from_elem((1, 1), 4.0));
        let mean = tape.avg_scalars(&[a, b]);
        assert_abs_diff_eq!(tape.scalar(mean), 3.0, epsilon = 1e-12);
        let mut grads = tape
            .backward(vec![(mean, Array2::ones((1, 1)))])
            .unwrap();
        assert_abs_diff_eq!(grads.take(a).unwrap()[(0, 0)], 0.5, epsilon = 1e-12);
    }
}
