//! Minimal define-by-run reverse-mode differentiation engine. A [`Tape`]
//! records operations as they execute; [`Tape::backward`] walks the tape in
//! reverse and accumulates exact gradients on every `requires_grad` leaf.
//!
//! The graph is rebuilt each training step. Values are f64; reductions
//! accumulate in f64 as well. All gradient reductions iterate in a fixed
//! order, so results are identical regardless of the worker count.

mod adam;
mod check;
mod ops;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use check::{finite_difference_check, FdReport};

use crate::error::{NafError, Result};
use crate::exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    MatMul(TensorId, TensorId),
    /// [B,N] + [N] broadcast over the batch axis.
    AddRow(TensorId, TensorId),
    Add(TensorId, TensorId),
    Mul(TensorId, TensorId),
    LeakyRelu(TensorId, f64),
    /// rows of a [R,D] table selected by index; duplicate rows accumulate
    /// duplicate gradient contributions.
    GatherRows(TensorId, Vec<usize>),
    /// Concatenation along the last axis of 2-D tensors.
    Concat(Vec<TensorId>),
    Sum(TensorId),
    Mean(TensorId),
    /// Mean squared error against a constant target.
    Mse(TensorId, Vec<f64>),
    /// Nadaraya-Watson grid interpolation; see `ops::grid_query`.
    GridQuery {
        features: TensorId,
        bandwidths: TensorId,
        /// Cached normalized kernel weights, row-major [n_query, n_points].
        weights: Vec<f64>,
        /// Cached squared query-to-point distances, same layout.
        sq_dists: Vec<f64>,
    },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
    pub op: Op,
    pub needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: TensorId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn values(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].values
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    /// Registers a leaf tensor. `needs_grad` marks trainable parameters.
    pub fn leaf(&mut self, values: Vec<f64>, shape: Vec<usize>, needs_grad: bool) -> TensorId {
        assert_eq!(
            values.len(),
            shape.iter().product::<usize>(),
            "leaf value count must match shape"
        );
        self.push(values, shape, Op::Leaf, needs_grad)
    }

    pub(crate) fn push(
        &mut self,
        values: Vec<f64>,
        shape: Vec<usize>,
        op: Op,
        needs_grad: bool,
    ) -> TensorId {
        self.nodes.push(Node {
            values,
            shape,
            op,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    pub(crate) fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Reverse-mode gradient accumulation from a scalar loss.
    pub fn backward(&self, loss: TensorId) -> Result<Gradients> {
        if self.nodes[loss.0].values.len() != 1 {
            return Err(NafError::InvalidInput(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(grad) = grads[i].take() else {
                continue;
            };
            self.backprop_node(i, &grad, &mut grads);
            grads[i] = Some(grad);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Vec<f64>>],
        id: TensorId,
        contribution: impl FnOnce(&mut [f64]),
    ) {
        if !self.needs(id) {
            return;
        }
        let slot = grads[id.0].get_or_insert_with(|| vec![0.0; self.nodes[id.0].values.len()]);
        contribution(slot);
    }

    fn backprop_node(&self, i: usize, grad: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => self.backprop_matmul(*a, *b, grad, grads),
            Op::AddRow(a, b) => {
                let (rows, cols) = (self.shape(*a)[0], self.shape(*a)[1]);
                self.accumulate(grads, *a, |g| {
                    for (gi, &go) in g.iter_mut().zip(grad) {
                        *gi += go;
                    }
                });
                self.accumulate(grads, *b, |g| {
                    for r in 0..rows {
                        for c in 0..cols {
                            g[c] += grad[r * cols + c];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for id in [*a, *b] {
                    self.accumulate(grads, id, |g| {
                        for (gi, &go) in g.iter_mut().zip(grad) {
                            *gi += go;
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.nodes[a.0].values, &self.nodes[b.0].values);
                self.accumulate(grads, *a, |g| {
                    for k in 0..g.len() {
                        g[k] += grad[k] * bv[k];
                    }
                });
                self.accumulate(grads, *b, |g| {
                    for k in 0..g.len() {
                        g[k] += grad[k] * av[k];
                    }
                });
            }
            Op::LeakyRelu(a, slope) => {
                let av = &self.nodes[a.0].values;
                let slope = *slope;
                self.accumulate(grads, *a, |g| {
                    for k in 0..g.len() {
                        g[k] += grad[k] * if av[k] > 0.0 { 1.0 } else { slope };
                    }
                });
            }
            Op::GatherRows(table, indices) => {
                let dim = self.shape(*table)[1];
                self.accumulate(grads, *table, |g| {
                    for (b, &row) in indices.iter().enumerate() {
                        for d in 0..dim {
                            g[row * dim + d] += grad[b * dim + d];
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let rows = self.shape(TensorId(i))[0];
                let total = self.shape(TensorId(i))[1];
                let mut offset = 0;
                for &part in parts {
                    let cols = self.shape(part)[1];
                    self.accumulate(grads, part, |g| {
                        for r in 0..rows {
                            for c in 0..cols {
                                g[r * cols + c] += grad[r * total + offset + c];
                            }
                        }
                    });
                    offset += cols;
                }
            }
            Op::Sum(a) => {
                self.accumulate(grads, *a, |g| {
                    for gi in g.iter_mut() {
                        *gi += grad[0];
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.nodes[a.0].values.len() as f64;
                self.accumulate(grads, *a, |g| {
                    for gi in g.iter_mut() {
                        *gi += grad[0] / n;
                    }
                });
            }
            Op::Mse(pred, target) => {
                let pv = &self.nodes[pred.0].values;
                let n = pv.len() as f64;
                self.accumulate(grads, *pred, |g| {
                    for k in 0..g.len() {
                        g[k] += grad[0] * 2.0 * (pv[k] - target[k]) / n;
                    }
                });
            }
            Op::GridQuery {
                features,
                bandwidths,
                weights,
                sq_dists,
            } => {
                self.backprop_grid_query(*features, *bandwidths, weights, sq_dists, grad, grads);
            }
        }
    }

    fn backprop_matmul(
        &self,
        a: TensorId,
        b: TensorId,
        grad: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let (rows, inner) = (self.shape(a)[0], self.shape(a)[1]);
        let cols = self.shape(b)[1];
        let (av, bv) = (&self.nodes[a.0].values, &self.nodes[b.0].values);
        // dA = G * B^T, independent per output row.
        self.accumulate(grads, a, |g| {
            exec::for_each_chunk_mut(g, inner, |r, row| {
                let grow = &grad[r * cols..(r + 1) * cols];
                for k in 0..inner {
                    let brow = &bv[k * cols..(k + 1) * cols];
                    let mut acc = 0.0;
                    for c in 0..cols {
                        acc += grow[c] * brow[c];
                    }
                    row[k] += acc;
                }
            });
        });
        // dB = A^T * G, independent per output row (fixed batch order inside).
        self.accumulate(grads, b, |g| {
            exec::for_each_chunk_mut(g, cols, |k, row| {
                for r in 0..rows {
                    let x = av[r * inner + k];
                    if x == 0.0 {
                        continue;
                    }
                    let grow = &grad[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        row[c] += x * grow[c];
                    }
                }
            });
        });
    }

    fn backprop_grid_query(
        &self,
        features: TensorId,
        bandwidths: TensorId,
        weights: &[f64],
        sq_dists: &[f64],
        grad: &[f64],
        grads: &mut [Option<Vec<f64>>],
    ) {
        let (n_points, dim) = (self.shape(features)[0], self.shape(features)[1]);
        let n_query = weights.len() / n_points;
        let fv = &self.nodes[features.0].values;
        let sv = &self.nodes[bandwidths.0].values;
        // d out[q,d] / d F[p,d] = w[q,p]
        self.accumulate(grads, features, |g| {
            exec::for_each_chunk_mut(g, dim, |p, row| {
                for q in 0..n_query {
                    let w = weights[q * n_points + p];
                    if w == 0.0 {
                        continue;
                    }
                    let grow = &grad[q * dim..(q + 1) * dim];
                    for d in 0..dim {
                        row[d] += w * grow[d];
                    }
                }
            });
        });
        // Bandwidth gradient through the normalized kernel weights:
        // dk_p/dsigma_p = k_p * r_p / sigma_p^3 and
        // dL/dk_p = (a_p - sum_j w_j a_j) / S with a_p = g . F[p].
        // Using k_p = w_p * S the S factors cancel:
        // dL/dsigma_p = w_p * (a_p - abar) * r_p / sigma_p^3.
        self.accumulate(grads, bandwidths, |g| {
            for q in 0..n_query {
                let grow = &grad[q * dim..(q + 1) * dim];
                let wrow = &weights[q * n_points..(q + 1) * n_points];
                let rrow = &sq_dists[q * n_points..(q + 1) * n_points];
                let mut abar = 0.0;
                let mut a = vec![0.0f64; n_points];
                for p in 0..n_points {
                    if wrow[p] == 0.0 {
                        continue;
                    }
                    let frow = &fv[p * dim..(p + 1) * dim];
                    let mut dot = 0.0;
                    for d in 0..dim {
                        dot += grow[d] * frow[d];
                    }
                    a[p] = dot;
                    abar += wrow[p] * dot;
                }
                for p in 0..n_points {
                    if wrow[p] == 0.0 {
                        continue;
                    }
                    let sigma = sv[p];
                    g[p] += wrow[p] * (a[p] - abar) * rrow[p] / (sigma * sigma * sigma);
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1.0, -2.0, 3.0], vec![1, 3], true);
        let loss = tape.sum(x);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn elementwise_square_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1.0, -2.0, 3.0], vec![1, 3], true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn matmul_identity() {
        let mut tape = Tape::new();
        let eye = tape.leaf(vec![1.0, 0.0, 0.0, 1.0], vec![2, 2], false);
        let a = tape.leaf(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2], false);
        let out = tape.matmul(eye, a).unwrap();
        assert_eq!(tape.values(out), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn leaky_relu_values() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![-2.0, 3.0], vec![1, 2], false);
        let y = tape.leaky_relu(x, 0.1);
        let vals = tape.values(y);
        assert_eq!(vals, &[-0.2, 3.0]);
    }

    #[test]
    fn mse_gradient_matches_formula() {
        let mut tape = Tape::new();
        let pred = tape.leaf(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2], true);
        let target = vec![0.0, 1.0, 5.0, 4.0];
        let loss = tape.mse(pred, target.clone()).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(pred).unwrap();
        for k in 0..4 {
            let expected = 2.0 * (tape.values(pred)[k] - target[k]) / 4.0;
            assert!((g[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_on_non_scalar_is_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1.0, 2.0], vec![1, 2], true);
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn gather_rows_scatters_duplicates() {
        let mut tape = Tape::new();
        let table = tape.leaf(vec![1.0, 2.0, 3.0, 4.0], vec![2, 2], true);
        let rows = tape.gather_rows(table, vec![0, 0, 1]).unwrap();
        let loss = tape.sum(rows);
        let grads = tape.backward(loss).unwrap();
        // Row 0 used twice, row 1 once.
        assert_eq!(grads.get(table).unwrap(), &[2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn accumulation_across_reuse() {
        let mut tape = Tape::new();
        let x = tape.leaf(vec![1.0, 2.0], vec![1, 2], true);
        let doubled = tape.add(x, x).unwrap();
        let loss = tape.sum(doubled);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_names_op() {
        let mut tape = Tape::new();
        let a = tape.leaf(vec![0.0; 4], vec![2, 2], false);
        let b = tape.leaf(vec![0.0; 6], vec![3, 2], false);
        match tape.add(a, b) {
            Err(NafError::InvalidShape { op, .. }) => assert_eq!(op, "add"),
            other => panic!("expected shape error, got {other:?}"),
        }
    }
}
