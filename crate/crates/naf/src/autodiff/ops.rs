//! Forward implementations of the tape operations.

use super::{Op, Tape, TensorId};
use crate::error::{NafError, Result};
use crate::exec;

impl Tape {
    /// [B,I] x [I,O] -> [B,O].
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (rows, inner_a) = self.dims2_pub(a, "matmul")?;
        let (inner_b, cols) = self.dims2_pub(b, "matmul")?;
        if inner_a != inner_b {
            return Err(NafError::InvalidShape {
                op: "matmul",
                detail: format!("[{rows},{inner_a}] x [{inner_b},{cols}]"),
            });
        }
        let av = &self.nodes[a.0].values;
        let bv = &self.nodes[b.0].values;
        let mut out = vec![0.0f64; rows * cols];
        exec::for_each_chunk_mut(&mut out, cols, |r, orow| {
            let arow = &av[r * inner_a..(r + 1) * inner_a];
            for (k, &x) in arow.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let brow = &bv[k * cols..(k + 1) * cols];
                for c in 0..cols {
                    orow[c] += x * brow[c];
                }
            }
        });
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, vec![rows, cols], Op::MatMul(a, b), needs))
    }

    /// [B,N] + [N], broadcast over the batch axis.
    pub fn add_row(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (rows, cols) = self.dims2_pub(a, "add_row")?;
        if self.shape(b) != [cols] {
            return Err(NafError::InvalidShape {
                op: "add_row",
                detail: format!("[{rows},{cols}] + {:?}", self.shape(b)),
            });
        }
        let bv = &self.nodes[b.0].values;
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv[i % cols])
            .collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, vec![rows, cols], Op::AddRow(a, b), needs))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.same_shape(a, b, "add")?;
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, shape, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.same_shape(a, b, "mul")?;
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, shape, Op::Mul(a, b), needs))
    }

    pub fn leaky_relu(&mut self, a: TensorId, slope: f64) -> TensorId {
        let out: Vec<f64> = self.nodes[a.0]
            .values
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(a);
        self.push(out, shape, Op::LeakyRelu(a, slope), needs)
    }

    /// Selects rows of a [R,D] table; output is [len(indices), D].
    pub fn gather_rows(&mut self, table: TensorId, indices: Vec<usize>) -> Result<TensorId> {
        let (n_rows, dim) = self.dims2_pub(table, "gather_rows")?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= n_rows) {
            return Err(NafError::InvalidShape {
                op: "gather_rows",
                detail: format!("index {bad} out of range for {n_rows} rows"),
            });
        }
        let tv = &self.nodes[table.0].values;
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &row in &indices {
            out.extend_from_slice(&tv[row * dim..(row + 1) * dim]);
        }
        let n = indices.len();
        let needs = self.needs(table);
        Ok(self.push(out, vec![n, dim], Op::GatherRows(table, indices), needs))
    }

    /// Concatenates 2-D tensors with equal row counts along the last axis.
    pub fn concat(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(NafError::InvalidShape {
                op: "concat",
                detail: "no inputs".into(),
            });
        }
        let rows = self.dims2_pub(parts[0], "concat")?.0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.dims2_pub(p, "concat")?;
            if r != rows {
                return Err(NafError::InvalidShape {
                    op: "concat",
                    detail: format!("row counts differ: {rows} vs {r}"),
                });
            }
            total += c;
        }
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                let c = self.shape(p)[1];
                out.extend_from_slice(&self.nodes[p.0].values[r * c..(r + 1) * c]);
            }
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, vec![rows, total], Op::Concat(parts.to_vec()), needs))
    }

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let total: f64 = self.nodes[a.0].values.iter().sum();
        let needs = self.needs(a);
        self.push(vec![total], vec![1], Op::Sum(a), needs)
    }

    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let n = self.nodes[a.0].values.len() as f64;
        let total: f64 = self.nodes[a.0].values.iter().sum();
        let needs = self.needs(a);
        self.push(vec![total / n], vec![1], Op::Mean(a), needs)
    }

    /// Mean squared error against a constant target of the same size.
    pub fn mse(&mut self, pred: TensorId, target: Vec<f64>) -> Result<TensorId> {
        if target.len() != self.nodes[pred.0].values.len() {
            return Err(NafError::InvalidShape {
                op: "mse",
                detail: format!(
                    "pred has {} values, target {}",
                    self.nodes[pred.0].values.len(),
                    target.len()
                ),
            });
        }
        let n = target.len() as f64;
        let sum: f64 = self.nodes[pred.0]
            .values
            .iter()
            .zip(&target)
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        let needs = self.needs(pred);
        Ok(self.push(vec![sum / n], vec![1], Op::Mse(pred, target), needs))
    }

    /// Nadaraya-Watson interpolation of grid features at query positions:
    /// out[q] = sum_p w[q,p] F[p] with Gaussian kernel weights normalized
    /// per query. Differentiable w.r.t. features and per-point bandwidths.
    pub fn grid_query(
        &mut self,
        features: TensorId,
        bandwidths: TensorId,
        points: &[(f64, f64)],
        queries: &[(f64, f64)],
    ) -> Result<TensorId> {
        let (n_points, dim) = self.dims2_pub(features, "grid_query")?;
        if self.shape(bandwidths) != [n_points] || points.len() != n_points {
            return Err(NafError::InvalidShape {
                op: "grid_query",
                detail: format!(
                    "features [{n_points},{dim}], bandwidths {:?}, {} points",
                    self.shape(bandwidths),
                    points.len()
                ),
            });
        }
        let n_query = queries.len();
        let fv = &self.nodes[features.0].values;
        let sv = &self.nodes[bandwidths.0].values;

        let mut weights = vec![0.0f64; n_query * n_points];
        let mut sq_dists = vec![0.0f64; n_query * n_points];
        let mut out = vec![0.0f64; n_query * dim];
        for (q, &(qx, qy)) in queries.iter().enumerate() {
            let wrow = &mut weights[q * n_points..(q + 1) * n_points];
            let rrow = &mut sq_dists[q * n_points..(q + 1) * n_points];
            // Log-kernel with max subtraction keeps tiny bandwidths finite.
            let mut max_log = f64::NEG_INFINITY;
            for p in 0..n_points {
                let dx = qx - points[p].0;
                let dy = qy - points[p].1;
                let r = dx * dx + dy * dy;
                rrow[p] = r;
                let log_k = -r / (2.0 * sv[p] * sv[p]);
                wrow[p] = log_k;
                max_log = max_log.max(log_k);
            }
            let mut total = 0.0;
            for w in wrow.iter_mut() {
                *w = (*w - max_log).exp();
                total += *w;
            }
            let orow = &mut out[q * dim..(q + 1) * dim];
            for p in 0..n_points {
                wrow[p] /= total;
                if wrow[p] == 0.0 {
                    continue;
                }
                let frow = &fv[p * dim..(p + 1) * dim];
                for d in 0..dim {
                    orow[d] += wrow[p] * frow[d];
                }
            }
        }
        let needs = self.needs(features) || self.needs(bandwidths);
        Ok(self.push(
            out,
            vec![n_query, dim],
            Op::GridQuery {
                features,
                bandwidths,
                weights,
                sq_dists,
            },
            needs,
        ))
    }

    fn dims2_pub(&self, id: TensorId, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(id) {
            [r, c] => Ok((*r, *c)),
            s => Err(NafError::InvalidShape {
                op,
                detail: format!("expected 2-D tensor, got {s:?}"),
            }),
        }
    }

    fn same_shape(&self, a: TensorId, b: TensorId, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(NafError::InvalidShape {
                op,
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        Ok(())
    }
}
