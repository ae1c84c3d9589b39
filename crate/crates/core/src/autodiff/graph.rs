use super::tensor::{gemm, softmax_in_place, Tensor};
use crate::error::{Error, Result};

/// Value written into masked attention scores. Finite, so every forward value
/// stays finite, but far enough below any real score that `exp` underflows
/// to exactly zero after max subtraction.
pub const MASK_VALUE: f64 = -1.0e30;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Matmul { a: Var, b: Var, transpose_b: bool },
    Transpose(Var),
    Add(Var, Var),
    AddRow { a: Var, row: Var },
    MulRow { a: Var, row: Var },
    Scale(Var, f64),
    Relu(Var),
    Softmax(Var),
    CausalMask(Var),
    ConcatCols(Vec<Var>),
    SliceCols { a: Var, start: usize },
    RepeatRows(Var),
    Embedding { table: Var, ids: Vec<usize> },
    LayerNorm { a: Var, inv_std: Vec<f64> },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A dynamic tape: every operation appends a node whose parents are earlier
/// nodes, so reverse index order is a valid reverse topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn accumulate(&mut self, v: Var, g: Tensor) {
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn accumulate_with(&mut self, v: Var, shape: &[usize], f: impl FnOnce(&mut [f64])) {
        let slot = &mut self.grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::new(shape.to_vec(), vec![0.0; shape.iter().product()]).unwrap());
        }
        f(slot.as_mut().unwrap().data_mut());
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Copies the value of `v` into a new leaf that is cut off from the tape.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    fn dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        self.value(v).dims(op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a, "matmul")?;
        let (k2, n) = self.dims(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", self.value(a).shape(), self.value(b).shape()));
        }
        let mut out = vec![0.0; m * n];
        gemm(self.value(a).data(), m, k, false, self.value(b).data(), n, false, &mut out, false);
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(value, Op::Matmul { a, b, transpose_b: false }, &[a, b]))
    }

    /// `a·bᵀ` without materialising the transpose.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a, "matmul_bt")?;
        let (n, k2) = self.dims(b, "matmul_bt")?;
        if k != k2 {
            return Err(Error::shape("matmul_bt", self.value(a).shape(), self.value(b).shape()));
        }
        let mut out = vec![0.0; m * n];
        gemm(self.value(a).data(), m, k, false, self.value(b).data(), n, true, &mut out, false);
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(value, Op::Matmul { a, b, transpose_b: true }, &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.dims(a, "transpose")?;
        let value = self.value(a).transpose();
        Ok(self.push(value, Op::Transpose(a), &[a]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape("add", va.shape(), vb.shape()));
        }
        let mut value = va.clone();
        value.add_assign(vb);
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds a `1×n` row vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, n) = self.dims(a, "add_row")?;
        if self.value(row).shape() != [1, n] {
            return Err(Error::shape("add_row", self.value(a).shape(), self.value(row).shape()));
        }
        let mut value = self.value(a).clone();
        let r = self.value(row).data();
        for chunk in value.data_mut().chunks_mut(n) {
            for (x, b) in chunk.iter_mut().zip(r) {
                *x += b;
            }
        }
        Ok(self.push(value, Op::AddRow { a, row }, &[a, row]))
    }

    /// Multiplies every row of an `m×n` matrix elementwise by a `1×n` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, n) = self.dims(a, "mul_row")?;
        if self.value(row).shape() != [1, n] {
            return Err(Error::shape("mul_row", self.value(a).shape(), self.value(row).shape()));
        }
        let mut value = self.value(a).clone();
        let r = self.value(row).data();
        for chunk in value.data_mut().chunks_mut(n) {
            for (x, g) in chunk.iter_mut().zip(r) {
                *x *= g;
            }
        }
        Ok(self.push(value, Op::MulRow { a, row }, &[a, row]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let mut value = self.value(a).clone();
        value.scale_assign(c);
        self.push(value, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for x in value.data_mut() {
            *x = x.max(0.0);
        }
        self.push(value, Op::Relu(a), &[a])
    }

    /// Row-wise softmax, stabilised by subtracting each row's maximum.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (_, n) = self.dims(a, "softmax_rows")?;
        let mut value = self.value(a).clone();
        for row in value.data_mut().chunks_mut(n) {
            softmax_in_place(row);
        }
        Ok(self.push(value, Op::Softmax(a), &[a]))
    }

    /// Replaces entries above the diagonal (`col > row`) with [`MASK_VALUE`].
    pub fn causal_mask(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a, "causal_mask")?;
        let mut value = self.value(a).clone();
        let data = value.data_mut();
        for i in 0..m {
            for j in (i + 1)..n {
                data[i * n + j] = MASK_VALUE;
            }
        }
        Ok(self.push(value, Op::CausalMask(a), &[a]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of zero tensors".into()))?;
        let (m, _) = self.dims(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims(p, "concat_cols")?;
            if r != m {
                return Err(Error::shape("concat_cols", self.value(first).shape(), self.value(p).shape()));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; m * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for i in 0..m {
                out[i * total + offset..i * total + offset + w].copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        let value = Tensor::matrix(m, total, out)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims(a, "slice_cols")?;
        if start >= end || end > n {
            return Err(Error::shape("slice_cols", self.value(a).shape(), &[start, end]));
        }
        let w = end - start;
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        let value = Tensor::matrix(m, w, out)?;
        Ok(self.push(value, Op::SliceCols { a, start }, &[a]))
    }

    /// Stacks `n` copies of a `1×d` row.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let (r, d) = self.dims(a, "repeat_rows")?;
        if r != 1 || n == 0 {
            return Err(Error::shape("repeat_rows", self.value(a).shape(), &[n, d]));
        }
        let row = self.value(a).data().to_vec();
        let value = Tensor::matrix(n, d, row.repeat(n))?;
        Ok(self.push(value, Op::RepeatRows(a), &[a]))
    }

    /// Gathers rows `ids` of an embedding table.
    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = self.dims(table, "embedding_lookup")?;
        if ids.is_empty() {
            return Err(Error::Contract("embedding_lookup with no ids".into()));
        }
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(Error::Index {
                    op: "embedding_lookup",
                    index: id,
                    bound: v,
                });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let value = Tensor::matrix(ids.len(), d, out)?;
        Ok(self.push(value, Op::Embedding { table, ids: ids.to_vec() }, &[table]))
    }

    /// Normalises each row to zero mean and unit variance:
    /// `(x - mean) / sqrt(var + eps)`. No affine part.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.dims(a, "layer_norm")?;
        let mut value = self.value(a).clone();
        let mut inv_std = Vec::with_capacity(m);
        for row in value.data_mut().chunks_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * inv;
            }
            inv_std.push(inv);
        }
        Ok(self.push(value, Op::LayerNorm { a, inv_std }, &[a]))
    }

    /// `-Σ_t log softmax(logits_t)[targets_t]` as a `1×1` tensor.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (t, v) = self.dims(logits, "cross_entropy")?;
        if targets.len() != t {
            return Err(Error::shape("cross_entropy", self.value(logits).shape(), &[targets.len()]));
        }
        let mut probs = self.value(logits).data().to_vec();
        let mut loss = 0.0;
        for (row_idx, (row, &target)) in probs.chunks_mut(v).zip(targets).enumerate() {
            if target >= v {
                return Err(Error::Index {
                    op: "cross_entropy",
                    index: target,
                    bound: v,
                });
            }
            let raw = self.nodes[logits.0].value.row_slice(row_idx);
            let lse = super::tensor::log_sum_exp(raw);
            loss += lse - raw[target];
            softmax_in_place(row);
        }
        let value = Tensor::scalar(loss);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(value, Op::Sum(a), &[a])
    }

    /// Reverse pass from a scalar root into fresh gradients.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let mut grads = Gradients {
            grads: vec![None; self.nodes.len()],
        };
        self.backward_accumulate(root, &mut grads)?;
        Ok(grads)
    }

    /// Reverse pass that adds into existing gradients instead of zeroing.
    pub fn backward_accumulate(&self, root: Var, into: &mut Gradients) -> Result<()> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        if into.grads.len() < self.nodes.len() {
            into.grads.resize(self.nodes.len(), None);
        }
        // Propagate into a local buffer so accumulation never leaks
        // pre-existing gradients of interior nodes into their parents.
        let mut local = Gradients {
            grads: vec![None; root.0 + 1],
        };
        local.grads[root.0] = Some(Tensor::new(root_value.shape().to_vec(), vec![1.0])?);
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                local.grads[idx] = None;
                continue;
            }
            let Some(g) = local.grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut local);
            local.grads[idx] = Some(g);
        }
        for (idx, g) in local.grads.into_iter().enumerate() {
            if let Some(g) = g {
                into.accumulate(Var(idx), g);
            }
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut Gradients) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            &Op::Matmul { a, b, transpose_b } => {
                let (m, k) = (self.value(a).rows(), self.value(a).cols());
                let n = node.value.cols();
                let (va, vb) = (self.value(a), self.value(b));
                if self.needs(a) {
                    // dA = dC·Bᵀ, or dC·B when B entered transposed.
                    grads.accumulate_with(a, va.shape(), |da| {
                        gemm(gd, m, n, false, vb.data(), k, !transpose_b, da, true)
                    });
                }
                if self.needs(b) {
                    if transpose_b {
                        // B is n×k: dB = dCᵀ·A.
                        grads.accumulate_with(b, vb.shape(), |db| {
                            gemm(gd, n, m, true, va.data(), k, false, db, true)
                        });
                    } else {
                        // B is k×n: dB = Aᵀ·dC.
                        grads.accumulate_with(b, vb.shape(), |db| {
                            gemm(va.data(), k, m, true, gd, n, false, db, true)
                        });
                    }
                }
            }
            &Op::Transpose(a) => {
                if self.needs(a) {
                    grads.accumulate(a, g.transpose());
                }
            }
            &Op::Add(a, b) => {
                if self.needs(a) {
                    grads.accumulate(a, g.clone());
                }
                if self.needs(b) {
                    grads.accumulate(b, g.clone());
                }
            }
            &Op::AddRow { a, row } => {
                if self.needs(a) {
                    grads.accumulate(a, g.clone());
                }
                if self.needs(row) {
                    let n = g.cols();
                    grads.accumulate_with(row, self.value(row).shape(), |dr| {
                        for chunk in gd.chunks(n) {
                            for (d, x) in dr.iter_mut().zip(chunk) {
                                *d += x;
                            }
                        }
                    });
                }
            }
            &Op::MulRow { a, row } => {
                let n = g.cols();
                let (va, vr) = (self.value(a), self.value(row));
                if self.needs(a) {
                    grads.accumulate_with(a, va.shape(), |da| {
                        for (dchunk, gchunk) in da.chunks_mut(n).zip(gd.chunks(n)) {
                            for ((d, x), r) in dchunk.iter_mut().zip(gchunk).zip(vr.data()) {
                                *d += x * r;
                            }
                        }
                    });
                }
                if self.needs(row) {
                    grads.accumulate_with(row, vr.shape(), |dr| {
                        for (gchunk, achunk) in gd.chunks(n).zip(va.data().chunks(n)) {
                            for ((d, x), y) in dr.iter_mut().zip(gchunk).zip(achunk) {
                                *d += x * y;
                            }
                        }
                    });
                }
            }
            &Op::Scale(a, c) => {
                if self.needs(a) {
                    let mut d = g.clone();
                    d.scale_assign(c);
                    grads.accumulate(a, d);
                }
            }
            &Op::Relu(a) => {
                if self.needs(a) {
                    let input = self.value(a).data();
                    grads.accumulate_with(a, g.shape(), |da| {
                        for ((d, x), &i) in da.iter_mut().zip(gd).zip(input) {
                            if i > 0.0 {
                                *d += x;
                            }
                        }
                    });
                }
            }
            &Op::Softmax(a) => {
                if self.needs(a) {
                    let n = g.cols();
                    let y = node.value.data();
                    grads.accumulate_with(a, g.shape(), |da| {
                        for ((dchunk, gchunk), ychunk) in da.chunks_mut(n).zip(gd.chunks(n)).zip(y.chunks(n)) {
                            let dot: f64 = gchunk.iter().zip(ychunk).map(|(a, b)| a * b).sum();
                            for ((d, x), yv) in dchunk.iter_mut().zip(gchunk).zip(ychunk) {
                                *d += yv * (x - dot);
                            }
                        }
                    });
                }
            }
            &Op::CausalMask(a) => {
                if self.needs(a) {
                    let n = g.cols();
                    grads.accumulate_with(a, g.shape(), |da| {
                        for (i, (dchunk, gchunk)) in da.chunks_mut(n).zip(gd.chunks(n)).enumerate() {
                            for j in 0..=i.min(n - 1) {
                                dchunk[j] += gchunk[j];
                            }
                        }
                    });
                }
            }
            Op::ConcatCols(parts) => {
                let (m, total) = (g.rows(), g.cols());
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.needs(p) {
                        grads.accumulate_with(p, self.value(p).shape(), |dp| {
                            for i in 0..m {
                                for (d, x) in dp[i * w..(i + 1) * w]
                                    .iter_mut()
                                    .zip(&gd[i * total + offset..i * total + offset + w])
                                {
                                    *d += x;
                                }
                            }
                        });
                    }
                    offset += w;
                }
            }
            &Op::SliceCols { a, start } => {
                if self.needs(a) {
                    let (m, w) = (g.rows(), g.cols());
                    let n = self.value(a).cols();
                    grads.accumulate_with(a, self.value(a).shape(), |da| {
                        for i in 0..m {
                            for (d, x) in da[i * n + start..i * n + start + w].iter_mut().zip(&gd[i * w..(i + 1) * w]) {
                                *d += x;
                            }
                        }
                    });
                }
            }
            &Op::RepeatRows(a) => {
                if self.needs(a) {
                    let n = g.cols();
                    grads.accumulate_with(a, self.value(a).shape(), |da| {
                        for chunk in gd.chunks(n) {
                            for (d, x) in da.iter_mut().zip(chunk) {
                                *d += x;
                            }
                        }
                    });
                }
            }
            Op::Embedding { table, ids } => {
                let table = *table;
                if self.needs(table) {
                    let d = g.cols();
                    grads.accumulate_with(table, self.value(table).shape(), |dt| {
                        for (chunk, &id) in gd.chunks(d).zip(ids) {
                            for (t, x) in dt[id * d..(id + 1) * d].iter_mut().zip(chunk) {
                                *t += x;
                            }
                        }
                    });
                }
            }
            Op::LayerNorm { a, inv_std } => {
                let a = *a;
                if self.needs(a) {
                    let n = g.cols();
                    let y = node.value.data();
                    grads.accumulate_with(a, g.shape(), |da| {
                        for (((dchunk, gchunk), ychunk), &inv) in
                            da.chunks_mut(n).zip(gd.chunks(n)).zip(y.chunks(n)).zip(inv_std)
                        {
                            let mean_g = gchunk.iter().sum::<f64>() / n as f64;
                            let mean_gy = gchunk.iter().zip(ychunk).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                            for ((d, x), yv) in dchunk.iter_mut().zip(gchunk).zip(ychunk) {
                                *d += inv * (x - mean_g - yv * mean_gy);
                            }
                        }
                    });
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let logits = *logits;
                if self.needs(logits) {
                    let upstream = gd[0];
                    let v = self.value(logits).cols();
                    grads.accumulate_with(logits, self.value(logits).shape(), |dl| {
                        for (t, (dchunk, pchunk)) in dl.chunks_mut(v).zip(probs.chunks(v)).enumerate() {
                            for (j, (d, p)) in dchunk.iter_mut().zip(pchunk).enumerate() {
                                let onehot = if j == targets[t] { 1.0 } else { 0.0 };
                                *d += upstream * (p - onehot);
                            }
                        }
                    });
                }
            }
            &Op::Sum(a) => {
                if self.needs(a) {
                    let upstream = gd[0];
                    grads.accumulate_with(a, self.value(a).shape(), |da| {
                        for d in da.iter_mut() {
                            *d += upstream;
                        }
                    });
                }
            }
        }
    }
}
