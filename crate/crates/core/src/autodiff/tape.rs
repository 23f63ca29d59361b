use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::sparse::SparseMatrix;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Recip(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sqrt(Var),
    Sum(Var),
    Mean(Var),
    MeanRows(Var),
    Concat { parts: Vec<Var>, axis: usize },
    IndexSelect { src: Var, index: Vec<usize> },
    ScatterAdd { src: Var, index: Vec<usize> },
    Gather { src: Var, index: Vec<usize> },
    RowNorm(Var),
    Spmm { matrix: Arc<SparseMatrix>, src: Var },
    SoftRank { src: Var, tau: f64 },
    Pearson(Var, Var),
    Bce { logits: Var, targets: Vec<f64>, mask: Vec<bool>, count: usize },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run recording of tensor operations.
///
/// Nodes are appended in execution order, so the recording order is a
/// topological order of the computation graph.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by the leaf handles.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` requires grad and was
    /// reached by the backward pass.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, or zeros of `like`'s shape when none was produced.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.dims2("matmul")?;
        let (k2, n) = tb.dims2("matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let (ad, bd) = (ta.data(), tb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2("transpose")?;
        let d = ta.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(c, r, out)?, Op::Transpose(a), rg))
    }

    fn zip_same(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(f64, f64) -> f64, rec: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(&shape, data)?, rec, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    /// `[r, c]` matrix plus a `[1, c]` row broadcast over rows.
    pub fn add_row(&mut self, m: Var, row: Var) -> Result<Var> {
        let (tm, tr) = (self.value(m), self.value(row));
        let (r, c) = tm.dims2("add_row")?;
        if tr.shape() != [1, c] {
            return Err(mismatch("add_row", tm, tr));
        }
        let mut out = tm.data().to_vec();
        for chunk in out.chunks_mut(c) {
            for (o, &b) in chunk.iter_mut().zip(tr.data()) {
                *o += b;
            }
        }
        let rg = self.rg(&[m, row]);
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::AddRow(m, row), rg))
    }

    /// `[r, c]` matrix times a `[r, 1]` column broadcast over columns.
    pub fn mul_col(&mut self, m: Var, col: Var) -> Result<Var> {
        let (tm, tc) = (self.value(m), self.value(col));
        let (r, c) = tm.dims2("mul_col")?;
        if tc.shape() != [r, 1] {
            return Err(mismatch("mul_col", tm, tc));
        }
        let mut out = tm.data().to_vec();
        for (chunk, &s) in out.chunks_mut(c).zip(tc.data()) {
            for o in chunk {
                *o *= s;
            }
        }
        let rg = self.rg(&[m, col]);
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::MulCol(m, col), rg))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, rec: Op) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(&[a]);
        self.push(Tensor::new(&shape, data).expect("shape preserved"), rec, rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| c * x, Op::Scale(a, c))
    }

    /// Tensor times a one-element tensor.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let ts = self.value(s);
        if !ts.is_scalar() {
            return Err(mismatch("scale_by", self.value(a), ts));
        }
        let c = ts.item();
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| c * x).collect();
        let shape = ta.shape().to_vec();
        let rg = self.rg(&[a, s]);
        Ok(self.push(Tensor::new(&shape, data)?, Op::ScaleBy(a, s), rg))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / x, Op::Recip(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, libm::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(a, libm::sqrt, Op::Sqrt(a))
    }

    /// Sum of all entries, shape `[1]`.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Mean of all entries, shape `[1]`.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Column means of a `[r, c]` matrix, shape `[1, c]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = t.dims2("mean_rows")?;
        let mut out = vec![0.0; c];
        for chunk in t.data().chunks(c) {
            for (o, &x) in out.iter_mut().zip(chunk) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= r as f64;
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::row(out)?, Op::MeanRows(a), rg))
    }

    /// Concatenates 2-D tensors along `axis` (0 rows, 1 columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts.first().ok_or(Error::ShapeMismatch {
            op: "concat",
            lhs: Vec::new(),
            rhs: Vec::new(),
        })?;
        let (r0, c0) = self.value(first).dims2("concat")?;
        let mut dims = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat")?;
            let ok = match axis {
                0 => c == c0,
                1 => r == r0,
                _ => false,
            };
            if !ok {
                return Err(mismatch("concat", self.value(first), self.value(p)));
            }
            dims.push((r, c));
        }
        let (rows, cols) = if axis == 0 {
            (dims.iter().map(|d| d.0).sum(), c0)
        } else {
            (r0, dims.iter().map(|d| d.1).sum())
        };
        let mut out = Vec::with_capacity(rows * cols);
        if axis == 0 {
            for &p in parts {
                out.extend_from_slice(self.value(p).data());
            }
        } else {
            for i in 0..rows {
                for &p in parts {
                    out.extend_from_slice(self.value(p).row_slice(i));
                }
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::matrix(rows, cols, out)?,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Rows of `src` at `index` (repeats allowed).
    pub fn index_select(&mut self, src: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(src);
        let (r, c) = t.dims2("index_select")?;
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index {
            if i >= r {
                return Err(Error::IndexOutOfRange {
                    op: "index_select",
                    index: i,
                    len: r,
                });
            }
            out.extend_from_slice(t.row_slice(i));
        }
        let rg = self.rg(&[src]);
        Ok(self.push(
            Tensor::matrix(index.len(), c, out)?,
            Op::IndexSelect {
                src,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Sums row `k` of `src` into output row `index[k]`; output has
    /// `out_rows` rows.
    pub fn scatter_add(&mut self, src: Var, index: &[usize], out_rows: usize) -> Result<Var> {
        let t = self.value(src);
        let (r, c) = t.dims2("scatter_add")?;
        if index.len() != r {
            return Err(Error::LengthMismatch {
                left: index.len(),
                right: r,
            });
        }
        let mut out = vec![0.0; out_rows * c];
        for (k, &dst) in index.iter().enumerate() {
            if dst >= out_rows {
                return Err(Error::IndexOutOfRange {
                    op: "scatter_add",
                    index: dst,
                    len: out_rows,
                });
            }
            for (o, &x) in out[dst * c..(dst + 1) * c].iter_mut().zip(t.row_slice(k)) {
                *o += x;
            }
        }
        let rg = self.rg(&[src]);
        Ok(self.push(
            Tensor::matrix(out_rows, c, out)?,
            Op::ScatterAdd {
                src,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Entries of `src` at flat row-major positions, shape `[k, 1]`.
    pub fn gather(&mut self, src: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(src);
        let mut out = Vec::with_capacity(index.len());
        for &i in index {
            out.push(*t.data().get(i).ok_or(Error::IndexOutOfRange {
                op: "gather",
                index: i,
                len: t.len(),
            })?);
        }
        let rg = self.rg(&[src]);
        Ok(self.push(
            Tensor::column(out)?,
            Op::Gather {
                src,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Euclidean norm of each row, shape `[r, 1]`.
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = t.dims2("l2_norm")?;
        let out = (0..r)
            .map(|i| libm::sqrt(t.data()[i * c..(i + 1) * c].iter().map(|x| x * x).sum()))
            .collect();
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::column(out)?, Op::RowNorm(a), rg))
    }

    /// Constant sparse matrix times a dense `[cols, w]` matrix.
    pub fn spmm(&mut self, matrix: &Arc<SparseMatrix>, src: Var) -> Result<Var> {
        let t = self.value(src);
        let (r, w) = t.dims2("spmm")?;
        if r != matrix.cols() {
            return Err(Error::ShapeMismatch {
                op: "spmm",
                lhs: vec![matrix.rows(), matrix.cols()],
                rhs: t.shape().to_vec(),
            });
        }
        let out = matrix.apply(t.data(), w);
        let rg = self.rg(&[src]);
        Ok(self.push(
            Tensor::matrix(matrix.rows(), w, out)?,
            Op::Spmm {
                matrix: Arc::clone(matrix),
                src,
            },
            rg,
        ))
    }

    /// Differentiable ranks `1 + Σ_{j≠i} sigmoid((x_i − x_j)/tau)` of the
    /// flattened input, same shape as the input. Ties get average ranks.
    pub fn soft_rank(&mut self, src: Var, tau: f64) -> Result<Var> {
        if !(tau > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "soft-rank temperature must be positive, got {tau}"
            )));
        }
        let t = self.value(src);
        let x = t.data();
        let n = x.len();
        let mut out = vec![1.0; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let s = sigmoid((x[i] - x[j]) / tau);
                out[i] += s;
                out[j] += 1.0 - s;
            }
        }
        let shape = t.shape().to_vec();
        let rg = self.rg(&[src]);
        Ok(self.push(Tensor::new(&shape, out)?, Op::SoftRank { src, tau }, rg))
    }

    /// Pearson correlation of two equally sized tensors (flattened), shape
    /// `[1]`. Fails with [`Error::ZeroVariance`] if either side is constant.
    pub fn pearson(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.len() != tb.len() {
            return Err(mismatch("pearson", ta, tb));
        }
        let r = crate::similarity::pearson(ta.data(), tb.data())?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(r), Op::Pearson(a, b), rg))
    }

    /// Mean binary cross-entropy with logits over entries where `mask` is
    /// true, shape `[1]`. Masked-out entries contribute nothing.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64], mask: &[bool]) -> Result<Var> {
        let t = self.value(logits);
        if targets.len() != t.len() || mask.len() != t.len() {
            return Err(Error::LengthMismatch {
                left: t.len(),
                right: targets.len().min(mask.len()),
            });
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for ((&z, &y), &m) in t.data().iter().zip(targets).zip(mask) {
            if m {
                total += z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()));
                count += 1;
            }
        }
        let value = if count == 0 { 0.0 } else { total / count as f64 };
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(value),
            Op::Bce {
                logits,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                count,
            },
            rg,
        ))
    }

    /// Reverse pass from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let ls = self.value(loss);
        if !ls.is_scalar() {
            return Err(Error::NonScalarLoss(ls.shape().to_vec()));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        if nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            let out = node.value.data();
            backprop(&nodes, &mut grads, &node.op, &g, out);
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }

        Ok(Gradients {
            grads: grads
                .into_iter()
                .zip(&nodes)
                .map(|(g, n)| match (g, &n.op) {
                    (Some(g), Op::Leaf) => Some(Tensor::new(n.value.shape(), g).expect("grad shape")),
                    _ => None,
                })
                .collect(),
        })
    }
}

/// Gradient buffer of `v`, allocated on first use; `None` when `v` does not
/// require grad.
fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
}

fn backprop(nodes: &[Node], grads: &mut [Option<Vec<f64>>], op: &Op, g: &[f64], out: &[f64]) {
    let val = |v: Var| nodes[v.0].value.data();
    match op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = nodes[a.0].value.dims2("matmul").expect("2d");
            let n = nodes[b.0].value.cols();
            let (ad, bd) = (val(*a), val(*b));
            if let Some(ga) = slot(nodes, grads, *a) {
                // dA = G · Bᵀ
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &bd[p * n..(p + 1) * n];
                        ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                // dB = Aᵀ · G
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let aip = ad[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for (o, &x) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += aip * x;
                        }
                    }
                }
            }
        }
        Op::Transpose(a) => {
            let (r, c) = nodes[a.0].value.dims2("transpose").expect("2d");
            if let Some(ga) = slot(nodes, grads, *a) {
                for i in 0..r {
                    for j in 0..c {
                        ga[i * c + j] += g[j * r + i];
                    }
                }
            }
        }
        Op::Add(a, b) => {
            for v in [*a, *b] {
                if let Some(gv) = slot(nodes, grads, v) {
                    for (o, &x) in gv.iter_mut().zip(g) {
                        *o += x;
                    }
                }
            }
        }
        Op::Sub(a, b) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for (o, &x) in ga.iter_mut().zip(g) {
                    *o += x;
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for (o, &x) in gb.iter_mut().zip(g) {
                    *o -= x;
                }
            }
        }
        Op::Mul(a, b) => {
            let (ad, bd) = (val(*a), val(*b));
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(bd) {
                    *o += x * y;
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for ((o, &x), &y) in gb.iter_mut().zip(g).zip(ad) {
                    *o += x * y;
                }
            }
        }
        Op::Div(a, b) => {
            let bd = val(*b);
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(bd) {
                    *o += x / y;
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                // d(a/b)/db = -(a/b)/b
                for (((o, &x), &q), &y) in gb.iter_mut().zip(g).zip(out).zip(bd) {
                    *o -= x * q / y;
                }
            }
        }
        Op::AddRow(m, row) => {
            let c = nodes[row.0].value.len();
            if let Some(gm) = slot(nodes, grads, *m) {
                for (o, &x) in gm.iter_mut().zip(g) {
                    *o += x;
                }
            }
            if let Some(gr) = slot(nodes, grads, *row) {
                for chunk in g.chunks(c) {
                    for (o, &x) in gr.iter_mut().zip(chunk) {
                        *o += x;
                    }
                }
            }
        }
        Op::MulCol(m, col) => {
            let c = nodes[m.0].value.cols();
            let (md, cd) = (val(*m), val(*col));
            if let Some(gm) = slot(nodes, grads, *m) {
                for ((ochunk, gchunk), &s) in gm.chunks_mut(c).zip(g.chunks(c)).zip(cd) {
                    for (o, &x) in ochunk.iter_mut().zip(gchunk) {
                        *o += x * s;
                    }
                }
            }
            if let Some(gc) = slot(nodes, grads, *col) {
                for ((o, gchunk), mchunk) in gc.iter_mut().zip(g.chunks(c)).zip(md.chunks(c)) {
                    *o += gchunk.iter().zip(mchunk).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        Op::Scale(a, c) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for (o, &x) in ga.iter_mut().zip(g) {
                    *o += c * x;
                }
            }
        }
        Op::ScaleBy(a, s) => {
            let c = nodes[s.0].value.item();
            let ad = val(*a);
            if let Some(ga) = slot(nodes, grads, *a) {
                for (o, &x) in ga.iter_mut().zip(g) {
                    *o += c * x;
                }
            }
            if let Some(gs) = slot(nodes, grads, *s) {
                gs[0] += g.iter().zip(ad).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        Op::Recip(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o -= x * y * y;
                }
            }
        }
        Op::Relu(a) => {
            let ad = val(*a);
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(ad) {
                    if y > 0.0 {
                        *o += x;
                    }
                }
            }
        }
        Op::Tanh(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * (1.0 - y * y);
                }
            }
        }
        Op::Sigmoid(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * y * (1.0 - y);
                }
            }
        }
        Op::Sqrt(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * 0.5 / y;
                }
            }
        }
        Op::Sum(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                for o in ga.iter_mut() {
                    *o += g[0];
                }
            }
        }
        Op::Mean(a) => {
            if let Some(ga) = slot(nodes, grads, *a) {
                let s = g[0] / ga.len() as f64;
                for o in ga.iter_mut() {
                    *o += s;
                }
            }
        }
        Op::MeanRows(a) => {
            let r = nodes[a.0].value.rows();
            if let Some(ga) = slot(nodes, grads, *a) {
                let c = g.len();
                for chunk in ga.chunks_mut(c) {
                    for (o, &x) in chunk.iter_mut().zip(g) {
                        *o += x / r as f64;
                    }
                }
            }
        }
        Op::Concat { parts, axis } => {
            if *axis == 0 {
                let mut offset = 0;
                for &p in parts {
                    let len = nodes[p.0].value.len();
                    if let Some(gp) = slot(nodes, grads, p) {
                        for (o, &x) in gp.iter_mut().zip(&g[offset..offset + len]) {
                            *o += x;
                        }
                    }
                    offset += len;
                }
            } else {
                let total: usize = parts.iter().map(|p| nodes[p.0].value.cols()).sum();
                let mut offset = 0;
                for &p in parts {
                    let c = nodes[p.0].value.cols();
                    if let Some(gp) = slot(nodes, grads, p) {
                        for (i, chunk) in gp.chunks_mut(c).enumerate() {
                            let src = &g[i * total + offset..i * total + offset + c];
                            for (o, &x) in chunk.iter_mut().zip(src) {
                                *o += x;
                            }
                        }
                    }
                    offset += c;
                }
            }
        }
        Op::IndexSelect { src, index } => {
            let c = nodes[src.0].value.cols();
            if let Some(gs) = slot(nodes, grads, *src) {
                for (k, &i) in index.iter().enumerate() {
                    for (o, &x) in gs[i * c..(i + 1) * c].iter_mut().zip(&g[k * c..(k + 1) * c]) {
                        *o += x;
                    }
                }
            }
        }
        Op::ScatterAdd { src, index } => {
            let c = nodes[src.0].value.cols();
            if let Some(gs) = slot(nodes, grads, *src) {
                for (k, &dst) in index.iter().enumerate() {
                    for (o, &x) in gs[k * c..(k + 1) * c].iter_mut().zip(&g[dst * c..(dst + 1) * c]) {
                        *o += x;
                    }
                }
            }
        }
        Op::Gather { src, index } => {
            if let Some(gs) = slot(nodes, grads, *src) {
                for (k, &i) in index.iter().enumerate() {
                    gs[i] += g[k];
                }
            }
        }
        Op::RowNorm(a) => {
            let c = nodes[a.0].value.cols();
            let ad = val(*a);
            if let Some(ga) = slot(nodes, grads, *a) {
                for (i, (&gi, &norm)) in g.iter().zip(out).enumerate() {
                    if norm > 0.0 {
                        for (o, &x) in ga[i * c..(i + 1) * c].iter_mut().zip(&ad[i * c..(i + 1) * c]) {
                            *o += gi * x / norm;
                        }
                    }
                }
            }
        }
        Op::Spmm { matrix, src } => {
            let w = nodes[src.0].value.cols();
            if let Some(gs) = slot(nodes, grads, *src) {
                matrix.apply_transpose_into(g, w, gs);
            }
        }
        Op::SoftRank { src, tau } => {
            let x = val(*src);
            if let Some(gs) = slot(nodes, grads, *src) {
                let n = x.len();
                for i in 0..n {
                    for j in (i + 1)..n {
                        let s = sigmoid((x[i] - x[j]) / tau);
                        let d = s * (1.0 - s) / tau;
                        let contrib = d * (g[i] - g[j]);
                        gs[i] += contrib;
                        gs[j] -= contrib;
                    }
                }
            }
        }
        Op::Pearson(a, b) => {
            let (x, y) = (val(*a), val(*b));
            let r = out[0];
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
            let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
            let denom = libm::sqrt(sxx * syy);
            if let Some(ga) = slot(nodes, grads, *a) {
                for ((o, &xi), &yi) in ga.iter_mut().zip(x).zip(y) {
                    *o += g[0] * ((yi - my) / denom - r * (xi - mx) / sxx);
                }
            }
            if let Some(gb) = slot(nodes, grads, *b) {
                for ((o, &xi), &yi) in gb.iter_mut().zip(x).zip(y) {
                    *o += g[0] * ((xi - mx) / denom - r * (yi - my) / syy);
                }
            }
        }
        Op::Bce {
            logits,
            targets,
            mask,
            count,
        } => {
            let z = val(*logits);
            if *count > 0 {
                if let Some(gl) = slot(nodes, grads, *logits) {
                    let s = g[0] / *count as f64;
                    for (((o, &zi), &y), &m) in gl.iter_mut().zip(z).zip(targets).zip(mask) {
                        if m {
                            *o += s * (sigmoid(zi) - y);
                        }
                    }
                }
            }
        }
    }
}
