//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation in execution order. Nodes only refer to
//! earlier nodes, so walking the tape backwards is a reverse topological order
//! and each node is visited once.

use crate::error::{Result, TensorError};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Row,
    Scalar,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var, Broadcast),
    Sub(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    Sum(Var),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    Rows(Var, Vec<usize>),
    MaxRows(Var, Vec<usize>),
    Unfold(Var, usize),
    Pick(Var, usize),
    Scatter(Var, Vec<usize>),
    Transpose(Var),
}

struct Node {
    op: Op,
    // `None` for parameter leaves, which read from the store.
    value: Option<Tensor>,
    requires_grad: bool,
}

/// The tape. Borrows the parameter store read-only, so frozen parameters can be
/// shared between graphs on different threads.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.value(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A constant leaf; gradients do not flow into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, t, false)
    }

    /// A constant copy of `v`, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.input(t)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), out, rg))
    }

    fn broadcast_kind(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            Ok(Broadcast::Same)
        } else if tb.rank() == 2 && tb.rows() == 1 && tb.cols() == ta.cols() && ta.rank() == 2 {
            Ok(Broadcast::Row)
        } else if tb.len() == 1 {
            Ok(Broadcast::Scalar)
        } else {
            Err(TensorError::ShapeMismatch {
                op,
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            })
        }
    }

    fn binary(&self, a: Var, b: Var, kind: Broadcast, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let cols = ta.cols();
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = match kind {
                    Broadcast::Same => tb.data()[i],
                    Broadcast::Row => tb.data()[i % cols],
                    Broadcast::Scalar => tb.data()[0],
                };
                f(x, y)
            })
            .collect();
        Tensor::new(ta.shape().to_vec(), data).expect("shape preserved")
    }

    /// `a + b`, where `b` may be a row vector or scalar broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast_kind("add", a, b)?;
        let out = self.binary(a, b, kind, |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Add(a, b, kind), out, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast_kind("sub", a, b)?;
        let out = self.binary(a, b, kind, |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Sub(a, b, kind), out, rg))
    }

    /// Elementwise product with the same broadcasting rules as [`Graph::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let kind = self.broadcast_kind("mul", a, b)?;
        let out = self.binary(a, b, kind, |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Mul(a, b, kind), out, rg))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a]);
        self.push(Op::Scale(a, factor), out, rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        let rg = self.rg(&[a]);
        self.push(Op::AddScalar(a), out, rg)
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(Op::Tanh(a), out, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(Op::Sigmoid(a), out, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(&[a]);
        self.push(Op::Relu(a), out, rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::exp);
        let rg = self.rg(&[a]);
        self.push(Op::Exp(a), out, rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        let rg = self.rg(&[a]);
        self.push(Op::Log(a), out, rg)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a), None);
        let rg = self.rg(&[a]);
        self.push(Op::Softmax(a), out, rg)
    }

    /// Row-wise softmax where `mask[j] == false` columns get probability
    /// exactly 0. At least one column must stay unmasked.
    pub fn softmax_masked(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let t = self.value(a);
        if mask.len() != t.cols() || !mask.iter().any(|&m| m) {
            return Err(TensorError::InvalidArgument(format!(
                "softmax mask of length {} for {} columns must keep one entry",
                mask.len(),
                t.cols()
            )));
        }
        let out = softmax_rows(t, Some(mask));
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Softmax(a), out, rg))
    }

    /// Sum of all entries as a `[1 x 1]` scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(Op::Sum(a), out, rg)
    }

    /// Column means, `[r x c] -> [1 x c]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let (r, c) = (t.rows(), t.cols());
        if r == 0 {
            return Err(TensorError::InvalidArgument("mean over zero rows".into()));
        }
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, x) in out.iter_mut().zip(t.row_slice(i)) {
                *o += x / r as f64;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Op::MeanRows(a), Tensor::row(out), rg))
    }

    /// Concatenates along columns; all parts must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            cols += t.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Op::ConcatCols(parts.to_vec()),
            Tensor::matrix(rows, cols, data)?,
            rg,
        ))
    }

    /// Stacks along rows; all parts must have the same column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.value(parts[0]).shape().to_vec(),
                    right: t.shape().to_vec(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Op::ConcatRows(parts.to_vec()),
            Tensor::matrix(rows, cols, data)?,
            rg,
        ))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if start + len > t.cols() {
            return Err(TensorError::InvalidArgument(format!(
                "column slice {start}..{} out of range for {:?}",
                start + len,
                t.shape()
            )));
        }
        let rows = t.rows();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&t.row_slice(r)[start..start + len]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(
            Op::SliceCols(a, start),
            Tensor::matrix(rows, len, data)?,
            rg,
        ))
    }

    /// Gathers rows by index (embedding lookup, row selection).
    pub fn rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let cols = t.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= t.rows() {
                return Err(TensorError::InvalidArgument(format!(
                    "row index {i} out of range for {:?}",
                    t.shape()
                )));
            }
            data.extend_from_slice(t.row_slice(i));
        }
        let rg = self.rg(&[a]);
        Ok(self.push(
            Op::Rows(a, indices.to_vec()),
            Tensor::matrix(indices.len(), cols, data)?,
            rg,
        ))
    }

    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        self.rows(a, &[index])
    }

    /// Column-wise max over rows (max-over-time pooling). Ties go to the
    /// earliest row.
    pub fn max_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rows() == 0 {
            return Err(TensorError::InvalidArgument("max over zero rows".into()));
        }
        let cols = t.cols();
        let mut best = t.row_slice(0).to_vec();
        let mut arg = vec![0usize; cols];
        for r in 1..t.rows() {
            for (c, &x) in t.row_slice(r).iter().enumerate() {
                if x > best[c] {
                    best[c] = x;
                    arg[c] = r;
                }
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Op::MaxRows(a, arg), Tensor::row(best), rg))
    }

    /// Sliding windows over the rows of a `[T x d]` input: row `p` of the
    /// result is rows `p..p+width` flattened, giving `[P x width*d]` with
    /// `P = max(T - width + 1, 1)`. Missing rows are zero padded.
    pub fn unfold(&mut self, a: Var, width: usize) -> Result<Var> {
        let t = self.value(a);
        if width == 0 || t.rows() == 0 {
            return Err(TensorError::InvalidArgument(format!(
                "unfold width {width} over {:?}",
                t.shape()
            )));
        }
        let (len, d) = (t.rows(), t.cols());
        let positions = len.saturating_sub(width) + 1;
        let mut data = vec![0.0; positions * width * d];
        for p in 0..positions {
            for k in 0..width {
                if p + k < len {
                    let dst = p * width * d + k * d;
                    data[dst..dst + d].copy_from_slice(t.row_slice(p + k));
                }
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(
            Op::Unfold(a, width),
            Tensor::matrix(positions, width * d, data)?,
            rg,
        ))
    }

    /// The entry at flat index `index`, as a `[1 x 1]` scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let t = self.value(a);
        let x = *t.data().get(index).ok_or_else(|| {
            TensorError::InvalidArgument(format!("index {index} out of range for {:?}", t.shape()))
        })?;
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Pick(a, index), Tensor::scalar(x), rg))
    }

    /// Scatter-adds the entries of `a` into a `[1 x size]` row:
    /// `out[indices[i]] += a[i]`.
    pub fn scatter(&mut self, a: Var, indices: &[usize], size: usize) -> Result<Var> {
        let t = self.value(a);
        if indices.len() != t.len() || indices.iter().any(|&i| i >= size) {
            return Err(TensorError::InvalidArgument(format!(
                "scatter of {:?} into {size} slots with {} indices",
                t.shape(),
                indices.len()
            )));
        }
        let mut out = vec![0.0; size];
        for (&i, &x) in indices.iter().zip(t.data()) {
            out[i] += x;
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Scatter(a, indices.to_vec()), Tensor::row(out), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(Op::Transpose(a), out, rg)
    }

    /// Runs the tape backwards from a scalar `loss` and returns the
    /// gradient of every parameter the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(TensorError::NonScalarLoss(lt.shape().to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(TensorError::Detached);
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));
        let mut out = Gradients {
            by_param: vec![None; self.params.len()],
        };

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let y = node.value.as_ref();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => accumulate(&mut out.by_param[id.0], g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let gd = g.data();
                    if self.requires_grad(*a) {
                        // dA[i,p] += g[i,:] . B[p,:]
                        let slot = grads[a.0].get_or_insert_with(|| Tensor::zeros(ta.shape()));
                        let d = slot.data_mut();
                        let bd = tb.data();
                        for i in 0..m {
                            let gr = &gd[i * n..(i + 1) * n];
                            for p in 0..k {
                                let br = &bd[p * n..(p + 1) * n];
                                d[i * k + p] += gr.iter().zip(br).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    }
                    if self.requires_grad(*b) {
                        // dB[p,:] += A[i,p] * g[i,:]
                        let slot = grads[b.0].get_or_insert_with(|| Tensor::zeros(tb.shape()));
                        let d = slot.data_mut();
                        let ad = ta.data();
                        for i in 0..m {
                            let gr = &gd[i * n..(i + 1) * n];
                            for p in 0..k {
                                let av = ad[i * k + p];
                                if av == 0.0 {
                                    continue;
                                }
                                for (o, &x) in d[p * n..(p + 1) * n].iter_mut().zip(gr) {
                                    *o += av * x;
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b, kind) | Op::Sub(a, b, kind) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if self.requires_grad(*b) {
                        let mut gb = reduce(&g, *kind, self.value(*b).shape());
                        if sign < 0.0 {
                            gb.scale_in_place(-1.0);
                        }
                        self.send(&mut grads, *b, gb);
                    }
                    if self.requires_grad(*a) {
                        self.send(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b, kind) => {
                    if self.requires_grad(*b) {
                        let prod = zip_map(&g, self.value(*a), |x, y| x * y);
                        self.send(&mut grads, *b, reduce(&prod, *kind, self.value(*b).shape()));
                    }
                    if self.requires_grad(*a) {
                        let tb = self.value(*b);
                        let cols = g.cols();
                        let data = g
                            .data()
                            .iter()
                            .enumerate()
                            .map(|(k, &x)| {
                                x * match kind {
                                    Broadcast::Same => tb.data()[k],
                                    Broadcast::Row => tb.data()[k % cols],
                                    Broadcast::Scalar => tb.data()[0],
                                }
                            })
                            .collect();
                        self.send(&mut grads, *a, Tensor::new(g.shape().to_vec(), data)?);
                    }
                }
                Op::Scale(a, f) => self.send(&mut grads, *a, g.map(|x| x * f)),
                Op::AddScalar(a) => self.send(&mut grads, *a, g),
                Op::Tanh(a) => {
                    let d = zip_map(&g, y.expect("value"), |g, y| g * (1.0 - y * y));
                    self.send(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = zip_map(&g, y.expect("value"), |g, y| g * y * (1.0 - y));
                    self.send(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let d = zip_map(&g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    self.send(&mut grads, *a, d);
                }
                Op::Exp(a) => {
                    let d = zip_map(&g, y.expect("value"), |g, y| g * y);
                    self.send(&mut grads, *a, d);
                }
                Op::Log(a) => {
                    let d = zip_map(&g, self.value(*a), |g, x| g / x);
                    self.send(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    let y = y.expect("value");
                    let cols = y.cols();
                    let mut d = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = &g.data()[r * cols..(r + 1) * cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..cols {
                            d[r * cols + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    self.send(&mut grads, *a, Tensor::new(y.shape().to_vec(), d)?);
                }
                Op::Sum(a) => {
                    let shape = self.value(*a).shape().to_vec();
                    self.send(&mut grads, *a, Tensor::full(&shape, g.item()));
                }
                Op::MeanRows(a) => {
                    let ta = self.value(*a);
                    let r = ta.rows();
                    let mut d = Vec::with_capacity(ta.len());
                    for _ in 0..r {
                        d.extend(g.data().iter().map(|x| x / r as f64));
                    }
                    self.send(&mut grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        if self.requires_grad(p) {
                            let mut d = Vec::with_capacity(rows * c);
                            for r in 0..rows {
                                d.extend_from_slice(&g.data()[r * total + offset..r * total + offset + c]);
                            }
                            let shape = self.value(p).shape().to_vec();
                            self.send(&mut grads, p, Tensor::new(shape, d)?);
                        }
                        offset += c;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        if self.requires_grad(p) {
                            let shape = self.value(p).shape().to_vec();
                            let d = g.data()[offset..offset + n].to_vec();
                            self.send(&mut grads, p, Tensor::new(shape, d)?);
                        }
                        offset += n;
                    }
                }
                Op::SliceCols(a, start) => {
                    let ta = self.value(*a);
                    let (rows, cols, len) = (ta.rows(), ta.cols(), g.cols());
                    let mut d = vec![0.0; ta.len()];
                    for r in 0..rows {
                        d[r * cols + start..r * cols + start + len].copy_from_slice(g.row_slice(r));
                    }
                    self.send(&mut grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
                }
                Op::Rows(a, idx) => {
                    if self.requires_grad(*a) {
                        let ta = self.value(*a);
                        let cols = ta.cols();
                        let slot = grads[a.0].get_or_insert_with(|| Tensor::zeros(ta.shape()));
                        let d = slot.data_mut();
                        for (k, &i) in idx.iter().enumerate() {
                            for (dst, src) in d[i * cols..(i + 1) * cols].iter_mut().zip(g.row_slice(k)) {
                                *dst += src;
                            }
                        }
                    }
                }
                Op::MaxRows(a, arg) => {
                    let ta = self.value(*a);
                    let cols = ta.cols();
                    let mut d = vec![0.0; ta.len()];
                    for (c, &r) in arg.iter().enumerate() {
                        d[r * cols + c] = g.data()[c];
                    }
                    self.send(&mut grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
                }
                Op::Unfold(a, width) => {
                    let ta = self.value(*a);
                    let (len, dim) = (ta.rows(), ta.cols());
                    let mut d = vec![0.0; ta.len()];
                    for p in 0..g.rows() {
                        let gr = g.row_slice(p);
                        for k in 0..*width {
                            if p + k < len {
                                for j in 0..dim {
                                    d[(p + k) * dim + j] += gr[k * dim + j];
                                }
                            }
                        }
                    }
                    self.send(&mut grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
                }
                Op::Pick(a, index) => {
                    let ta = self.value(*a);
                    let mut d = Tensor::zeros(ta.shape());
                    d.data_mut()[*index] = g.item();
                    self.send(&mut grads, *a, d);
                }
                Op::Scatter(a, idx) => {
                    let ta = self.value(*a);
                    let d = idx.iter().map(|&i| g.data()[i]).collect();
                    self.send(&mut grads, *a, Tensor::new(ta.shape().to_vec(), d)?);
                }
                Op::Transpose(a) => self.send(&mut grads, *a, g.transpose()),
            }
        }
        Ok(out)
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: Var, g: Tensor) {
        if self.nodes[to.0].requires_grad {
            accumulate(&mut grads[to.0], g);
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// Sums a full-shape gradient back down to a broadcast operand's shape.
fn reduce(g: &Tensor, kind: Broadcast, shape: &[usize]) -> Tensor {
    match kind {
        Broadcast::Same => g.clone(),
        Broadcast::Scalar => Tensor::full(shape, g.sum()),
        Broadcast::Row => {
            let cols = g.cols();
            let mut d = vec![0.0; cols];
            for r in 0..g.rows() {
                for (o, x) in d.iter_mut().zip(g.row_slice(r)) {
                    *o += x;
                }
            }
            Tensor::new(shape.to_vec(), d).expect("row shape")
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax over each row; masked columns are exactly 0.
pub fn softmax_rows(t: &Tensor, mask: Option<&[bool]>) -> Tensor {
    let cols = t.cols();
    let keep = |c: usize| mask.is_none_or(|m| m[c]);
    let mut out = vec![0.0; t.len()];
    for r in 0..t.rows() {
        let row = t.row_slice(r);
        let max = (0..cols)
            .filter(|&c| keep(c))
            .map(|c| row[c])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for c in (0..cols).filter(|&c| keep(c)) {
            let e = (row[c] - max).exp();
            out[r * cols + c] = e;
            total += e;
        }
        for c in 0..cols {
            out[r * cols + c] /= total;
        }
    }
    Tensor::new(t.shape().to_vec(), out).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(g: &mut Graph, v: &[f64]) -> Var {
        g.input(Tensor::row(v.to_vec()))
    }

    #[test]
    fn softmax_uniform_and_stable() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = row(&mut g, &[0.0, 0.0, 0.0]);
        let s = g.softmax(a);
        for &p in g.value(s).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let b = row(&mut g, &[1000.0, 0.0]);
        let s = g.softmax(b);
        let v = g.value(s).data();
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1] >= 0.0 && v[1] < 1e-300);
    }

    #[test]
    fn softmax_one_two() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = row(&mut g, &[1.0, 2.0]);
        let s = g.softmax(a);
        let e = std::f64::consts::E;
        let expected = [e / (e + e * e), e * e / (e + e * e)];
        for (p, q) in g.value(s).data().iter().zip(expected) {
            assert!((p - q).abs() < 1e-15);
        }
        assert!((g.value(s).data()[0] - 0.268_941_421_369_995).abs() < 1e-12);
    }

    #[test]
    fn masked_entries_are_zero() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = row(&mut g, &[3.0, 1.0, 2.0]);
        let s = g.softmax_masked(a, &[true, false, true]).unwrap();
        let v = g.value(s).data();
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-12);
        assert!(g.softmax_masked(a, &[false, false, false]).is_err());
    }

    #[test]
    fn grad_of_sum_wx_is_x() {
        let mut store = ParamStore::new();
        let w = store
            .add("w", Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap())
            .unwrap();
        let unused = store.add_zeros("unused", &[1, 1]).unwrap();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::row(vec![2.0, -1.0]));
        let wv = g.param(w);
        let y = g.matmul(x, wv).unwrap();
        let loss = g.sum(y);
        let grads = g.backward(loss).unwrap();
        assert_eq!(
            grads.get(w).unwrap().data(),
            &[2.0, 2.0, 2.0, -1.0, -1.0, -1.0]
        );
        assert!(grads.get(unused).is_none());
        drop(g);
        store.accumulate(&grads);
        assert!(store.get(unused).gradient.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_on_constant_is_error() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor::scalar(1.0));
        assert!(matches!(g.backward(a), Err(TensorError::Detached)));
    }

    #[test]
    fn max_pool_routes_to_argmax() {
        let mut store = ParamStore::new();
        let p = store
            .add("x", Tensor::matrix(3, 2, vec![1.0, 5.0, 3.0, 5.0, 2.0, 0.0]).unwrap())
            .unwrap();
        let mut g = Graph::new(&store);
        let x = g.param(p);
        let m = g.max_rows(x).unwrap();
        assert_eq!(g.value(m).data(), &[3.0, 5.0]);
        let loss = g.sum(m);
        let grads = g.backward(loss).unwrap();
        // column 1 ties between rows 0 and 1; the earliest wins
        assert_eq!(grads.get(p).unwrap().data(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unfold_pads_short_sequences() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
        let u = g.unfold(x, 3).unwrap();
        assert_eq!(g.value(u).shape(), &[1, 3]);
        assert_eq!(g.value(u).data(), &[1.0, 2.0, 0.0]);
        let u2 = g.unfold(x, 1).unwrap();
        assert_eq!(g.value(u2).shape(), &[2, 1]);
    }
}
