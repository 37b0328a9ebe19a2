//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a `1 x 1` loss propagates gradients back through
//! the recording and accumulates them (additively) into the `grad` buffers
//! of the [`ParamStore`] tensors that were read with [`Tape::param`].
//!
//! The op set is deliberately small: exactly what the HGRN trunk and the
//! training losses need. Segment ops (`segment_softmax`,
//! `segment_weighted_sum`) implement attention over variable-size
//! neighbourhoods packed as contiguous edge ranges.

use std::collections::HashMap;

use super::matrix::{axpy, dot, Matrix};
use super::params::{ParamId, ParamStore};
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    RowDot(Var, Var),
    SegmentSoftmax(Var, Vec<usize>),
    SegmentWeightedSum(Var, Var, Vec<usize>),
    PickCols(Var, Vec<usize>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LogSumExpRows(Var),
    SumAll(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Recording of a forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    // Set by `backward`, cleared by recording any new node.
    consumed: bool,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::config(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

fn validate_offsets(op: &str, offsets: &[usize], rows: usize) -> Result<()> {
    let ok = !offsets.is_empty()
        && offsets[0] == 0
        && *offsets.last().unwrap() == rows
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{op}: segment offsets must rise from 0 to {rows}"
        )))
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.consumed = false;
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Reads a parameter. Repeated reads of the same id share one node, so
    /// its gradient is accumulated once per backward pass.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = store.get(id);
        let (r, c) = t.matrix_shape();
        let value = Matrix::from_vec(r, c, t.values.clone()).expect("validated tensor shape");
        let v = self.push(value, Op::Param(id));
        self.params.insert(id, v);
        v
    }

    /// `x · wᵀ` for `x: n x in`, `w: out x in`.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.cols() != wv.cols() {
            return Err(shape_err("matmul_t", xv.shape(), wv.shape()));
        }
        let (n, out) = (xv.rows(), wv.rows());
        let mut y = Matrix::zeros(n, out);
        for r in 0..n {
            let xr = xv.row(r);
            let yr = y.row_mut(r);
            for (o, yo) in yr.iter_mut().enumerate() {
                *yo = dot(xr, wv.row(o));
            }
        }
        Ok(self.push(y, Op::MatMulT(x, w)))
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err("add_row", xv.shape(), bv.shape()));
        }
        let mut y = xv.clone();
        let bias = bv.data().to_vec();
        for r in 0..y.rows() {
            for (a, b) in y.row_mut(r).iter_mut().zip(&bias) {
                *a += b;
            }
        }
        Ok(self.push(y, Op::AddRow(x, b)))
    }

    fn zip_with(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(name, av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| f(*x, *y)).collect();
        Matrix::from_vec(av.rows(), av.cols(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Matrix {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| f(x)).collect();
        Matrix::from_vec(av.rows(), av.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.zip_with(a, b, "add", |x, y| x + y)?;
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.zip_with(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(y, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.zip_with(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(y, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let y = self.map(a, |x| x * s);
        self.push(y, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = self.map(a, |x| x.max(0.0));
        self.push(y, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.map(a, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(y, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.map(a, f64::tanh);
        self.push(y, Op::Tanh(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let y = self.map(a, |x| x * x);
        self.push(y, Op::Square(a))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::config("concat_cols: no inputs"))?;
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(shape_err("concat_cols", (rows, cols), v.shape()));
            }
            cols += v.cols();
        }
        let mut y = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            let w = v.cols();
            for r in 0..rows {
                y.row_mut(r)[off..off + w].copy_from_slice(v.row(r));
            }
            off += w;
        }
        Ok(self.push(y, Op::ConcatCols(parts.to_vec())))
    }

    /// Vertical concatenation of matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.value(p).cols())
            .ok_or_else(|| Error::config("concat_rows: no inputs"))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(shape_err("concat_rows", (rows, cols), v.shape()));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let y = Matrix::from_vec(rows, cols, data)?;
        Ok(self.push(y, Op::ConcatRows(parts.to_vec())))
    }

    /// Columns `start..start + width`.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let av = self.value(a);
        if start + width > av.cols() {
            return Err(Error::config(format!(
                "slice_cols: {start}+{width} exceeds {} columns",
                av.cols()
            )));
        }
        let mut y = Matrix::zeros(av.rows(), width);
        for r in 0..av.rows() {
            y.row_mut(r).copy_from_slice(&av.row(r)[start..start + width]);
        }
        Ok(self.push(y, Op::SliceCols(a, start)))
    }

    /// Row `r` of the output is row `idx[r]` of `a`. Indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let av = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= av.rows()) {
            return Err(Error::config(format!(
                "gather_rows: index {bad} out of {} rows",
                av.rows()
            )));
        }
        let cols = av.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(av.row(i));
        }
        let y = Matrix::from_vec(idx.len(), cols, data)?;
        Ok(self.push(y, Op::GatherRows(a, idx.to_vec())))
    }

    /// Per-row dot product, giving an `n x 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("row_dot", av.shape(), bv.shape()));
        }
        let data = (0..av.rows()).map(|r| dot(av.row(r), bv.row(r))).collect();
        let y = Matrix::from_vec(av.rows(), 1, data)?;
        Ok(self.push(y, Op::RowDot(a, b)))
    }

    /// Softmax of an `E x 1` column within each segment
    /// `offsets[s]..offsets[s + 1]`.
    pub fn segment_softmax(&mut self, scores: Var, offsets: &[usize]) -> Result<Var> {
        let sv = self.value(scores);
        if sv.cols() != 1 {
            return Err(Error::config("segment_softmax expects a column"));
        }
        validate_offsets("segment_softmax", offsets, sv.rows())?;
        let mut y = Matrix::zeros(sv.rows(), 1);
        for w in offsets.windows(2) {
            let seg = &sv.data()[w[0]..w[1]];
            if seg.is_empty() {
                continue;
            }
            let p = super::numeric::softmax(seg);
            y.data_mut()[w[0]..w[1]].copy_from_slice(&p);
        }
        Ok(self.push(y, Op::SegmentSoftmax(scores, offsets.to_vec())))
    }

    /// `out[s] = sum_{e in segment s} weights[e] * values[e]`; empty
    /// segments produce zero rows.
    pub fn segment_weighted_sum(&mut self, weights: Var, values: Var, offsets: &[usize]) -> Result<Var> {
        let (wv, vv) = (self.value(weights), self.value(values));
        if wv.cols() != 1 || wv.rows() != vv.rows() {
            return Err(shape_err("segment_weighted_sum", wv.shape(), vv.shape()));
        }
        validate_offsets("segment_weighted_sum", offsets, vv.rows())?;
        let nseg = offsets.len() - 1;
        let mut y = Matrix::zeros(nseg, vv.cols());
        for s in 0..nseg {
            for e in offsets[s]..offsets[s + 1] {
                axpy(wv.data()[e], vv.row(e), y.row_mut(s));
            }
        }
        Ok(self.push(y, Op::SegmentWeightedSum(weights, values, offsets.to_vec())))
    }

    /// `out[r] = a[r, idx[r]]` as an `n x 1` column.
    pub fn pick_cols(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let av = self.value(a);
        if idx.len() != av.rows() || idx.iter().any(|&c| c >= av.cols()) {
            return Err(Error::config(format!(
                "pick_cols: {} indices for a {:?} matrix",
                idx.len(),
                av.shape()
            )));
        }
        let data = idx.iter().enumerate().map(|(r, &c)| av.get(r, c)).collect();
        let y = Matrix::from_vec(av.rows(), 1, data)?;
        Ok(self.push(y, Op::PickCols(a, idx.to_vec())))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut y = Matrix::zeros(av.rows(), av.cols());
        for r in 0..av.rows() {
            let p = super::numeric::softmax(av.row(r));
            y.row_mut(r).copy_from_slice(&p);
        }
        self.push(y, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let mut y = Matrix::zeros(av.rows(), av.cols());
        for r in 0..av.rows() {
            let p = super::numeric::log_softmax(av.row(r));
            y.row_mut(r).copy_from_slice(&p);
        }
        self.push(y, Op::LogSoftmaxRows(a))
    }

    /// Row-wise log-sum-exp, giving an `n x 1` column.
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = (0..av.rows())
            .map(|r| super::numeric::log_sum_exp(av.row(r)))
            .collect();
        let y = Matrix::from_vec(av.rows(), 1, data).expect("column");
        self.push(y, Op::LogSumExpRows(a))
    }

    /// Sum of all entries as a `1 x 1` node.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Matrix::filled(1, 1, s), Op::SumAll(a))
    }

    /// Mean of all entries as a `1 x 1` node.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Propagates `d loss / d node` from the `1 x 1` node `loss` and adds
    /// the parameter gradients into `store`.
    ///
    /// Fails when called again before any new operation was recorded.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.consumed {
            return Err(Error::Tape(
                "backward called twice without an intervening forward pass".into(),
            ));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Tape(format!(
                "loss must be 1x1, got {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    let t = store.get_mut(*id);
                    if t.grad.len() != g.len() {
                        return Err(Error::Tape(format!(
                            "parameter {} changed shape since it was recorded",
                            t.name
                        )));
                    }
                    for (dst, src) in t.grad.iter_mut().zip(g.data()) {
                        *dst += src;
                    }
                }
                Op::MatMulT(x, w) => {
                    let (xv, wv) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                    let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                    let mut dw = Matrix::zeros(wv.rows(), wv.cols());
                    for r in 0..xv.rows() {
                        let gr = g.row(r);
                        let xr = xv.row(r);
                        for (o, &go) in gr.iter().enumerate() {
                            if go == 0.0 {
                                continue;
                            }
                            axpy(go, wv.row(o), dx.row_mut(r));
                            axpy(go, xr, dw.row_mut(o));
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                }
                Op::AddRow(x, b) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, s) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads, *b, db);
                    accumulate(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    let neg = scaled(&g, -1.0);
                    accumulate(&mut grads, *a, g);
                    accumulate(&mut grads, *b, neg);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let da = elementwise(&g, bv, |x, y| x * y);
                    let db = elementwise(&g, av, |x, y| x * y);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, scaled(&g, *s)),
                Op::Relu(a) => {
                    let d = elementwise(&g, &node.value, |gi, y| if y > 0.0 { gi } else { 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = elementwise(&g, &node.value, |gi, y| gi * y * (1.0 - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = elementwise(&g, &node.value, |gi, y| gi * (1.0 - y * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Square(a) => {
                    let d = elementwise(&g, &self.nodes[a.0].value, |gi, x| 2.0 * x * gi);
                    accumulate(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.cols();
                        let mut d = Matrix::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            d.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut grads, *p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let (rows, cols) = self.nodes[p.0].value.shape();
                        let d = Matrix::from_vec(
                            rows,
                            cols,
                            g.data()[off * cols..(off + rows) * cols].to_vec(),
                        )?;
                        off += rows;
                        accumulate(&mut grads, *p, d);
                    }
                }
                Op::SliceCols(a, start) => {
                    let (rows, cols) = self.nodes[a.0].value.shape();
                    let w = g.cols();
                    let mut d = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        d.row_mut(r)[*start..start + w].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::GatherRows(a, idx) => {
                    let (rows, cols) = self.nodes[a.0].value.shape();
                    let mut d = Matrix::zeros(rows, cols);
                    for (r, &src) in idx.iter().enumerate() {
                        axpy(1.0, g.row(r), d.row_mut(src));
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::RowDot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let mut da = Matrix::zeros(av.rows(), av.cols());
                    let mut db = Matrix::zeros(bv.rows(), bv.cols());
                    for r in 0..av.rows() {
                        let gr = g.data()[r];
                        axpy(gr, bv.row(r), da.row_mut(r));
                        axpy(gr, av.row(r), db.row_mut(r));
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::SegmentSoftmax(a, offsets) => {
                    let y = node.value.data();
                    let mut d = Matrix::zeros(y.len(), 1);
                    for w in offsets.windows(2) {
                        let (lo, hi) = (w[0], w[1]);
                        let inner: f64 = (lo..hi).map(|e| y[e] * g.data()[e]).sum();
                        for e in lo..hi {
                            d.data_mut()[e] = y[e] * (g.data()[e] - inner);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::SegmentWeightedSum(wts, vals, offsets) => {
                    let (wv, vv) = (&self.nodes[wts.0].value, &self.nodes[vals.0].value);
                    let mut dw = Matrix::zeros(wv.rows(), 1);
                    let mut dv = Matrix::zeros(vv.rows(), vv.cols());
                    for s in 0..offsets.len() - 1 {
                        let gs = g.row(s);
                        for e in offsets[s]..offsets[s + 1] {
                            dw.data_mut()[e] = dot(gs, vv.row(e));
                            axpy(wv.data()[e], gs, dv.row_mut(e));
                        }
                    }
                    accumulate(&mut grads, *wts, dw);
                    accumulate(&mut grads, *vals, dv);
                }
                Op::PickCols(a, idx) => {
                    let (rows, cols) = self.nodes[a.0].value.shape();
                    let mut d = Matrix::zeros(rows, cols);
                    for (r, &c) in idx.iter().enumerate() {
                        d.set(r, c, g.data()[r]);
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let inner = dot(y.row(r), g.row(r));
                        let (yr, gr) = (y.row(r), g.row(r));
                        for (c, dc) in d.row_mut(r).iter_mut().enumerate() {
                            *dc = yr[c] * (gr[c] - inner);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::LogSoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let gsum: f64 = g.row(r).iter().sum();
                        let (yr, gr) = (y.row(r), g.row(r));
                        for (c, dc) in d.row_mut(r).iter_mut().enumerate() {
                            *dc = gr[c] - yr[c].exp() * gsum;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::LogSumExpRows(a) => {
                    let av = &self.nodes[a.0].value;
                    let mut d = Matrix::zeros(av.rows(), av.cols());
                    for r in 0..av.rows() {
                        let p = super::numeric::softmax(av.row(r));
                        let gr = g.data()[r];
                        for (dc, pc) in d.row_mut(r).iter_mut().zip(p) {
                            *dc = gr * pc;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::SumAll(a) => {
                    let (rows, cols) = self.nodes[a.0].value.shape();
                    accumulate(&mut grads, *a, Matrix::filled(rows, cols, g.scalar()));
                }
            }
        }

        for t in store.tensors() {
            if t.grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient in {}", t.name)));
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn scaled(g: &Matrix, s: f64) -> Matrix {
    let data = g.data().iter().map(|x| x * s).collect();
    Matrix::from_vec(g.rows(), g.cols(), data).expect("same shape")
}

fn elementwise(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}
