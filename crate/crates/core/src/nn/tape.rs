//! The recording tape: forward ops append nodes, `backward` replays them in
//! reverse. Node creation order is topological by construction (an op can
//! only reference ids that already exist), so the reverse walk visits every
//! node after all of its consumers.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{s, Array2, Axis};

use super::{real, NnError, Parameter, Real};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

enum Op<F: Real> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, F),
    AddBias { x: usize, bias: usize },
    Matmul(usize, usize),
    Transpose(usize),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    LayerNorm { x: usize, gain: usize, shift: usize, eps: F },
    // also recorded by masked_softmax: denied entries carry probability
    // exactly 0, so the plain softmax Jacobian already routes zero
    // gradient to them and the mask is not needed in the backward pass
    Softmax(usize),
    GatherRows { x: usize, idx: Rc<Vec<usize>> },
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceCols { x: usize, start: usize, end: usize },
    NllSum { probs: usize, labels: Rc<Vec<usize>> },
    MeanAll(usize),
}

struct Node<F: Real> {
    value: Array2<F>,
    grad: Option<Array2<F>>,
    op: Op<F>,
}

/// Records a forward computation over `Array2` values.
///
/// One tape corresponds to one forward pass; build a fresh tape per step.
/// `backward` may be called once and accumulates into the parameters
/// registered through [`Tape::param`].
pub struct Tape<F: Real> {
    inner: RefCell<Inner<F>>,
}

struct Inner<F: Real> {
    nodes: Vec<Node<F>>,
    // node index -> originating parameter, for gradient writeback
    param_leaves: Vec<(usize, Parameter<F>)>,
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Self {
            inner: RefCell::new(Inner { nodes: Vec::new(), param_leaves: Vec::new() }),
        }
    }

    fn push(&self, value: Array2<F>, op: Op<F>) -> TensorId {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { value, grad: None, op });
        TensorId(inner.nodes.len() - 1)
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Non-differentiable input (data, constants).
    pub fn leaf(&self, value: Array2<F>) -> TensorId {
        self.push(value, Op::Leaf)
    }

    /// Differentiable leaf backed by `p`; `backward` adds into `p.grad`.
    pub fn param(&self, p: &Parameter<F>) -> TensorId {
        let id = self.push(p.value(), Op::Leaf);
        self.inner.borrow_mut().param_leaves.push((id.0, p.clone()));
        id
    }

    pub fn value(&self, id: TensorId) -> Array2<F> {
        self.inner.borrow().nodes[id.0].value.clone()
    }

    pub fn shape(&self, id: TensorId) -> (usize, usize) {
        self.inner.borrow().nodes[id.0].value.dim()
    }

    /// Scalar value of a `[1, 1]` node.
    pub fn scalar(&self, id: TensorId) -> F {
        let inner = self.inner.borrow();
        let v = &inner.nodes[id.0].value;
        debug_assert_eq!(v.dim(), (1, 1));
        v[(0, 0)]
    }

    fn binary_same_shape(
        &self,
        op_name: &'static str,
        a: TensorId,
        b: TensorId,
        compute: impl FnOnce(&Array2<F>, &Array2<F>) -> Array2<F>,
        op: Op<F>,
    ) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let va = &inner.nodes[a.0].value;
            let vb = &inner.nodes[b.0].value;
            if va.dim() != vb.dim() {
                return Err(shape_err(op_name, va, vb));
            }
            compute(va, vb)
        };
        Ok(self.push(value, op))
    }

    pub fn add(&self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    /// Elementwise product.
    pub fn mul(&self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        self.binary_same_shape("mul", a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    pub fn scale(&self, x: TensorId, c: F) -> TensorId {
        let value = {
            let inner = self.inner.borrow();
            &inner.nodes[x.0].value * c
        };
        self.push(value, Op::Scale(x.0, c))
    }

    /// Add a `[1, d]` bias row to every row of `x`.
    pub fn add_bias(&self, x: TensorId, bias: TensorId) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            let vb = &inner.nodes[bias.0].value;
            if vb.nrows() != 1 || vb.ncols() != vx.ncols() {
                return Err(shape_err("add_bias", vx, vb));
            }
            vx + &vb.row(0)
        };
        Ok(self.push(value, Op::AddBias { x: x.0, bias: bias.0 }))
    }

    pub fn matmul(&self, a: TensorId, b: TensorId) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let va = &inner.nodes[a.0].value;
            let vb = &inner.nodes[b.0].value;
            if va.ncols() != vb.nrows() {
                return Err(shape_err("matmul", va, vb));
            }
            va.dot(vb)
        };
        Ok(self.push(value, Op::Matmul(a.0, b.0)))
    }

    pub fn transpose(&self, x: TensorId) -> TensorId {
        let value = {
            let inner = self.inner.borrow();
            inner.nodes[x.0].value.t().to_owned()
        };
        self.push(value, Op::Transpose(x.0))
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&self, x: TensorId) -> TensorId {
        let value = {
            let inner = self.inner.borrow();
            inner.nodes[x.0].value.mapv(|v| if v > F::zero() { v } else { F::zero() })
        };
        self.push(value, Op::Relu(x.0))
    }

    pub fn sigmoid(&self, x: TensorId) -> TensorId {
        let one = F::one();
        let value = {
            let inner = self.inner.borrow();
            inner.nodes[x.0].value.mapv(|v| one / (one + (-v).exp()))
        };
        self.push(value, Op::Sigmoid(x.0))
    }

    pub fn tanh(&self, x: TensorId) -> TensorId {
        let value = {
            let inner = self.inner.borrow();
            inner.nodes[x.0].value.mapv(|v| v.tanh())
        };
        self.push(value, Op::Tanh(x.0))
    }

    /// Per-row standardization along the last axis followed by an
    /// elementwise affine with `[1, d]` gain and shift.
    pub fn layer_norm(
        &self,
        x: TensorId,
        gain: TensorId,
        shift: TensorId,
        eps: F,
    ) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            let vg = &inner.nodes[gain.0].value;
            let vs = &inner.nodes[shift.0].value;
            if vg.dim() != (1, vx.ncols()) {
                return Err(shape_err("layer_norm gain", vx, vg));
            }
            if vs.dim() != (1, vx.ncols()) {
                return Err(shape_err("layer_norm shift", vx, vs));
            }
            let mut out = Array2::zeros(vx.raw_dim());
            for (row, mut out_row) in vx.rows().into_iter().zip(out.rows_mut()) {
                let (mean, inv_std) = row_moments(&row, eps);
                for (j, o) in out_row.iter_mut().enumerate() {
                    *o = (row[j] - mean) * inv_std * vg[(0, j)] + vs[(0, j)];
                }
            }
            out
        };
        Ok(self.push(value, Op::LayerNorm { x: x.0, gain: gain.0, shift: shift.0, eps }))
    }

    /// Row-wise softmax.
    pub fn softmax(&self, x: TensorId) -> TensorId {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            let mut out = Array2::zeros(vx.raw_dim());
            for (row, mut out_row) in vx.rows().into_iter().zip(out.rows_mut()) {
                let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
                let mut sum = F::zero();
                for (j, &v) in row.iter().enumerate() {
                    let e = (v - max).exp();
                    out_row[j] = e;
                    sum += e;
                }
                out_row.mapv_inplace(|e| e / sum);
            }
            out
        };
        self.push(value, Op::Softmax(x.0))
    }

    /// Row-wise softmax over the allowed entries only.
    ///
    /// Denied entries are excluded from the normalizing sum and receive
    /// probability exactly `0`, making downstream invariance to masked
    /// inputs exact rather than approximate.
    pub fn masked_softmax(
        &self,
        x: TensorId,
        mask: Rc<Array2<bool>>,
    ) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            if vx.dim() != mask.dim() {
                let lhs = vx.shape().to_vec();
                let rhs = mask.shape().to_vec();
                return Err(NnError::ShapeMismatch { op: "masked_softmax", lhs, rhs });
            }
            let mut out = Array2::zeros(vx.raw_dim());
            for (r, (row, mut out_row)) in
                vx.rows().into_iter().zip(out.rows_mut()).enumerate()
            {
                let mut max = F::neg_infinity();
                for (j, &v) in row.iter().enumerate() {
                    if mask[(r, j)] && v > max {
                        max = v;
                    }
                }
                if max == F::neg_infinity() {
                    return Err(NnError::FullyMaskedRow { row: r });
                }
                let mut sum = F::zero();
                for (j, &v) in row.iter().enumerate() {
                    if mask[(r, j)] {
                        let e = (v - max).exp();
                        out_row[j] = e;
                        sum += e;
                    }
                }
                for (j, o) in out_row.iter_mut().enumerate() {
                    if mask[(r, j)] {
                        *o = *o / sum;
                    }
                }
            }
            out
        };
        Ok(self.push(value, Op::Softmax(x.0)))
    }

    /// Select rows by index (repeats allowed); backward scatter-adds.
    pub fn gather_rows(&self, x: TensorId, idx: Rc<Vec<usize>>) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            let mut out = Array2::zeros((idx.len(), vx.ncols()));
            for (r, &i) in idx.iter().enumerate() {
                if i >= vx.nrows() {
                    return Err(NnError::IndexOutOfRange { index: i, len: vx.nrows() });
                }
                out.row_mut(r).assign(&vx.row(i));
            }
            out
        };
        Ok(self.push(value, Op::GatherRows { x: x.0, idx }))
    }

    pub fn concat_rows(&self, parts: &[TensorId]) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let cols = inner.nodes[parts[0].0].value.ncols();
            let rows: usize = parts.iter().map(|p| inner.nodes[p.0].value.nrows()).sum();
            let mut out = Array2::zeros((rows, cols));
            let mut at = 0;
            for p in parts {
                let v = &inner.nodes[p.0].value;
                if v.ncols() != cols {
                    return Err(shape_err("concat_rows", &inner.nodes[parts[0].0].value, v));
                }
                out.slice_mut(s![at..at + v.nrows(), ..]).assign(v);
                at += v.nrows();
            }
            out
        };
        Ok(self.push(value, Op::ConcatRows(parts.iter().map(|p| p.0).collect())))
    }

    pub fn concat_cols(&self, parts: &[TensorId]) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let rows = inner.nodes[parts[0].0].value.nrows();
            let cols: usize = parts.iter().map(|p| inner.nodes[p.0].value.ncols()).sum();
            let mut out = Array2::zeros((rows, cols));
            let mut at = 0;
            for p in parts {
                let v = &inner.nodes[p.0].value;
                if v.nrows() != rows {
                    return Err(shape_err("concat_cols", &inner.nodes[parts[0].0].value, v));
                }
                out.slice_mut(s![.., at..at + v.ncols()]).assign(v);
                at += v.ncols();
            }
            out
        };
        Ok(self.push(value, Op::ConcatCols(parts.iter().map(|p| p.0).collect())))
    }

    pub fn slice_cols(&self, x: TensorId, start: usize, end: usize) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            if start >= end || end > vx.ncols() {
                return Err(NnError::IndexOutOfRange { index: end, len: vx.ncols() });
            }
            vx.slice(s![.., start..end]).to_owned()
        };
        Ok(self.push(value, Op::SliceCols { x: x.0, start, end }))
    }

    /// `sum_r -ln(probs[r, labels[r]])` as a `[1, 1]` scalar.
    pub fn nll_sum(&self, probs: TensorId, labels: Rc<Vec<usize>>) -> Result<TensorId, NnError> {
        let value = {
            let inner = self.inner.borrow();
            let vp = &inner.nodes[probs.0].value;
            if labels.len() != vp.nrows() {
                return Err(NnError::ShapeMismatch {
                    op: "nll_sum",
                    lhs: vp.shape().to_vec(),
                    rhs: vec![labels.len()],
                });
            }
            let mut total = F::zero();
            for (r, &l) in labels.iter().enumerate() {
                if l >= vp.ncols() {
                    return Err(NnError::LabelOutOfRange { row: r, label: l, classes: vp.ncols() });
                }
                total -= vp[(r, l)].ln();
            }
            Array2::from_elem((1, 1), total)
        };
        Ok(self.push(value, Op::NllSum { probs: probs.0, labels }))
    }

    /// Mean over all entries as a `[1, 1]` scalar.
    pub fn mean_all(&self, x: TensorId) -> TensorId {
        let value = {
            let inner = self.inner.borrow();
            let vx = &inner.nodes[x.0].value;
            let n = real::<F>(vx.len() as f64);
            Array2::from_elem((1, 1), vx.sum() / n)
        };
        self.push(value, Op::MeanAll(x.0))
    }

    /// Reverse pass from a scalar loss node. Gradients accumulate into the
    /// registered parameters; call once per tape.
    pub fn backward(&self, loss: TensorId) -> Result<(), NnError> {
        let mut inner = self.inner.borrow_mut();
        {
            let v = &inner.nodes[loss.0].value;
            if v.dim() != (1, 1) {
                return Err(NnError::NonScalarLoss { rows: v.nrows(), cols: v.ncols() });
            }
        }
        inner.nodes[loss.0].grad = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = inner.nodes[i].grad.take() else { continue };
            let (before, rest) = inner.nodes.split_at_mut(i);
            let node = &rest[0];
            match &node.op {
                Op::Leaf => {
                    // retained so parameter writeback below can read it
                    rest[0].grad = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(before, *b, g.clone());
                    accumulate(before, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(before, *b, g.mapv(|v| -v));
                    accumulate(before, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * &before[*b].value;
                    let gb = &g * &before[*a].value;
                    accumulate(before, *a, ga);
                    accumulate(before, *b, gb);
                }
                Op::Scale(a, c) => {
                    accumulate(before, *a, &g * *c);
                }
                Op::AddBias { x, bias } => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(before, *bias, gb);
                    accumulate(before, *x, g);
                }
                Op::Matmul(a, b) => {
                    let ga = g.dot(&before[*b].value.t());
                    let gb = before[*a].value.t().dot(&g);
                    accumulate(before, *a, ga);
                    accumulate(before, *b, gb);
                }
                Op::Transpose(a) => {
                    accumulate(before, *a, g.t().to_owned());
                }
                Op::Relu(a) => {
                    let vx = &before[*a].value;
                    let mut gx = g;
                    gx.zip_mut_with(vx, |gi, &xi| {
                        if xi <= F::zero() {
                            *gi = F::zero();
                        }
                    });
                    accumulate(before, *a, gx);
                }
                Op::Sigmoid(a) => {
                    let s = &node.value;
                    let gx = &g * &(s * &s.mapv(|v| F::one() - v));
                    accumulate(before, *a, gx);
                }
                Op::Tanh(a) => {
                    let gx = &g * &node.value.mapv(|v| F::one() - v * v);
                    accumulate(before, *a, gx);
                }
                Op::LayerNorm { x, gain, shift, eps } => {
                    let vx = &before[*x].value;
                    let vg = &before[*gain].value;
                    let d = vx.ncols();
                    let inv_d = F::one() / real::<F>(d as f64);
                    let mut gx = Array2::zeros(vx.raw_dim());
                    let mut ggain = Array2::zeros((1, d));
                    let mut gshift = Array2::zeros((1, d));
                    for (r, row) in vx.rows().into_iter().enumerate() {
                        let (mean, inv_std) = row_moments(&row, *eps);
                        // ghat = upstream grad through the affine gain
                        let mut ghat_sum = F::zero();
                        let mut ghat_y_sum = F::zero();
                        for j in 0..d {
                            let y = (row[j] - mean) * inv_std;
                            let ghat = g[(r, j)] * vg[(0, j)];
                            ghat_sum += ghat;
                            ghat_y_sum += ghat * y;
                            ggain[(0, j)] += g[(r, j)] * y;
                            gshift[(0, j)] += g[(r, j)];
                        }
                        for j in 0..d {
                            let y = (row[j] - mean) * inv_std;
                            let ghat = g[(r, j)] * vg[(0, j)];
                            gx[(r, j)] =
                                (ghat - ghat_sum * inv_d - y * ghat_y_sum * inv_d) * inv_std;
                        }
                    }
                    accumulate(before, *x, gx);
                    accumulate(before, *gain, ggain);
                    accumulate(before, *shift, gshift);
                }
                Op::Softmax(a) => {
                    let p = &node.value;
                    let mut gx = Array2::zeros(p.raw_dim());
                    for r in 0..p.nrows() {
                        let mut dot = F::zero();
                        for j in 0..p.ncols() {
                            dot += g[(r, j)] * p[(r, j)];
                        }
                        for j in 0..p.ncols() {
                            gx[(r, j)] = p[(r, j)] * (g[(r, j)] - dot);
                        }
                    }
                    accumulate(before, *a, gx);
                }
                Op::GatherRows { x, idx } => {
                    let vx = &before[*x].value;
                    let mut gx = Array2::zeros(vx.raw_dim());
                    for (r, &i) in idx.iter().enumerate() {
                        let mut row = gx.row_mut(i);
                        row += &g.row(r);
                    }
                    accumulate(before, *x, gx);
                }
                Op::ConcatRows(parts) => {
                    let parts = parts.clone();
                    let mut at = 0;
                    for p in parts {
                        let n = before[p].value.nrows();
                        let gp = g.slice(s![at..at + n, ..]).to_owned();
                        accumulate(before, p, gp);
                        at += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let parts = parts.clone();
                    let mut at = 0;
                    for p in parts {
                        let n = before[p].value.ncols();
                        let gp = g.slice(s![.., at..at + n]).to_owned();
                        accumulate(before, p, gp);
                        at += n;
                    }
                }
                Op::SliceCols { x, start, end } => {
                    let vx = &before[*x].value;
                    let mut gx = Array2::zeros(vx.raw_dim());
                    gx.slice_mut(s![.., *start..*end]).assign(&g);
                    accumulate(before, *x, gx);
                }
                Op::NllSum { probs, labels } => {
                    let vp = &before[*probs].value;
                    let gs = g[(0, 0)];
                    let mut gp = Array2::zeros(vp.raw_dim());
                    for (r, &l) in labels.iter().enumerate() {
                        gp[(r, l)] = -gs / vp[(r, l)];
                    }
                    accumulate(before, *probs, gp);
                }
                Op::MeanAll(a) => {
                    let vx = &before[*a].value;
                    let c = g[(0, 0)] / real::<F>(vx.len() as f64);
                    accumulate(before, *a, Array2::from_elem(vx.raw_dim(), c));
                }
            }
        }

        // writeback into parameters
        let Inner { nodes, param_leaves } = &mut *inner;
        for (idx, p) in param_leaves.iter() {
            if let Some(g) = nodes[*idx].grad.take() {
                if p.trainable() {
                    p.accumulate_grad(&g);
                }
            }
        }
        Ok(())
    }
}

fn accumulate<F: Real>(nodes: &mut [Node<F>], idx: usize, contrib: Array2<F>) {
    match &mut nodes[idx].grad {
        Some(g) => *g += &contrib,
        slot @ None => *slot = Some(contrib),
    }
}

fn shape_err<F: Real>(op: &'static str, a: &Array2<F>, b: &Array2<F>) -> NnError {
    NnError::ShapeMismatch { op, lhs: a.shape().to_vec(), rhs: b.shape().to_vec() }
}

/// Mean and inverse standard deviation (biased variance + eps) of one row.
fn row_moments<F: Real>(row: &ndarray::ArrayView1<'_, F>, eps: F) -> (F, F) {
    let n = real::<F>(row.len() as f64);
    let mean = row.sum() / n;
    let mut var = F::zero();
    for &v in row {
        let d = v - mean;
        var += d * d;
    }
    var = var / n;
    (mean, F::one() / (var + eps).sqrt())
}
