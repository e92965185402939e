//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! A [`Tape`] is built fresh for every forward pass. Each operation appends a
//! node holding its output value and enough bookkeeping to run its backward
//! rule; [`Tape::backward`] walks the nodes once in reverse and deposits
//! parameter gradients into the [`ParamStore`] they were read from.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Result, TipError};
use crate::params::{ParamId, ParamStore};
use crate::sparse::{Adjacency, RelationalAdjacency};
use crate::tensor::{matmul_at_into, matmul_bt_into, Tensor};

static NEXT_TAPE_ID: AtomicUsize = AtomicUsize::new(0);

/// Handle to a value recorded on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: usize,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Affine {
        x: Var,
        scale: f64,
    },
    Relu(Var),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    MeanAggregate {
        src: Var,
        adj: Arc<Adjacency>,
    },
    RelationalBasis {
        messages: Var,
        coeffs: Var,
        adj: Arc<RelationalAdjacency>,
        num_bases: usize,
        width: usize,
    },
    GatherRows {
        src: Var,
        rows: Arc<[usize]>,
    },
    RowSum(Var),
    Pick {
        src: Var,
        rows: Arc<[usize]>,
        cols: Arc<[usize]>,
    },
    LogClamped {
        x: Var,
        floor: f64,
    },
    Sum(Var),
    Mean(Var),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation for one forward pass.
#[derive(Debug)]
pub struct Tape {
    id: usize,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(TipError::shape(op, format!("expected a matrix, got {s:?}"))),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(TipError::Contract(
                "variable does not belong to this tape".into(),
            ));
        }
        Ok(())
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    pub fn value(&self, v: Var) -> &Tensor {
        assert_eq!(v.tape, self.id, "variable does not belong to this tape");
        &self.nodes[v.index].value
    }

    /// A non-trainable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Reads the current value of a parameter; gradients flow back into
    /// `store` on [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let value = store.get(id).value().clone();
        self.push(value, Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TipError::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let data = t.data().iter().map(|v| scale * v + shift).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Affine { x, scale }))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let data = t
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { 0.0 })
            .collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Relu(x)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let data = t.data().iter().map(|&v| sigmoid(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Sigmoid(x)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (m, p) = require_matrix("concat_cols", self.value(a))?;
        let (m2, q) = require_matrix("concat_cols", self.value(b))?;
        if m != m2 {
            return Err(TipError::shape(
                "concat_cols",
                format!("row counts differ: {m} vs {m2}"),
            ));
        }
        let (ta, tb) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            data.extend_from_slice(&ta[i * p..(i + 1) * p]);
            data.extend_from_slice(&tb[i * q..(i + 1) * q]);
        }
        let out = Tensor::new(vec![m, p + q], data)?;
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    /// Row `i` of the result is the mean of `src` rows over the neighbors of
    /// target `i`; targets without neighbors get a zero row.
    pub fn mean_aggregate(&mut self, src: Var, adj: Arc<Adjacency>) -> Result<Var> {
        self.check(src)?;
        let (n, d) = require_matrix("mean_aggregate", self.value(src))?;
        if n != adj.num_sources() {
            return Err(TipError::shape(
                "mean_aggregate",
                format!(
                    "source has {n} rows, adjacency expects {}",
                    adj.num_sources()
                ),
            ));
        }
        let data = adj.mean_forward(self.value(src).data(), d);
        let out = Tensor::new(vec![adj.num_targets(), d], data)?;
        Ok(self.push(out, Op::MeanAggregate { src, adj }))
    }

    /// Relational mean aggregation with basis-composed relation weights.
    ///
    /// `messages` is `n × (num_bases · width)`: block `b` of row `j` holds
    /// `h_j · V_b`. `coeffs` is `num_relations × num_bases`. Row `i` of the
    /// output is `Σ_r Σ_{j ∈ N_r(i)} (1/c_{i,r}) Σ_b coeffs[r,b] · messages[j, b]`.
    pub fn relational_basis_aggregate(
        &mut self,
        messages: Var,
        coeffs: Var,
        adj: Arc<RelationalAdjacency>,
        num_bases: usize,
    ) -> Result<Var> {
        self.check(messages)?;
        self.check(coeffs)?;
        let (n, wide) = require_matrix("relational_basis_aggregate", self.value(messages))?;
        let (nr, nb) = require_matrix("relational_basis_aggregate", self.value(coeffs))?;
        if num_bases == 0 || wide % num_bases != 0 || nb != num_bases {
            return Err(TipError::shape(
                "relational_basis_aggregate",
                format!("messages width {wide} and coefficients {nr}x{nb} disagree on {num_bases} bases"),
            ));
        }
        if n != adj.num_nodes() || nr != adj.num_relations() {
            return Err(TipError::shape(
                "relational_basis_aggregate",
                format!(
                    "got {n} nodes / {nr} relations, adjacency has {} / {}",
                    adj.num_nodes(),
                    adj.num_relations()
                ),
            ));
        }
        let width = wide / num_bases;
        let (u, a) = (self.value(messages).data(), self.value(coeffs).data());
        let mut out = vec![0.0; n * width];
        let mut combined = vec![0.0; width];
        for e in adj.entries() {
            combined.iter_mut().for_each(|c| *c = 0.0);
            let urow = &u[e.source * wide..(e.source + 1) * wide];
            for b in 0..num_bases {
                let coef = a[e.relation * num_bases + b];
                for (c, v) in combined.iter_mut().zip(&urow[b * width..(b + 1) * width]) {
                    *c += coef * v;
                }
            }
            for (o, c) in out[e.target * width..(e.target + 1) * width]
                .iter_mut()
                .zip(&combined)
            {
                *o += e.weight * c;
            }
        }
        let out = Tensor::new(vec![n, width], out)?;
        Ok(self.push(
            out,
            Op::RelationalBasis {
                messages,
                coeffs,
                adj,
                num_bases,
                width,
            },
        ))
    }

    pub fn gather_rows(&mut self, src: Var, rows: Arc<[usize]>) -> Result<Var> {
        self.check(src)?;
        let t = self.value(src);
        let n = t.rows();
        let c = t.cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows.iter() {
            if r >= n {
                return Err(TipError::Index {
                    what: "gather row",
                    index: r,
                    len: n,
                });
            }
            data.extend_from_slice(t.row(r));
        }
        let mut shape = t.shape().to_vec();
        if shape.is_empty() {
            return Err(TipError::shape(
                "gather_rows",
                "cannot gather from a scalar",
            ));
        }
        shape[0] = rows.len();
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::GatherRows { src, rows }))
    }

    /// Sums each row of a matrix into a vector of length `rows`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let (m, n) = require_matrix("row_sum", self.value(x))?;
        let t = self.value(x).data();
        let data = (0..m).map(|i| t[i * n..(i + 1) * n].iter().sum()).collect();
        Ok(self.push(Tensor::vector(data), Op::RowSum(x)))
    }

    /// Selects `src[rows[k], cols[k]]` for every `k` into a vector.
    pub fn pick(&mut self, src: Var, rows: Arc<[usize]>, cols: Arc<[usize]>) -> Result<Var> {
        self.check(src)?;
        let (m, n) = require_matrix("pick", self.value(src))?;
        if rows.len() != cols.len() {
            return Err(TipError::shape(
                "pick",
                format!("{} rows vs {} cols", rows.len(), cols.len()),
            ));
        }
        let t = self.value(src).data();
        let mut data = Vec::with_capacity(rows.len());
        for (&r, &c) in rows.iter().zip(cols.iter()) {
            if r >= m {
                return Err(TipError::Index {
                    what: "pick row",
                    index: r,
                    len: m,
                });
            }
            if c >= n {
                return Err(TipError::Index {
                    what: "pick column",
                    index: c,
                    len: n,
                });
            }
            data.push(t[r * n + c]);
        }
        Ok(self.push(Tensor::vector(data), Op::Pick { src, rows, cols }))
    }

    /// `ln(max(x, floor))` elementwise; the gradient is zero where clamped.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v.max(floor).ln()).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::LogClamped { x, floor }))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s = self.value(x).data().iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(x)))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        if t.is_empty() {
            return Err(TipError::Contract("mean of an empty tensor".into()));
        }
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        Ok(self.push(Tensor::scalar(s), Op::Mean(x)))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        self.check(x)?;
        let out = self.value(x).reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Back-propagates from a scalar `loss`, adding `∂loss/∂p` into the
    /// gradient slot of every parameter read on this tape.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        self.check(loss)?;
        if self.value(loss).len() != 1 {
            return Err(TipError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.index).map(|_| None).collect();
        grads[loss.index] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.index).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => store.accumulate_grad(*id, &g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k) = (ta.shape()[0], ta.shape()[1]);
                    let n = tb.shape()[1];
                    let ga = slot(&mut grads, *a, ta.shape());
                    matmul_bt_into(g.data(), tb.data(), ga.data_mut(), m, n, k);
                    let gb = slot(&mut grads, *b, tb.shape());
                    matmul_at_into(ta.data(), g.data(), gb.data_mut(), m, k, n);
                }
                Op::Add(a, b) => {
                    slot(&mut grads, *a, g.shape()).add_assign(&g);
                    slot(&mut grads, *b, g.shape()).add_assign(&g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = slot(&mut grads, *a, ta.shape());
                    for ((o, gv), bv) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                        *o += gv * bv;
                    }
                    let gb = slot(&mut grads, *b, tb.shape());
                    for ((o, gv), av) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                        *o += gv * av;
                    }
                }
                Op::Affine { x, scale } => {
                    let gx = slot(&mut grads, *x, g.shape());
                    for (o, gv) in gx.data_mut().iter_mut().zip(g.data()) {
                        *o += scale * gv;
                    }
                }
                Op::Relu(x) => {
                    let tx = self.value(*x);
                    let gx = slot(&mut grads, *x, tx.shape());
                    for ((o, gv), xv) in gx.data_mut().iter_mut().zip(g.data()).zip(tx.data()) {
                        if *xv > 0.0 {
                            *o += gv;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    let gx = slot(&mut grads, *x, y.shape());
                    for ((o, gv), yv) in gx.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv * yv * (1.0 - yv);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (m, p) = (self.value(*a).shape()[0], self.value(*a).shape()[1]);
                    let q = self.value(*b).shape()[1];
                    let ga = slot(&mut grads, *a, &[m, p]);
                    for i in 0..m {
                        for (o, gv) in ga.data_mut()[i * p..(i + 1) * p]
                            .iter_mut()
                            .zip(&g.data()[i * (p + q)..i * (p + q) + p])
                        {
                            *o += gv;
                        }
                    }
                    let gb = slot(&mut grads, *b, &[m, q]);
                    for i in 0..m {
                        for (o, gv) in gb.data_mut()[i * q..(i + 1) * q]
                            .iter_mut()
                            .zip(&g.data()[i * (p + q) + p..(i + 1) * (p + q)])
                        {
                            *o += gv;
                        }
                    }
                }
                Op::MeanAggregate { src, adj } => {
                    let ts = self.value(*src);
                    let d = ts.shape()[1];
                    let gs = slot(&mut grads, *src, ts.shape());
                    adj.mean_backward(g.data(), d, gs.data_mut());
                }
                Op::RelationalBasis {
                    messages,
                    coeffs,
                    adj,
                    num_bases,
                    width,
                } => {
                    let (nb, w) = (*num_bases, *width);
                    let wide = nb * w;
                    let (tu, ta) = (self.value(*messages), self.value(*coeffs));
                    let mut gu = Tensor::zeros(tu.shape());
                    let mut ga = Tensor::zeros(ta.shape());
                    {
                        let (u, a) = (tu.data(), ta.data());
                        let (gu, ga) = (gu.data_mut(), ga.data_mut());
                        for e in adj.entries() {
                            let go = &g.data()[e.target * w..(e.target + 1) * w];
                            for b in 0..nb {
                                let off = e.source * wide + b * w;
                                let coef = e.weight * a[e.relation * nb + b];
                                let mut dot = 0.0;
                                for k in 0..w {
                                    gu[off + k] += coef * go[k];
                                    dot += u[off + k] * go[k];
                                }
                                ga[e.relation * nb + b] += e.weight * dot;
                            }
                        }
                    }
                    slot(&mut grads, *messages, tu.shape()).add_assign(&gu);
                    slot(&mut grads, *coeffs, ta.shape()).add_assign(&ga);
                }
                Op::GatherRows { src, rows } => {
                    let ts = self.value(*src);
                    let c = ts.cols();
                    let gs = slot(&mut grads, *src, ts.shape());
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, gv) in gs.data_mut()[r * c..(r + 1) * c]
                            .iter_mut()
                            .zip(&g.data()[k * c..(k + 1) * c])
                        {
                            *o += gv;
                        }
                    }
                }
                Op::RowSum(x) => {
                    let tx = self.value(*x);
                    let n = tx.shape()[1];
                    let gx = slot(&mut grads, *x, tx.shape());
                    for (i, gv) in g.data().iter().enumerate() {
                        for o in &mut gx.data_mut()[i * n..(i + 1) * n] {
                            *o += gv;
                        }
                    }
                }
                Op::Pick { src, rows, cols } => {
                    let ts = self.value(*src);
                    let n = ts.shape()[1];
                    let gs = slot(&mut grads, *src, ts.shape());
                    for ((&r, &c), gv) in rows.iter().zip(cols.iter()).zip(g.data()) {
                        gs.data_mut()[r * n + c] += gv;
                    }
                }
                Op::LogClamped { x, floor } => {
                    let tx = self.value(*x);
                    let gx = slot(&mut grads, *x, tx.shape());
                    for ((o, gv), xv) in gx.data_mut().iter_mut().zip(g.data()).zip(tx.data()) {
                        if *xv > *floor {
                            *o += gv / xv;
                        }
                    }
                }
                Op::Sum(x) => {
                    let gv = g.data()[0];
                    let shape = self.value(*x).shape().to_vec();
                    for o in slot(&mut grads, *x, &shape).data_mut() {
                        *o += gv;
                    }
                }
                Op::Mean(x) => {
                    let tx = self.value(*x);
                    let gv = g.data()[0] / tx.len() as f64;
                    let shape = tx.shape().to_vec();
                    for o in slot(&mut grads, *x, &shape).data_mut() {
                        *o += gv;
                    }
                }
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    let gx = slot(&mut grads, *x, &shape);
                    for (o, gv) in gx.data_mut().iter_mut().zip(g.data()) {
                        *o += gv;
                    }
                }
            }
        }
        Ok(())
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'a mut Tensor {
    grads[v.index].get_or_insert_with(|| Tensor::zeros(shape))
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
