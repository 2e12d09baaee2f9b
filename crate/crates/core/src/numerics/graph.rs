//! Taped reverse-mode differentiation.
//!
//! A [`Graph`] borrows a [`ParamStore`] and records every primitive applied
//! to its variables. Values are computed eagerly when a node is created;
//! [`Graph::backward`] walks the tape in reverse and returns one gradient per
//! store entry. Parameter nodes read their values from the store directly, so
//! building a graph never copies parameter tensors.

use super::params::{ParamId, ParamStore};
use super::tensor::{softmax, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Embed { table: ParamId, ids: Vec<usize> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    MatVec(Var, Var),
    Dot(Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    StackRows(Vec<Var>),
    Row(Var, usize),
    Softmax(Var),
    WeightedRows(Var, Var),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    Sum(Var),
    /// Scalar whose local gradient w.r.t. each input was computed alongside the value.
    Fused(Vec<(Var, Tensor)>),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.store.value(id),
            _ => node.value.as_ref().expect("non-param node carries a value"),
        }
    }

    /// Row indices chosen by every `max_rows` node so far, in tape order.
    /// Two evaluations with equal choices lie in the same smooth region.
    pub fn branch_choices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for n in &self.nodes {
            if let Op::MaxRows(_, arg) = &n.op {
                out.extend_from_slice(arg);
            }
        }
        out
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        let t = self.value(v);
        if t.len() != 1 {
            return Err(Error::shape("scalar", format!("{:?}", t.shape())));
        }
        Ok(t.item())
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad: self.store.is_trainable(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// Gathers rows of an embedding table parameter: `ids.len() × d`.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Result<Var> {
        let t = self.store.value(table);
        if t.rank() != 2 {
            return Err(Error::shape("embed", format!("table {:?}", t.shape())));
        }
        let (rows, d) = (t.rows(), t.cols());
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= rows {
                return Err(Error::OutOfRange {
                    what: "embedding lookup",
                    index: id,
                    size: rows,
                });
            }
            data.extend_from_slice(t.row(id));
        }
        let value = Tensor::matrix(ids.len(), d, data)?;
        let rg = self.store.is_trainable(table);
        Ok(self.push(
            value,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.zip(a, b, |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.zip(a, b, |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.zip(a, b, |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| c * x);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, c), rg)
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 - x);
        let rg = self.rg(a);
        self.push(v, Op::OneMinus(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        let rg = self.rg(a);
        self.push(v, Op::Tanh(a), rg)
    }

    /// `W x` for `W: m × n`, `x: n`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (tw, tx) = (self.value(w), self.value(x));
        if tw.rank() != 2 || tx.rank() != 1 || tw.cols() != tx.len() {
            return Err(Error::shape(
                "matvec",
                format!("{:?} x {:?}", tw.shape(), tx.shape()),
            ));
        }
        let (m, n) = (tw.rows(), tw.cols());
        let xs = tx.data();
        let ws = tw.data();
        let out = (0..m)
            .map(|i| {
                ws[i * n..(i + 1) * n]
                    .iter()
                    .zip(xs)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let rg = self.rg(w) || self.rg(x);
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x), rg))
    }

    /// `W x + b`
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.len() != tb.len() || ta.rank() > 1 || tb.rank() > 1 {
            return Err(Error::shape(
                "dot",
                format!("{:?} . {:?}", ta.shape(), tb.shape()),
            ));
        }
        let s = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), rg))
    }

    /// Concatenates scalars and vectors into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() > 1 {
                return Err(Error::shape("concat", format!("part {:?}", t.shape())));
            }
            data.extend_from_slice(t.data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec()), rg))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 1 || start + len > t.len() {
            return Err(Error::shape(
                "slice",
                format!("{}..{} of {:?}", start, start + len, t.shape()),
            ));
        }
        let v = Tensor::vector(t.data()[start..start + len].to_vec());
        let rg = self.rg(a);
        Ok(self.push(v, Op::Slice(a, start), rg))
    }

    /// Stacks `n ≥ 1` equal-length vectors into an `n × k` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::shape("stack_rows", "no rows"))?;
        let k = self.value(*first).len();
        let mut data = Vec::with_capacity(rows.len() * k);
        for &r in rows {
            let t = self.value(r);
            if t.rank() != 1 || t.len() != k {
                return Err(Error::shape(
                    "stack_rows",
                    format!("row {:?}, expected [{}]", t.shape(), k),
                ));
            }
            data.extend_from_slice(t.data());
        }
        let v = Tensor::matrix(rows.len(), k, data)?;
        let rg = rows.iter().any(|&r| self.rg(r));
        Ok(self.push(v, Op::StackRows(rows.to_vec()), rg))
    }

    pub fn row(&mut self, m: Var, i: usize) -> Result<Var> {
        let t = self.value(m);
        if t.rank() != 2 || i >= t.rows() {
            return Err(Error::shape("row", format!("row {} of {:?}", i, t.shape())));
        }
        let v = Tensor::vector(t.row(i).to_vec());
        let rg = self.rg(m);
        Ok(self.push(v, Op::Row(m, i), rg))
    }

    /// All rows of a matrix as separate vector nodes.
    pub fn rows(&mut self, m: Var) -> Result<Vec<Var>> {
        let n = self.value(m).rows();
        (0..n).map(|i| self.row(m, i)).collect()
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 1 || t.is_empty() {
            return Err(Error::shape("softmax", format!("{:?}", t.shape())));
        }
        let v = Tensor::vector(softmax(t.data()));
        let rg = self.rg(a);
        Ok(self.push(v, Op::Softmax(a), rg))
    }

    /// `Σ_i w_i · M[i]` for `M: n × k`, `w: n`.
    pub fn weighted_rows(&mut self, m: Var, w: Var) -> Result<Var> {
        let (tm, tw) = (self.value(m), self.value(w));
        if tm.rank() != 2 || tw.rank() != 1 || tm.rows() != tw.len() {
            return Err(Error::shape(
                "weighted_rows",
                format!("{:?} weighted by {:?}", tm.shape(), tw.shape()),
            ));
        }
        let k = tm.cols();
        let mut out = vec![0.0; k];
        for (i, &wi) in tw.data().iter().enumerate() {
            for (o, x) in out.iter_mut().zip(tm.row(i)) {
                *o += wi * x;
            }
        }
        let rg = self.rg(m) || self.rg(w);
        Ok(self.push(Tensor::vector(out), Op::WeightedRows(m, w), rg))
    }

    pub fn mean_rows(&mut self, m: Var) -> Result<Var> {
        let t = self.value(m);
        if t.rank() != 2 || t.rows() == 0 {
            return Err(Error::shape("mean_rows", format!("{:?}", t.shape())));
        }
        let (n, k) = (t.rows(), t.cols());
        let mut out = vec![0.0; k];
        for i in 0..n {
            for (o, x) in out.iter_mut().zip(t.row(i)) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        let rg = self.rg(m);
        Ok(self.push(Tensor::vector(out), Op::MeanRows(m), rg))
    }

    /// Column-wise maximum; the first maximal row wins ties.
    pub fn max_rows(&mut self, m: Var) -> Result<Var> {
        let t = self.value(m);
        if t.rank() != 2 || t.rows() == 0 {
            return Err(Error::shape("max_rows", format!("{:?}", t.shape())));
        }
        let k = t.cols();
        let mut arg = vec![0usize; k];
        let mut out = t.row(0).to_vec();
        for i in 1..t.rows() {
            for (j, &x) in t.row(i).iter().enumerate() {
                if x > out[j] {
                    out[j] = x;
                    arg[j] = i;
                }
            }
        }
        let rg = self.rg(m);
        Ok(self.push(Tensor::vector(out), Op::MaxRows(m, arg), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Records a scalar computed outside the tape together with its gradient
    /// with respect to each input.
    pub fn fused_scalar(&mut self, value: f64, local_grads: Vec<(Var, Tensor)>) -> Result<Var> {
        for (v, g) in &local_grads {
            if self.shape(*v) != g.shape() {
                return Err(Error::shape(
                    "fused_scalar",
                    format!("grad {:?} for input {:?}", g.shape(), self.shape(*v)),
                ));
            }
        }
        let rg = local_grads.iter().any(|(v, _)| self.rg(*v));
        Ok(self.push(Tensor::scalar(value), Op::Fused(local_grads), rg))
    }

    /// `-log softmax(logits)[class]`
    pub fn softmax_cross_entropy(&mut self, logits: Var, class: usize) -> Result<Var> {
        let t = self.value(logits);
        if t.rank() != 1 || class >= t.len() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("class {} for logits {:?}", class, t.shape()),
            ));
        }
        let mut p = softmax(t.data());
        let loss = -(p[class].max(f64::MIN_POSITIVE)).ln();
        p[class] -= 1.0;
        self.fused_scalar(loss, vec![(logits, Tensor::vector(p))])
    }

    /// Reverse pass from scalar `out`; returns one gradient slot per store entry.
    /// Frozen parameters and parameters not reached by `out` get `None`.
    pub fn backward(&self, out: Var) -> Result<Vec<Option<Tensor>>> {
        if self.value(out).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(out).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=out.0).map(|_| None).collect();
        let mut param_grads: Vec<Option<Tensor>> = vec![None; self.store.len()];
        grads[out.0] = Some(Tensor::full(self.value(out).shape(), 1.0));

        for idx in (0..=out.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => accumulate(&mut param_grads[id.0], g),
                Op::Embed { table, ids } => {
                    let shape = self.store.value(*table).shape().to_vec();
                    let slot = param_grads[table.0].get_or_insert_with(|| Tensor::zeros(&shape));
                    let d = shape[1];
                    let dst = slot.data_mut();
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            dst[id * d + j] += g.data()[r * d + j];
                        }
                    }
                }
                Op::Add(a, b) => {
                    self.send(&mut grads, *a, || g.clone());
                    self.send(&mut grads, *b, || g.clone());
                }
                Op::Sub(a, b) => {
                    self.send(&mut grads, *a, || g.clone());
                    self.send(&mut grads, *b, || g.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    self.send(&mut grads, *a, || hadamard(&g, vb));
                    self.send(&mut grads, *b, || hadamard(&g, va));
                }
                Op::Scale(a, c) => self.send(&mut grads, *a, || g.map(|x| c * x)),
                Op::OneMinus(a) => self.send(&mut grads, *a, || g.map(|x| -x)),
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    self.send(&mut grads, *a, || {
                        zip_with(&g, y, |gi, yi| gi * yi * (1.0 - yi))
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap();
                    self.send(&mut grads, *a, || zip_with(&g, y, |gi, yi| gi * (1.0 - yi * yi)));
                }
                Op::MatVec(w, x) => {
                    let (tw, tx) = (self.value(*w), self.value(*x));
                    let (m, n) = (tw.rows(), tw.cols());
                    self.send(&mut grads, *w, || {
                        let mut d = vec![0.0; m * n];
                        for i in 0..m {
                            let gi = g.data()[i];
                            if gi != 0.0 {
                                for (dst, xj) in d[i * n..(i + 1) * n].iter_mut().zip(tx.data()) {
                                    *dst = gi * xj;
                                }
                            }
                        }
                        Tensor::matrix(m, n, d).unwrap()
                    });
                    self.send(&mut grads, *x, || {
                        let mut d = vec![0.0; n];
                        for i in 0..m {
                            let gi = g.data()[i];
                            for (dst, wij) in d.iter_mut().zip(tw.row(i)) {
                                *dst += gi * wij;
                            }
                        }
                        Tensor::vector(d)
                    });
                }
                Op::Dot(a, b) => {
                    let s = g.item();
                    let (va, vb) = (self.value(*a), self.value(*b));
                    self.send(&mut grads, *a, || vb.map(|x| s * x));
                    self.send(&mut grads, *b, || va.map(|x| s * x));
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let t = self.value(p);
                        let len = t.len();
                        let shape = t.shape().to_vec();
                        self.send(&mut grads, p, || {
                            Tensor::new(shape, g.data()[off..off + len].to_vec()).unwrap()
                        });
                        off += len;
                    }
                }
                Op::Slice(a, start) => {
                    let len = g.len();
                    let full = self.value(*a).len();
                    self.send(&mut grads, *a, || {
                        let mut d = vec![0.0; full];
                        d[*start..start + len].copy_from_slice(g.data());
                        Tensor::vector(d)
                    });
                }
                Op::StackRows(rows) => {
                    for (i, &r) in rows.iter().enumerate() {
                        self.send(&mut grads, r, || Tensor::vector(g.row(i).to_vec()));
                    }
                }
                Op::Row(m, i) => {
                    let shape = self.value(*m).shape().to_vec();
                    self.send(&mut grads, *m, || {
                        let mut t = Tensor::zeros(&shape);
                        let k = shape[1];
                        t.data_mut()[i * k..(i + 1) * k].copy_from_slice(g.data());
                        t
                    });
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().unwrap();
                    let gy: f64 = g.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
                    self.send(&mut grads, *a, || zip_with(&g, y, |gi, yi| yi * (gi - gy)));
                }
                Op::WeightedRows(m, w) => {
                    let (tm, tw) = (self.value(*m), self.value(*w));
                    self.send(&mut grads, *m, || {
                        let (n, k) = (tm.rows(), tm.cols());
                        let mut d = Vec::with_capacity(n * k);
                        for &wi in tw.data() {
                            d.extend(g.data().iter().map(|gj| wi * gj));
                        }
                        Tensor::matrix(n, k, d).unwrap()
                    });
                    self.send(&mut grads, *w, || {
                        Tensor::vector(
                            (0..tm.rows())
                                .map(|i| tm.row(i).iter().zip(g.data()).map(|(a, b)| a * b).sum())
                                .collect(),
                        )
                    });
                }
                Op::MeanRows(m) => {
                    let tm = self.value(*m);
                    let (n, k) = (tm.rows(), tm.cols());
                    self.send(&mut grads, *m, || {
                        let mut d = Vec::with_capacity(n * k);
                        for _ in 0..n {
                            d.extend(g.data().iter().map(|x| x / n as f64));
                        }
                        Tensor::matrix(n, k, d).unwrap()
                    });
                }
                Op::MaxRows(m, arg) => {
                    let shape = self.value(*m).shape().to_vec();
                    self.send(&mut grads, *m, || {
                        let mut t = Tensor::zeros(&shape);
                        let k = shape[1];
                        for (j, &i) in arg.iter().enumerate() {
                            t.data_mut()[i * k + j] += g.data()[j];
                        }
                        t
                    });
                }
                Op::Sum(a) => {
                    let s = g.item();
                    let shape = self.value(*a).shape().to_vec();
                    self.send(&mut grads, *a, || Tensor::full(&shape, s));
                }
                Op::Fused(locals) => {
                    let s = g.item();
                    for (v, local) in locals {
                        self.send(&mut grads, *v, || local.map(|x| s * x));
                    }
                }
            }
        }
        Ok(param_grads)
    }

    fn send(&self, grads: &mut [Option<Tensor>], to: Var, g: impl FnOnce() -> Tensor) {
        if self.rg(to) {
            accumulate(&mut grads[to.0], g());
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).unwrap()
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip_with(a, b, |x, y| x * y)
}

/// Builds the loss with `f`, back-propagates, and writes gradients into `store`.
/// Every entry not reached by the loss ends up with a zero gradient.
pub fn forward_backward<F>(store: &mut ParamStore, f: F) -> Result<f64>
where
    F: FnOnce(&mut Graph<'_>) -> Result<Var>,
{
    let (loss, grads) = {
        let mut g = Graph::new(store);
        let out = f(&mut g)?;
        let loss = g.scalar(out)?;
        (loss, g.backward(out)?)
    };
    store.set_gradients(grads);
    Ok(loss)
}

/// Evaluates the loss without touching gradients.
pub fn forward_only<F>(store: &ParamStore, f: F) -> Result<f64>
where
    F: FnOnce(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let out = f(&mut g)?;
    g.scalar(out)
}

/// Like [`forward_only`], also returning [`Graph::branch_choices`].
pub fn forward_with_branches<F>(store: &ParamStore, f: F) -> Result<(f64, Vec<usize>)>
where
    F: FnOnce(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let out = f(&mut g)?;
    Ok((g.scalar(out)?, g.branch_choices()))
}
