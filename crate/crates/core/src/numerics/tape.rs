//! Reverse-mode gradient tape over dense matrices.
//!
//! Nodes are appended in evaluation order, so a reverse sweep over the node
//! list is a valid topological order for backpropagation. Vectors are stored
//! as `n x 1` columns. Gradients only flow into nodes whose `requires_grad`
//! flag is set, which is inherited from inputs.

use std::rc::Rc;

use super::kernels::{log_sum_exp, sigmoid, spmm_unchecked, validate_ce, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Spmm {
        edges: Rc<Vec<(usize, usize)>>,
        weights: Var,
        x: Var,
    },
    Gather {
        src: Var,
        index: Rc<Vec<Option<usize>>>,
    },
    RowDiv {
        a: Var,
        d: Var,
    },
    EdgeSoftmax {
        logits: Var,
        mask: Var,
        segments: Rc<Vec<usize>>,
        num_segments: usize,
        q: Vec<f64>,
    },
    ScaleByEntry {
        a: Var,
        s: Var,
        idx: usize,
    },
    SoftmaxRow(Var),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Rc<Vec<usize>>,
        nodes: Rc<Vec<usize>>,
        weights: Rc<Vec<f64>>,
    },
    BinaryEntropyMean(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    grads: Vec<Option<Matrix>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
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

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable input.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input; no gradient is accumulated for it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    /// `a + row`, broadcasting a `1 x cols` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a single row");
        let value = self.value(a) + self.value(row);
        let rg = self.rg(a) || self.rg(row);
        self.push(value, Op::AddRow(a, row), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    /// Weighted message passing: `out[dst] += w[e] * x[src]`, with `weights`
    /// an `|edges| x 1` column.
    pub fn spmm(&mut self, edges: Rc<Vec<(usize, usize)>>, weights: Var, x: Var) -> Var {
        let w = self.value(weights);
        assert_eq!(w.nrows(), edges.len(), "one weight per edge");
        let value = spmm_unchecked(&edges, w.as_slice_memory_order().unwrap(), self.value(x));
        let rg = self.rg(weights) || self.rg(x);
        self.push(value, Op::Spmm { edges, weights, x }, rg)
    }

    /// Column gather: `out[k] = src[index[k]]`, or `fill` where the index is `None`.
    pub fn gather(&mut self, src: Var, index: Rc<Vec<Option<usize>>>, fill: f64) -> Var {
        let s = self.value(src);
        let value = Matrix::from_shape_fn((index.len(), 1), |(k, _)| match index[k] {
            Some(i) => s[[i, 0]],
            None => fill,
        });
        let rg = self.rg(src);
        self.push(value, Op::Gather { src, index }, rg)
    }

    /// Row-wise division `a[i,:] / d[i]`; rows with `d[i] == 0` become zero.
    pub fn row_div(&mut self, a: Var, d: Var) -> Var {
        let av = self.value(a);
        let dv = self.value(d);
        let mut value = av.clone();
        for (mut row, &den) in value.rows_mut().into_iter().zip(dv.column(0)) {
            if den == 0.0 {
                row.fill(0.0);
            } else {
                row /= den;
            }
        }
        let rg = self.rg(a) || self.rg(d);
        self.push(value, Op::RowDiv { a, d }, rg)
    }

    /// Mask-weighted softmax within segments:
    /// `alpha[k] = m[k] exp(e[k]) / sum_{l in seg(k)} m[l] exp(e[l])`.
    /// Entries with zero mask contribute nothing, including to the
    /// stabilising maximum.
    pub fn edge_softmax(
        &mut self,
        logits: Var,
        mask: Var,
        segments: Rc<Vec<usize>>,
        num_segments: usize,
    ) -> Var {
        let e = self.value(logits).column(0).to_vec();
        let m = self.value(mask).column(0).to_vec();
        assert_eq!(e.len(), segments.len());
        assert_eq!(m.len(), segments.len());
        let mut max = vec![f64::NEG_INFINITY; num_segments];
        for ((&s, &ek), &mk) in segments.iter().zip(&e).zip(&m) {
            if mk != 0.0 && ek > max[s] {
                max[s] = ek;
            }
        }
        let u: Vec<f64> = segments
            .iter()
            .zip(&e)
            .map(|(&s, &ek)| if max[s].is_finite() { (ek - max[s]).exp() } else { 0.0 })
            .collect();
        let mut z = vec![0.0; num_segments];
        for ((&s, &uk), &mk) in segments.iter().zip(&u).zip(&m) {
            z[s] += mk * uk;
        }
        let q: Vec<f64> = segments
            .iter()
            .zip(&u)
            .map(|(&s, &uk)| if z[s] > 0.0 { uk / z[s] } else { 0.0 })
            .collect();
        let value = Matrix::from_shape_fn((e.len(), 1), |(k, _)| m[k] * q[k]);
        let rg = self.rg(logits) || self.rg(mask);
        self.push(
            value,
            Op::EdgeSoftmax {
                logits,
                mask,
                segments,
                num_segments,
                q,
            },
            rg,
        )
    }

    /// `a * s[idx]` where `s` is a row or column holding scalars.
    pub fn scale_by_entry(&mut self, a: Var, s: Var, idx: usize) -> Var {
        let c = self.value(s).iter().nth(idx).copied().expect("entry index");
        let value = self.value(a) * c;
        let rg = self.rg(a) || self.rg(s);
        self.push(value, Op::ScaleByEntry { a, s, idx }, rg)
    }

    /// Softmax over the entries of a `1 x n` row.
    pub fn softmax_row(&mut self, a: Var) -> Var {
        let v = self.value(a);
        assert_eq!(v.nrows(), 1);
        let p = super::kernels::softmax_vec(&v.row(0).to_vec());
        let value = Matrix::from_shape_vec((1, p.len()), p).unwrap();
        let rg = self.rg(a);
        self.push(value, Op::SoftmaxRow(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    /// Weighted cross-entropy; `weights` is aligned with `nodes`.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: Rc<Vec<usize>>,
        nodes: Rc<Vec<usize>>,
        weights: Rc<Vec<f64>>,
    ) -> Result<Var> {
        let value = {
            let l = self.value(logits);
            validate_ce(l, &targets, &nodes, &weights)?;
            let total: f64 = nodes
                .iter()
                .zip(weights.iter())
                .map(|(&i, &w)| {
                    let row = l.row(i);
                    w * (log_sum_exp(row.iter().copied()) - row[targets[i]])
                })
                .sum();
            Matrix::from_elem((1, 1), total)
        };
        let rg = self.rg(logits);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets,
                nodes,
                weights,
            },
            rg,
        ))
    }

    /// Mean binary entropy `-(m ln m + (1-m) ln(1-m))` over all entries.
    pub fn binary_entropy_mean(&mut self, m: Var) -> Var {
        let v = self.value(m);
        let n = v.len().max(1) as f64;
        let total: f64 = v.iter().map(|&p| binary_entropy(p)).sum();
        let rg = self.rg(m);
        self.push(Matrix::from_elem((1, 1), total / n), Op::BinaryEntropyMean(m), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let shape = self.value(loss).dim();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape.0, shape.1));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Grads { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, delta: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g.dot(&self.value(*b).t()));
                }
                if self.rg(*b) {
                    acc(*b, self.value(*a).t().dot(g));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                if self.rg(*row) {
                    acc(*row, g.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0)));
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g * self.value(*b));
                }
                if self.rg(*b) {
                    acc(*b, g * self.value(*a));
                }
            }
            Op::Scale(a, c) => acc(*a, g * *c),
            Op::Sigmoid(a) => {
                let d = node.value.mapv(|s| s * (1.0 - s));
                acc(*a, g * &d);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut d = g.clone();
                d.zip_mut_with(x, |gi, &xi| {
                    if xi <= 0.0 {
                        *gi = 0.0
                    }
                });
                acc(*a, d);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let mut d = g.clone();
                d.zip_mut_with(x, |gi, &xi| {
                    if xi <= 0.0 {
                        *gi *= slope
                    }
                });
                acc(*a, d);
            }
            Op::Spmm { edges, weights, x } => {
                let xv = self.value(*x);
                let wv = self.value(*weights);
                if self.rg(*x) {
                    let mut dx = Matrix::zeros(xv.raw_dim());
                    for (k, &(src, dst)) in edges.iter().enumerate() {
                        dx.row_mut(src).scaled_add(wv[[k, 0]], &g.row(dst));
                    }
                    acc(*x, dx);
                }
                if self.rg(*weights) {
                    let dw = Matrix::from_shape_fn((edges.len(), 1), |(k, _)| {
                        let (src, dst) = edges[k];
                        g.row(dst).dot(&xv.row(src))
                    });
                    acc(*weights, dw);
                }
            }
            Op::Gather { src, index } => {
                let mut d = Matrix::zeros(self.value(*src).raw_dim());
                for (k, i) in index.iter().enumerate() {
                    if let Some(i) = i {
                        d[[*i, 0]] += g[[k, 0]];
                    }
                }
                acc(*src, d);
            }
            Op::RowDiv { a, d } => {
                let av = self.value(*a);
                let dv = self.value(*d);
                if self.rg(*a) {
                    let mut da = g.clone();
                    for (mut row, &den) in da.rows_mut().into_iter().zip(dv.column(0)) {
                        if den == 0.0 {
                            row.fill(0.0);
                        } else {
                            row /= den;
                        }
                    }
                    acc(*a, da);
                }
                if self.rg(*d) {
                    let dd = Matrix::from_shape_fn(dv.raw_dim(), |(i, _)| {
                        let den = dv[[i, 0]];
                        if den == 0.0 {
                            0.0
                        } else {
                            -g.row(i).dot(&av.row(i)) / (den * den)
                        }
                    });
                    acc(*d, dd);
                }
            }
            Op::EdgeSoftmax {
                logits,
                mask,
                segments,
                num_segments,
                q,
            } => {
                let alpha = &node.value;
                let mut seg_dot = vec![0.0; *num_segments];
                for (k, &s) in segments.iter().enumerate() {
                    seg_dot[s] += alpha[[k, 0]] * g[[k, 0]];
                }
                if self.rg(*logits) {
                    let de = Matrix::from_shape_fn(alpha.raw_dim(), |(k, _)| {
                        alpha[[k, 0]] * (g[[k, 0]] - seg_dot[segments[k]])
                    });
                    acc(*logits, de);
                }
                if self.rg(*mask) {
                    let dm = Matrix::from_shape_fn(alpha.raw_dim(), |(k, _)| {
                        q[k] * (g[[k, 0]] - seg_dot[segments[k]])
                    });
                    acc(*mask, dm);
                }
            }
            Op::ScaleByEntry { a, s, idx } => {
                let sv = self.value(*s);
                let c = sv.iter().nth(*idx).copied().unwrap();
                if self.rg(*a) {
                    acc(*a, g * c);
                }
                if self.rg(*s) {
                    let mut ds = Matrix::zeros(sv.raw_dim());
                    let total = (g * self.value(*a)).sum();
                    *ds.iter_mut().nth(*idx).unwrap() = total;
                    acc(*s, ds);
                }
            }
            Op::SoftmaxRow(a) => {
                let p = &node.value;
                let dot = (p * g).sum();
                acc(*a, p * &g.mapv(|gi| gi - dot));
            }
            Op::Sum(a) => {
                let shape = self.value(*a).raw_dim();
                acc(*a, Matrix::from_elem(shape, g[[0, 0]]));
            }
            Op::CrossEntropy {
                logits,
                targets,
                nodes,
                weights,
            } => {
                let l = self.value(*logits);
                let scale = g[[0, 0]];
                let mut d = Matrix::zeros(l.raw_dim());
                for (&i, &w) in nodes.iter().zip(weights.iter()) {
                    let row = l.row(i);
                    let lse = log_sum_exp(row.iter().copied());
                    let mut drow = d.row_mut(i);
                    for (c, dv) in drow.iter_mut().enumerate() {
                        *dv += scale * w * (row[c] - lse).exp();
                    }
                    drow[targets[i]] -= scale * w;
                }
                acc(*logits, d);
            }
            Op::BinaryEntropyMean(m) => {
                let v = self.value(*m);
                let n = v.len().max(1) as f64;
                let scale = g[[0, 0]] / n;
                // saturated entries get zero slope, the limit through a sigmoid
                acc(*m, v.mapv(|p| if p > 0.0 && p < 1.0 { scale * ((1.0 - p) / p).ln() } else { 0.0 }));
            }
        }
    }
}

pub fn binary_entropy(p: f64) -> f64 {
    let a = if p > 0.0 { p * p.ln() } else { 0.0 };
    let b = if p < 1.0 { (1.0 - p) * (1.0 - p).ln() } else { 0.0 };
    -(a + b)
}
