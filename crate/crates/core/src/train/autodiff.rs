//! Reverse-mode differentiation over small dense vectors and matrices.

use thiserror::Error;

use crate::nets::{sigmoid, softmax, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("loss must be a scalar, got a {rows}x{cols} value")]
    NonScalar { rows: usize, cols: usize },
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(usize),
    Col { w: Var, j: usize },
    MatVec { w: Var, x: Var },
    Gate { w: Var, j: usize, u: Var, h: Var, b: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Var, Var),
    Dot(Var, Var),
    Stack(Vec<Var>),
    Softmax(Var),
    WeightedSum { weights: Var, rows: Vec<Var> },
    SoftmaxCe { logits: Var, target: usize },
    Sum(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    /// Softmax probabilities kept for the cross-entropy backward pass.
    aux: Vec<f64>,
    op: Op,
}

/// Records a computation so that gradients can be pulled back through it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            aux: Vec::new(),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn vec_len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(n, 1, value, Op::Const)
    }

    /// A trainable tensor; `id` indexes the gradient buffer of [`Tape::backward`].
    pub fn param(&mut self, id: usize, t: &Tensor) -> Var {
        self.push(t.rows, t.cols, t.data.clone(), Op::Param(id))
    }

    /// `W e_j`, the product of a matrix with a one-hot vector.
    pub fn col(&mut self, w: Var, j: usize) -> Var {
        let n = &self.nodes[w.0];
        let value = (0..n.rows).map(|r| n.value[r * n.cols + j]).collect();
        let rows = n.rows;
        self.push(rows, 1, value, Op::Col { w, j })
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (wn, xn) = (&self.nodes[w.0], &self.nodes[x.0]);
        assert_eq!(wn.cols, xn.value.len(), "matvec shape");
        let value = (0..wn.rows)
            .map(|r| {
                wn.value[r * wn.cols..(r + 1) * wn.cols]
                    .iter()
                    .zip(&xn.value)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let rows = wn.rows;
        self.push(rows, 1, value, Op::MatVec { w, x })
    }

    /// `W e_j + U h + b`, the pre-activation of a recurrent gate.
    pub fn gate(&mut self, w: Var, j: usize, u: Var, h: Var, b: Var) -> Var {
        let (wn, un, hn, bn) = (&self.nodes[w.0], &self.nodes[u.0], &self.nodes[h.0], &self.nodes[b.0]);
        assert_eq!(un.cols, hn.value.len(), "gate recurrent shape");
        let value = (0..wn.rows)
            .map(|r| {
                let rec: f64 = un.value[r * un.cols..(r + 1) * un.cols]
                    .iter()
                    .zip(&hn.value)
                    .map(|(a, b)| a * b)
                    .sum();
                wn.value[r * wn.cols + j] + rec + bn.value[r]
            })
            .collect();
        let rows = wn.rows;
        self.push(rows, 1, value, Op::Gate { w, j, u, h, b })
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (an, bn) = (&self.nodes[a.0], &self.nodes[b.0]);
        assert_eq!(an.value.len(), bn.value.len(), "elementwise shape");
        let value = an.value.iter().zip(&bn.value).map(|(x, y)| f(*x, *y)).collect();
        let (rows, cols) = (an.rows, an.cols);
        self.push(rows, cols, value, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let an = &self.nodes[a.0];
        let value = an.value.iter().map(|x| f(*x)).collect();
        let (rows, cols) = (an.rows, an.cols);
        self.push(rows, cols, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.nodes[a.0].value.clone();
        value.extend_from_slice(&self.nodes[b.0].value);
        let n = value.len();
        self.push(n, 1, value, Op::Concat(a, b))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let v = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .sum();
        self.push(1, 1, vec![v], Op::Dot(a, b))
    }

    /// Collects scalars into a column vector.
    pub fn stack(&mut self, items: Vec<Var>) -> Var {
        let value: Vec<f64> = items.iter().map(|v| self.nodes[v.0].value[0]).collect();
        let n = value.len();
        self.push(n, 1, value, Op::Stack(items))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax(&self.nodes[a.0].value);
        let n = value.len();
        self.push(n, 1, value, Op::Softmax(a))
    }

    /// `Σ_i weights[i] · rows[i]`.
    pub fn weighted_sum(&mut self, weights: Var, rows: Vec<Var>) -> Var {
        let w = &self.nodes[weights.0].value;
        assert_eq!(w.len(), rows.len(), "one weight per row");
        let dim = self.vec_len(rows[0]);
        let mut value = vec![0.0; dim];
        for (wi, r) in w.iter().zip(&rows) {
            for (acc, x) in value.iter_mut().zip(&self.nodes[r.0].value) {
                *acc += wi * x;
            }
        }
        self.push(dim, 1, value, Op::WeightedSum { weights, rows })
    }

    /// `-log softmax(logits)[target]`.
    pub fn softmax_ce(&mut self, logits: Var, target: usize) -> Var {
        let z = &self.nodes[logits.0].value;
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        let probs = softmax(z);
        let v = self.push(1, 1, vec![loss], Op::SoftmaxCe { logits, target });
        self.nodes[v.0].aux = probs;
        v
    }

    /// Sum of same-shaped values.
    pub fn sum(&mut self, items: Vec<Var>) -> Var {
        let first = &self.nodes[items[0].0];
        let (rows, cols) = (first.rows, first.cols);
        let mut value = vec![0.0; first.value.len()];
        for v in &items {
            for (acc, x) in value.iter_mut().zip(&self.nodes[v.0].value) {
                *acc += x;
            }
        }
        self.push(rows, cols, value, Op::Sum(items))
    }

    /// Accumulates `d loss / d param` into `grads[id]` for every parameter
    /// recorded on the tape.
    pub fn backward(&self, loss: Var, grads: &mut [Tensor]) -> Result<(), GradError> {
        let ln = &self.nodes[loss.0];
        if ln.value.len() != 1 {
            return Err(GradError::NonScalar {
                rows: ln.rows,
                cols: ln.cols,
            });
        }
        let mut adj: Vec<Vec<f64>> = Vec::with_capacity(loss.0 + 1);
        for n in &self.nodes[..=loss.0] {
            adj.push(vec![0.0; n.value.len()]);
        }
        adj[loss.0][0] = 1.0;
        for i in (0..=loss.0).rev() {
            if adj[i].iter().all(|g| *g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut adj[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => {
                    for (acc, x) in grads[*id].data.iter_mut().zip(&g) {
                        *acc += x;
                    }
                }
                Op::Col { w, j } => {
                    let cols = self.nodes[w.0].cols;
                    for (r, gr) in g.iter().enumerate() {
                        adj[w.0][r * cols + j] += gr;
                    }
                }
                Op::MatVec { w, x } => {
                    let cols = self.nodes[w.0].cols;
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            adj[w.0][r * cols + c] += gr * xv[c];
                            adj[x.0][c] += gr * wv[r * cols + c];
                        }
                    }
                }
                Op::Gate { w, j, u, h, b } => {
                    let wc = self.nodes[w.0].cols;
                    let uc = self.nodes[u.0].cols;
                    let hv = &self.nodes[h.0].value;
                    let uv = &self.nodes[u.0].value;
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        adj[w.0][r * wc + j] += gr;
                        adj[b.0][r] += gr;
                        for c in 0..uc {
                            adj[u.0][r * uc + c] += gr * hv[c];
                            adj[h.0][c] += gr * uv[r * uc + c];
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut adj[a.0], &g, 1.0);
                    acc(&mut adj[b.0], &g, 1.0);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj[a.0], &g, 1.0);
                    acc(&mut adj[b.0], &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for k in 0..g.len() {
                        adj[a.0][k] += g[k] * bv[k];
                        adj[b.0][k] += g[k] * av[k];
                    }
                }
                Op::OneMinus(a) => acc(&mut adj[a.0], &g, -1.0),
                Op::Scale(a, c) => acc(&mut adj[a.0], &g, *c),
                Op::Sigmoid(a) => {
                    for (k, y) in node.value.iter().enumerate() {
                        adj[a.0][k] += g[k] * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    for (k, y) in node.value.iter().enumerate() {
                        adj[a.0][k] += g[k] * (1.0 - y * y);
                    }
                }
                Op::Concat(a, b) => {
                    let na = self.nodes[a.0].value.len();
                    acc(&mut adj[a.0], &g[..na], 1.0);
                    acc(&mut adj[b.0], &g[na..], 1.0);
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    for k in 0..av.len() {
                        adj[a.0][k] += g[0] * bv[k];
                        adj[b.0][k] += g[0] * av[k];
                    }
                }
                Op::Stack(items) => {
                    for (k, v) in items.iter().enumerate() {
                        adj[v.0][0] += g[k];
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    for k in 0..y.len() {
                        adj[a.0][k] += y[k] * (g[k] - gy);
                    }
                }
                Op::WeightedSum { weights, rows } => {
                    let w = &self.nodes[weights.0].value;
                    for (k, r) in rows.iter().enumerate() {
                        let rv = &self.nodes[r.0].value;
                        adj[weights.0][k] += g.iter().zip(rv).map(|(a, b)| a * b).sum::<f64>();
                        acc(&mut adj[r.0], &g, w[k]);
                    }
                }
                Op::SoftmaxCe { logits, target } => {
                    for (k, p) in node.aux.iter().enumerate() {
                        let y = if k == *target { 1.0 } else { 0.0 };
                        adj[logits.0][k] += g[0] * (p - y);
                    }
                }
                Op::Sum(items) => {
                    for v in items {
                        acc(&mut adj[v.0], &g, 1.0);
                    }
                }
            }
        }
        Ok(())
    }
}

fn acc(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}
