use std::collections::HashMap;

use super::ops;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param { token: usize, id: ParamId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Minimum(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Matmul(NodeId, NodeId),
    MatmulNt(NodeId, NodeId),
    MatmulSorted(NodeId, NodeId),
    Vecmat(NodeId, NodeId),
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    Relu(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    Square(NodeId),
    Softplus(NodeId),
    Clamp(NodeId, f64, f64),
    SoftmaxRows(NodeId),
    MeanRows(NodeId),
    MeanAll(NodeId),
    SumAll(NodeId),
    Concat(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    Reshape(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Forward values are computed eagerly as nodes are pushed; `backward` does
/// one reverse sweep. A tape lives for a single forward/backward pass, so
/// parameter values captured at push time stay current.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_memo: HashMap<(usize, usize), NodeId>,
    grads: Vec<Tensor>,
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward root w.r.t. this node (zeros if the
    /// node did not participate). Only valid after `backward`.
    pub fn grad(&self, id: NodeId) -> &Tensor {
        &self.grads[id.0]
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value, false)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.input(Tensor::scalar(v))
    }

    /// Leaf bound to a store parameter; repeated calls for the same
    /// parameter return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        let key = (store.token(), id.0);
        if let Some(&n) = self.param_memo.get(&key) {
            return n;
        }
        let n = self.push(
            Op::Param {
                token: store.token(),
                id,
            },
            store.value(id).clone(),
            true,
        );
        self.param_memo.insert(key, n);
        n
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::add(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Add(a, b), v, ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::sub(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Sub(a, b), v, ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::mul(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Mul(a, b), v, ng)
    }

    pub fn minimum(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::minimum(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Minimum(a, b), v, ng)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = ops::scale(self.value(a), c);
        let ng = self.needs(a);
        self.push(Op::Scale(a, c), v, ng)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = ops::add_scalar(self.value(a), c);
        let ng = self.needs(a);
        self.push(Op::AddScalar(a), v, ng)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::matmul(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Matmul(a, b), v, ng)
    }

    /// A · Bᵀ.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::matmul_nt(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::MatmulNt(a, b), v, ng)
    }

    /// A · B with order-invariant inner accumulation (attention weights ×
    /// values; the contraction axis is the exchangeable object axis).
    pub fn matmul_sorted(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ops::matmul_sorted(self.value(a), self.value(b)).unwrap();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::MatmulSorted(a, b), v, ng)
    }

    pub fn vecmat(&mut self, x: NodeId, w: NodeId) -> NodeId {
        let v = ops::vecmat(self.value(x), self.value(w)).unwrap();
        let ng = self.needs(x) || self.needs(w);
        self.push(Op::Vecmat(x, w), v, ng)
    }

    /// Single-head self-attention over the rows of `x`:
    /// softmax((XWq)(XWk)ᵀ / sqrt(d)) · (XWv) with square d x d weights.
    /// Softmax denominators and the value contraction both use
    /// order-invariant summation, so permuting the rows of `x` permutes the
    /// output rows bit-exactly.
    pub fn self_attention(&mut self, x: NodeId, wq: NodeId, wk: NodeId, wv: NodeId) -> NodeId {
        let d = self.value(wq).cols();
        let q = self.matmul(x, wq);
        let k = self.matmul(x, wk);
        let v = self.matmul(x, wv);
        let scores = self.matmul_nt(q, k);
        let scaled = self.scale(scores, 1.0 / (d as f64).sqrt());
        let weights = self.softmax_rows(scaled);
        self.matmul_sorted(weights, v)
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, pad: usize) -> NodeId {
        let v = ops::conv2d(self.value(x), self.value(w), self.value(b), stride, pad).unwrap();
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Conv2d { x, w, b, stride, pad }, v, ng)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = ops::map(self.value(a), |x| x.max(0.0));
        let ng = self.needs(a);
        self.push(Op::Relu(a), v, ng)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = ops::map(self.value(a), f64::tanh);
        let ng = self.needs(a);
        self.push(Op::Tanh(a), v, ng)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = ops::map(self.value(a), f64::exp);
        let ng = self.needs(a);
        self.push(Op::Exp(a), v, ng)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = ops::map(self.value(a), |x| x * x);
        let ng = self.needs(a);
        self.push(Op::Square(a), v, ng)
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = ops::map(self.value(a), ops::softplus_scalar);
        let ng = self.needs(a);
        self.push(Op::Softplus(a), v, ng)
    }

    /// Clamp with pass-through gradient strictly inside [lo, hi] and zero
    /// outside (boundary counts as inside).
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = ops::map(self.value(a), |x| x.clamp(lo, hi));
        let ng = self.needs(a);
        self.push(Op::Clamp(a, lo, hi), v, ng)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = ops::softmax_rows(self.value(a)).unwrap();
        let ng = self.needs(a);
        self.push(Op::SoftmaxRows(a), v, ng)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = ops::mean_rows(self.value(a)).unwrap();
        let ng = self.needs(a);
        self.push(Op::MeanRows(a), v, ng)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).numel() as f64;
        let v = Tensor::scalar(self.value(a).data().iter().sum::<f64>() / n);
        let ng = self.needs(a);
        self.push(Op::MeanAll(a), v, ng)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).data().iter().sum::<f64>());
        let ng = self.needs(a);
        self.push(Op::SumAll(a), v, ng)
    }

    /// Concatenate 1-D tensors.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut data = Vec::new();
        let mut ng = false;
        for &p in parts {
            assert_eq!(
                self.value(p).shape().len(),
                1,
                "concat expects rank-1 parts, got {:?}",
                self.value(p).shape()
            );
            data.extend_from_slice(self.value(p).data());
            ng |= self.needs(p);
        }
        let n = data.len();
        let v = Tensor::from_vec(&[n], data).unwrap();
        self.push(Op::Concat(parts.to_vec()), v, ng)
    }

    /// Stack 1-D tensors of equal length into a rank-2 tensor, one per row.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> NodeId {
        assert!(!rows.is_empty(), "stack_rows needs at least one row");
        let d = self.value(rows[0]).numel();
        let mut data = Vec::with_capacity(rows.len() * d);
        let mut ng = false;
        for &r in rows {
            assert_eq!(
                self.value(r).numel(),
                d,
                "stack_rows row length mismatch: {} vs {}",
                self.value(r).numel(),
                d
            );
            data.extend_from_slice(self.value(r).data());
            ng |= self.needs(r);
        }
        let v = Tensor::from_vec(&[rows.len(), d], data).unwrap();
        self.push(Op::StackRows(rows.to_vec()), v, ng)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> NodeId {
        let v = self.value(a).reshaped(shape).unwrap();
        let ng = self.needs(a);
        self.push(Op::Reshape(a), v, ng)
    }

    /// Reverse sweep from a scalar root. Parameter gradients accumulate into
    /// whichever of `stores` owns them; gradients for parameters of stores
    /// not passed are dropped.
    pub fn backward(&mut self, root: NodeId, stores: &mut [&mut ParamStore]) {
        assert_eq!(
            self.value(root).numel(),
            1,
            "backward root must be a scalar, got shape {:?}",
            self.value(root).shape()
        );
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape()))
            .collect();
        grads[root.0].data_mut()[0] = 1.0;

        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let dy = std::mem::replace(&mut grads[i], Tensor::zeros(&[0]));
            self.propagate(i, &dy, &mut grads, stores);
            grads[i] = dy;
        }
        self.grads = grads;
    }

    fn propagate(
        &self,
        i: usize,
        dy: &Tensor,
        grads: &mut [Tensor],
        stores: &mut [&mut ParamStore],
    ) {
        fn axpy(dst: &mut Tensor, src: &Tensor) {
            for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += s;
            }
        }
        fn axpy_slice(dst: &mut [f64], src: &[f64]) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        let val = |id: NodeId| &self.nodes[id.0].value;
        let needs = |id: NodeId| self.nodes[id.0].needs_grad;

        match &self.nodes[i].op {
            Op::Input => {}
            Op::Param { token, id } => {
                for s in stores.iter_mut() {
                    if s.token() == *token {
                        axpy(s.grad_mut(*id), dy);
                        break;
                    }
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    axpy(&mut grads[a.0], dy);
                }
                if needs(*b) {
                    axpy(&mut grads[b.0], dy);
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    axpy(&mut grads[a.0], dy);
                }
                if needs(*b) {
                    for (d, &s) in grads[b.0].data_mut().iter_mut().zip(dy.data()) {
                        *d -= s;
                    }
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    let t = ops::mul(dy, val(*b)).unwrap();
                    axpy(&mut grads[a.0], &t);
                }
                if needs(*b) {
                    let t = ops::mul(dy, val(*a)).unwrap();
                    axpy(&mut grads[b.0], &t);
                }
            }
            Op::Minimum(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                for (k, &g) in dy.data().iter().enumerate() {
                    if av.data()[k] <= bv.data()[k] {
                        if needs(*a) {
                            grads[a.0].data_mut()[k] += g;
                        }
                    } else if needs(*b) {
                        grads[b.0].data_mut()[k] += g;
                    }
                }
            }
            Op::Scale(a, c) => {
                if needs(*a) {
                    let t = ops::scale(dy, *c);
                    axpy(&mut grads[a.0], &t);
                }
            }
            Op::AddScalar(a) => {
                if needs(*a) {
                    axpy(&mut grads[a.0], dy);
                }
            }
            Op::Matmul(a, b) => {
                if needs(*a) {
                    let da = ops::matmul_nt(dy, val(*b)).unwrap();
                    axpy(&mut grads[a.0], &da);
                }
                if needs(*b) {
                    let db = ops::matmul_tn(val(*a), dy).unwrap();
                    axpy(&mut grads[b.0], &db);
                }
            }
            Op::MatmulNt(a, b) => {
                // y = a bᵀ: da = dy b, db = dyᵀ a.
                if needs(*a) {
                    let da = ops::matmul(dy, val(*b)).unwrap();
                    axpy(&mut grads[a.0], &da);
                }
                if needs(*b) {
                    let db = ops::matmul_tn(dy, val(*a)).unwrap();
                    axpy(&mut grads[b.0], &db);
                }
            }
            Op::MatmulSorted(a, b) => {
                if needs(*a) {
                    let da = ops::matmul_nt(dy, val(*b)).unwrap();
                    axpy(&mut grads[a.0], &da);
                }
                if needs(*b) {
                    let db = ops::matmul_tn(val(*a), dy).unwrap();
                    axpy(&mut grads[b.0], &db);
                }
            }
            Op::Vecmat(x, w) => {
                // y = x W: dx[j] = sum_m W[j,m] dy[m], dW[j,m] = x[j] dy[m].
                let wm = val(*w);
                let (k, m) = (wm.rows(), wm.cols());
                if needs(*x) {
                    let dst = grads[x.0].data_mut();
                    for j in 0..k {
                        let wrow = &wm.data()[j * m..(j + 1) * m];
                        dst[j] += wrow
                            .iter()
                            .zip(dy.data())
                            .map(|(&wv, &g)| wv * g)
                            .sum::<f64>();
                    }
                }
                if needs(*w) {
                    let xv = val(*x).data().to_vec();
                    let dst = grads[w.0].data_mut();
                    for (j, &xj) in xv.iter().enumerate() {
                        let drow = &mut dst[j * m..(j + 1) * m];
                        for (d, &g) in drow.iter_mut().zip(dy.data()) {
                            *d += xj * g;
                        }
                    }
                }
            }
            Op::Conv2d { x, w, b, stride, pad } => {
                let (dx, dw, db) = ops::conv2d_backward(val(*x), val(*w), dy, *stride, *pad);
                if needs(*x) {
                    axpy(&mut grads[x.0], &dx);
                }
                if needs(*w) {
                    axpy(&mut grads[w.0], &dw);
                }
                if needs(*b) {
                    axpy(&mut grads[b.0], &db);
                }
            }
            Op::Relu(a) => {
                if needs(*a) {
                    let xs = val(*a);
                    for (k, &g) in dy.data().iter().enumerate() {
                        if xs.data()[k] > 0.0 {
                            grads[a.0].data_mut()[k] += g;
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                if needs(*a) {
                    let y = &self.nodes[i].value;
                    for (k, &g) in dy.data().iter().enumerate() {
                        let t = y.data()[k];
                        grads[a.0].data_mut()[k] += g * (1.0 - t * t);
                    }
                }
            }
            Op::Exp(a) => {
                if needs(*a) {
                    let y = &self.nodes[i].value;
                    for (k, &g) in dy.data().iter().enumerate() {
                        grads[a.0].data_mut()[k] += g * y.data()[k];
                    }
                }
            }
            Op::Square(a) => {
                if needs(*a) {
                    let xs = val(*a);
                    for (k, &g) in dy.data().iter().enumerate() {
                        grads[a.0].data_mut()[k] += g * 2.0 * xs.data()[k];
                    }
                }
            }
            Op::Softplus(a) => {
                if needs(*a) {
                    let xs = val(*a);
                    for (k, &g) in dy.data().iter().enumerate() {
                        let x = xs.data()[k];
                        let sig = 1.0 / (1.0 + (-x).exp());
                        grads[a.0].data_mut()[k] += g * sig;
                    }
                }
            }
            Op::Clamp(a, lo, hi) => {
                if needs(*a) {
                    let xs = val(*a);
                    for (k, &g) in dy.data().iter().enumerate() {
                        let x = xs.data()[k];
                        if x >= *lo && x <= *hi {
                            grads[a.0].data_mut()[k] += g;
                        }
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                if needs(*a) {
                    let y = &self.nodes[i].value;
                    let (n, m) = (y.rows(), y.cols());
                    for r in 0..n {
                        let yrow = &y.data()[r * m..(r + 1) * m];
                        let grow = &dy.data()[r * m..(r + 1) * m];
                        let dot: f64 = yrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                        let dst = &mut grads[a.0].data_mut()[r * m..(r + 1) * m];
                        for ((d, &yv), &gv) in dst.iter_mut().zip(yrow).zip(grow) {
                            *d += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::MeanRows(a) => {
                if needs(*a) {
                    let src = val(*a);
                    let (n, m) = (src.rows(), src.cols());
                    let inv = 1.0 / n as f64;
                    let dst = grads[a.0].data_mut();
                    for r in 0..n {
                        for (d, &g) in dst[r * m..(r + 1) * m].iter_mut().zip(dy.data()) {
                            *d += g * inv;
                        }
                    }
                }
            }
            Op::MeanAll(a) => {
                if needs(*a) {
                    let inv = 1.0 / val(*a).numel() as f64;
                    let g = dy.data()[0] * inv;
                    for d in grads[a.0].data_mut() {
                        *d += g;
                    }
                }
            }
            Op::SumAll(a) => {
                if needs(*a) {
                    let g = dy.data()[0];
                    for d in grads[a.0].data_mut() {
                        *d += g;
                    }
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = val(p).numel();
                    if needs(p) {
                        axpy_slice(grads[p.0].data_mut(), &dy.data()[off..off + n]);
                    }
                    off += n;
                }
            }
            Op::StackRows(rows) => {
                let d = val(rows[0]).numel();
                for (r, &row) in rows.iter().enumerate() {
                    if needs(row) {
                        axpy_slice(grads[row.0].data_mut(), &dy.data()[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Reshape(a) => {
                if needs(*a) {
                    axpy_slice(grads[a.0].data_mut(), dy.data());
                }
            }
        }
    }
}
