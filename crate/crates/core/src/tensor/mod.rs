//! Dense 64-bit tensors with reverse-mode automatic differentiation.
//!
//! Values are immutable, row-major `f64` buffers. An operation between
//! tensors that live on a [`Graph`] is recorded there; between detached
//! tensors it just computes eagerly. The same operator code therefore serves
//! training, plain numeric work, and the adjoint rules replayed during
//! backward passes, which is what makes higher-order `grad` calls work.
//!
//! Shape errors are programming errors and panic with messages naming the
//! offending shapes.

mod autodiff;
mod graph;
pub mod plan;

pub use autodiff::{finite_diff_check, grad, FiniteDiffReport, GradError};
pub use graph::Graph;

use graph::Op;
use plan::SpreadPlan;
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

#[derive(Clone)]
pub(crate) struct NodeRef {
    pub graph: Graph,
    pub id: usize,
}

/// Dense row-major tensor. Element `(i, j)` of an `m x n` matrix lives at
/// flat index `i * n + j`; `vec_row` flattening follows the same order.
#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
    node: Option<NodeRef>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("on_graph", &self.node.is_some())
            .field("data", &&self.data[..self.data.len().min(8)])
            .finish()
    }
}

fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    // ---- construction ----

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Tensor {
        assert_eq!(
            numel_of(shape),
            data.len(),
            "shape {shape:?} implies {} elements, got {}",
            numel_of(shape),
            data.len()
        );
        Tensor { shape: shape.to_vec(), data: Arc::new(data), node: None }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(&[], vec![v])
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::from_vec(shape, vec![0.0; numel_of(shape)])
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::from_vec(shape, vec![1.0; numel_of(shape)])
    }

    pub fn full(shape: &[usize], v: f64) -> Tensor {
        Tensor::from_vec(shape, vec![v; numel_of(shape)])
    }

    pub fn eye(n: usize) -> Tensor {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Tensor::from_vec(&[n, n], data)
    }

    /// I.i.d. standard normal entries scaled by `std`.
    pub fn randn(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor {
        let data = (0..numel_of(shape)).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Tensor::from_vec(shape, data)
    }

    pub(crate) fn from_node(graph: &Graph, id: usize) -> Tensor {
        let (shape, data) = graph.node_value(id);
        Tensor { shape, data, node: Some(NodeRef { graph: graph.clone(), id }) }
    }

    // ---- accessors ----

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_on_graph(&self) -> bool {
        self.node.is_some()
    }

    /// Handle of the graph this tensor is recorded on, if any.
    pub fn graph(&self) -> Option<Graph> {
        self.node.as_ref().map(|nr| nr.graph.clone())
    }

    pub(crate) fn node_ref(&self) -> Option<&NodeRef> {
        self.node.as_ref()
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// Element of a rank-2 tensor.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        assert_eq!(self.shape.len(), 2, "at() needs a matrix, got shape {:?}", self.shape);
        self.data[i * self.shape[1] + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same values, no graph attachment.
    pub fn detach(&self) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.clone(), node: None }
    }

    /// Registers this value as a differentiable leaf of `graph`.
    pub fn leaf(&self, graph: &Graph) -> Tensor {
        let id = graph.push(Op::Leaf, vec![], self.shape.clone(), self.data.clone());
        Tensor { shape: self.shape.clone(), data: self.data.clone(), node: Some(NodeRef { graph: graph.clone(), id }) }
    }

    // ---- recording helpers ----

    fn unary(&self, op: Op, shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        let data = Arc::new(data);
        match &self.node {
            None => Tensor { shape, data, node: None },
            Some(nr) => {
                let id = nr.graph.push(op, vec![nr.id], shape.clone(), data.clone());
                Tensor { shape, data, node: Some(NodeRef { graph: nr.graph.clone(), id }) }
            }
        }
    }

    fn binary(&self, other: &Tensor, op: Op, shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        let data = Arc::new(data);
        let graph = match (&self.node, &other.node) {
            (None, None) => return Tensor { shape, data, node: None },
            (Some(a), Some(b)) => {
                assert!(
                    Graph::same_graph(&a.graph, &b.graph),
                    "operands belong to different graphs"
                );
                a.graph.clone()
            }
            (Some(a), None) => a.graph.clone(),
            (None, Some(b)) => b.graph.clone(),
        };
        let aid = self.id_on(&graph);
        let bid = other.id_on(&graph);
        let id = graph.push(op, vec![aid, bid], shape.clone(), data.clone());
        Tensor { shape, data, node: Some(NodeRef { graph, id }) }
    }

    fn id_on(&self, graph: &Graph) -> usize {
        match &self.node {
            Some(nr) => nr.id,
            None => graph.push(Op::Constant, vec![], self.shape.clone(), self.data.clone()),
        }
    }

    fn assert_same_shape(&self, other: &Tensor, what: &str) {
        assert_eq!(
            self.shape, other.shape,
            "{what}: shapes {:?} and {:?} differ",
            self.shape, other.shape
        );
    }

    // ---- elementwise ----

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.assert_same_shape(other, "add");
        let data = self.data.iter().zip(other.data.iter()).map(|(a, b)| a + b).collect();
        self.binary(other, Op::Add, self.shape.clone(), data)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.assert_same_shape(other, "sub");
        let data = self.data.iter().zip(other.data.iter()).map(|(a, b)| a - b).collect();
        self.binary(other, Op::Sub, self.shape.clone(), data)
    }

    /// Hadamard product.
    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.assert_same_shape(other, "mul");
        let data = self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).collect();
        self.binary(other, Op::Mul, self.shape.clone(), data)
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        self.assert_same_shape(other, "div");
        let data = self.data.iter().zip(other.data.iter()).map(|(a, b)| a / b).collect();
        self.binary(other, Op::Div, self.shape.clone(), data)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let data = self.data.iter().map(|a| a * c).collect();
        self.unary(Op::Scale(c), self.shape.clone(), data)
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    pub fn exp(&self) -> Tensor {
        let data = self.data.iter().map(|a| a.exp()).collect();
        self.unary(Op::Exp, self.shape.clone(), data)
    }

    pub fn log(&self) -> Tensor {
        let data = self.data.iter().map(|a| a.ln()).collect();
        self.unary(Op::Log, self.shape.clone(), data)
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data.iter().map(|&a| if a > 0.0 { a } else { 0.0 }).collect();
        self.unary(Op::Relu, self.shape.clone(), data)
    }

    // ---- linear algebra ----

    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape.len(), 2, "matmul: left operand has shape {:?}, need a matrix", self.shape);
        assert_eq!(other.shape.len(), 2, "matmul: right operand has shape {:?}, need a matrix", other.shape);
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        assert_eq!(k, k2, "matmul: inner dimensions disagree: {:?} x {:?}", self.shape, other.shape);
        let data = matmul_data(&self.data, &other.data, m, k, n);
        self.binary(other, Op::Matmul, vec![m, n], data)
    }

    pub fn transpose(&self) -> Tensor {
        assert_eq!(self.shape.len(), 2, "transpose: got shape {:?}, need a matrix", self.shape);
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = self.data[i * n + j];
            }
        }
        self.unary(Op::Transpose, vec![n, m], data)
    }

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        assert_eq!(
            numel_of(shape),
            self.numel(),
            "reshape: cannot view {:?} ({} elements) as {shape:?}",
            self.shape,
            self.numel()
        );
        self.unary(Op::Reshape, shape.to_vec(), self.data.as_ref().clone())
    }

    /// Row-major flattening of a matrix into a vector.
    pub fn vec_row(&self) -> Tensor {
        assert_eq!(self.shape.len(), 2, "vec_row: got shape {:?}, need a matrix", self.shape);
        self.reshape(&[self.numel()])
    }

    /// Kronecker product of two matrices; block `(i, j)` equals `a[i,j] * b`.
    pub fn kron(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape.len(), 2, "kron: left operand has shape {:?}, need a matrix", self.shape);
        assert_eq!(other.shape.len(), 2, "kron: right operand has shape {:?}, need a matrix", other.shape);
        let (p, q) = (self.shape[0], self.shape[1]);
        let (r, s) = (other.shape[0], other.shape[1]);
        let mut data = vec![0.0; p * r * q * s];
        let cols = q * s;
        for i in 0..p {
            for j in 0..q
            {
                let a = self.data[i * q + j];
                if a == 0.0 {
                    continue;
                }
                for u in 0..r {
                    let row = i * r + u;
                    for v in 0..s {
                        data[row * cols + j * s + v] += a * other.data[u * s + v];
                    }
                }
            }
        }
        self.binary(other, Op::Kron, vec![p * r, q * s], data)
    }

    /// Adjoint of `kron` w.r.t. its left operand: contracts each `(r, s)`
    /// block of `self` against `b`.
    pub(crate) fn kron_adj_left(&self, b: &Tensor) -> Tensor {
        let (r, s) = (b.shape[0], b.shape[1]);
        let (rows, cols) = (self.shape[0], self.shape[1]);
        assert!(rows % r == 0 && cols % s == 0, "kron_adj_left: {:?} not tiled by {:?}", self.shape, b.shape);
        let (p, q) = (rows / r, cols / s);
        let mut data = vec![0.0; p * q];
        for i in 0..p {
            for j in 0..q {
                let mut acc = 0.0;
                for u in 0..r {
                    for v in 0..s {
                        acc += self.data[(i * r + u) * cols + j * s + v] * b.data[u * s + v];
                    }
                }
                data[i * q + j] = acc;
            }
        }
        self.binary(b, Op::KronAdjLeft, vec![p, q], data)
    }

    /// Adjoint of `kron` w.r.t. its right operand.
    pub(crate) fn kron_adj_right(&self, a: &Tensor) -> Tensor {
        let (p, q) = (a.shape[0], a.shape[1]);
        let (rows, cols) = (self.shape[0], self.shape[1]);
        assert!(rows % p == 0 && cols % q == 0, "kron_adj_right: {:?} not tiled by {:?}", self.shape, a.shape);
        let (r, s) = (rows / p, cols / q);
        let mut data = vec![0.0; r * s];
        for u in 0..r {
            for v in 0..s {
                let mut acc = 0.0;
                for i in 0..p {
                    for j in 0..q {
                        acc += self.data[(i * r + u) * cols + j * s + v] * a.data[i * q + j];
                    }
                }
                data[u * s + v] = acc;
            }
        }
        self.binary(a, Op::KronAdjRight, vec![r, s], data)
    }

    // ---- reductions and broadcasts ----

    pub fn sum_all(&self) -> Tensor {
        let total: f64 = self.data.iter().sum();
        self.unary(Op::SumAll, vec![], vec![total])
    }

    pub fn mean_all(&self) -> Tensor {
        assert!(self.numel() > 0, "mean_all of empty tensor");
        self.sum_all().scale(1.0 / self.numel() as f64)
    }

    /// Broadcast a scalar tensor to `shape`.
    pub fn expand_to(&self, shape: &[usize]) -> Tensor {
        assert_eq!(self.numel(), 1, "expand_to: got shape {:?}, need a scalar", self.shape);
        let data = vec![self.data[0]; numel_of(shape)];
        self.unary(Op::ExpandScalar, shape.to_vec(), data)
    }

    /// Applies a spread plan (see [`plan::SpreadPlan`]): `out[dst] += self[src]`.
    pub fn spread(&self, plan: &Arc<SpreadPlan>) -> Tensor {
        assert_eq!(
            self.shape,
            plan.src_shape(),
            "spread: tensor shape {:?} does not match plan source {:?}",
            self.shape,
            plan.src_shape()
        );
        let data = plan.apply_forward(&self.data);
        self.unary(Op::Spread { plan: plan.clone(), reverse: false }, plan.dst_shape().to_vec(), data)
    }

    pub(crate) fn spread_reverse(&self, plan: &Arc<SpreadPlan>) -> Tensor {
        assert_eq!(
            self.shape,
            plan.dst_shape(),
            "spread_reverse: tensor shape {:?} does not match plan destination {:?}",
            self.shape,
            plan.dst_shape()
        );
        let data = plan.apply_reverse(&self.data);
        self.unary(Op::Spread { plan: plan.clone(), reverse: true }, plan.src_shape().to_vec(), data)
    }

    /// Contracts matrix `u` against mode `axis` of a rank-3 tensor: the
    /// result replaces that mode's size with `u`'s row count.
    pub fn mode_n_product(&self, u: &Tensor, axis: usize) -> Tensor {
        assert_eq!(self.shape.len(), 3, "mode_n_product: got shape {:?}, need rank 3", self.shape);
        assert!(axis < 3, "mode_n_product: axis {axis} out of range for rank-3 tensor");
        assert_eq!(u.shape.len(), 2, "mode_n_product: factor has shape {:?}, need a matrix", u.shape);
        assert_eq!(
            u.shape[1], self.shape[axis],
            "mode_n_product: factor {:?} does not contract mode {axis} of {:?}",
            u.shape, self.shape
        );
        let in_shape = [self.shape[0], self.shape[1], self.shape[2]];
        let mut out_shape = in_shape;
        out_shape[axis] = u.shape[0];
        let unfolded = self.spread(&plan::plan_unfold3(in_shape, axis));
        let contracted = u.matmul(&unfolded);
        contracted.spread(&plan::plan_fold3(out_shape, axis))
    }

    /// Appends a trailing column of ones to a `(batch, n)` matrix (bias trick).
    pub fn append_ones_col(&self) -> Tensor {
        assert_eq!(self.shape.len(), 2, "append_ones_col: got shape {:?}, need a matrix", self.shape);
        let (rows, cols) = (self.shape[0], self.shape[1]);
        let widened = self.spread(&plan::plan_widen_cols(rows, cols, 1));
        let mut ones_col = vec![0.0; rows * (cols + 1)];
        for r in 0..rows {
            ones_col[r * (cols + 1) + cols] = 1.0;
        }
        widened.add(&Tensor::from_vec(&[rows, cols + 1], ones_col))
    }
}

/// Mean over all components of the squared difference.
pub fn mse(pred: &Tensor, target: &Tensor) -> Tensor {
    let d = pred.sub(target);
    d.mul(&d).mean_all()
}

/// Mean over rows of `logsumexp(row) - row[label]`, in natural log units.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Tensor {
    assert_eq!(logits.shape().len(), 2, "softmax_cross_entropy: logits shape {:?}, need a matrix", logits.shape());
    let (rows, cols) = (logits.shape()[0], logits.shape()[1]);
    assert_eq!(rows, labels.len(), "softmax_cross_entropy: {rows} rows vs {} labels", labels.len());
    // Row maxima are a non-differentiable shift; the true derivative is the
    // softmax either way, so they enter as constants.
    let mut maxima = vec![f64::NEG_INFINITY; rows];
    for r in 0..rows {
        for c in 0..cols {
            maxima[r] = maxima[r].max(logits.data()[r * cols + c]);
        }
    }
    let max_col = Tensor::from_vec(&[rows, 1], maxima);
    let shifted = logits.sub(&max_col.expand_cols(cols));
    let sums = shifted.exp().spread(&plan::plan_row_sum(rows, cols));
    let lse = sums.log().add(&max_col);
    let picked = logits.spread(&plan::plan_select_per_row(rows, cols, labels));
    lse.sub(&picked).mean_all()
}

impl Tensor {
    /// Broadcast a `(rows, 1)` column across `cols` columns.
    pub fn expand_cols(&self, cols: usize) -> Tensor {
        assert!(
            self.shape.len() == 2 && self.shape[1] == 1,
            "expand_cols: got shape {:?}, need a column vector",
            self.shape
        );
        self.spread(&plan::plan_broadcast_cols(self.shape[0], cols))
    }
}

/// Row-index of the maximum per row of a `(rows, cols)` matrix.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    assert_eq!(t.shape().len(), 2, "argmax_rows: got shape {:?}", t.shape());
    let (rows, cols) = (t.shape()[0], t.shape()[1]);
    (0..rows)
        .map(|r| {
            let row = &t.data()[r * cols..(r + 1) * cols];
            row.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            }).0
        })
        .collect()
}

pub(crate) fn matmul_data(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o += av * bv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn t2(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::from_vec(&[rows, cols], data.to_vec())
    }

    #[test]
    fn matmul_identity_passthrough() {
        let a = Tensor::eye(2);
        let b = t2(2, 1, &[3.0, 4.0]);
        assert_eq!(a.matmul(&b).data(), &[3.0, 4.0]);
    }

    #[test]
    fn matmul_hand_expanded() {
        // Cross-checked with a scalar triple loop.
        let a = t2(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = t2(2, 1, &[5.0, 6.0]);
        let c = a.matmul(&b);
        let mut oracle = vec![0.0; 2];
        for i in 0..2 {
            for p in 0..2 {
                oracle[i] += a.data()[i * 2 + p] * b.data()[p];
            }
        }
        assert_eq!(c.data(), &oracle[..]);
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_degenerate_rows() {
        let a = Tensor::zeros(&[0, 3]);
        let b = Tensor::zeros(&[3, 2]);
        let c = a.matmul(&b);
        assert_eq!(c.shape(), &[0, 2]);
        assert!(c.data().is_empty());
    }

    #[test]
    #[should_panic(expected = "inner dimensions disagree")]
    fn matmul_shape_mismatch_names_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 2]);
        let _ = a.matmul(&b);
    }

    #[test]
    fn kron_identities() {
        let i2 = Tensor::eye(2);
        let i3 = Tensor::eye(3);
        let i6 = i2.kron(&i3);
        assert_eq!(i6.data(), Tensor::eye(6).data());

        let swap = t2(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let two = t2(1, 1, &[2.0]);
        assert_eq!(swap.kron(&two).data(), &[0.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn kron_against_block_oracle() {
        let a = t2(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = t2(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let k = a.kron(&b);
        assert_eq!(k.shape(), &[4, 4]);
        // Brute-force double loop over blocks.
        for i in 0..2 {
            for j in 0..2 {
                for u in 0..2 {
                    for v in 0..2 {
                        assert_eq!(k.at(i * 2 + u, j * 2 + v), a.at(i, j) * b.at(u, v));
                    }
                }
            }
        }
    }

    #[test]
    #[should_panic(expected = "need a matrix")]
    fn kron_rejects_non_matrix() {
        let a = Tensor::zeros(&[2]);
        let b = Tensor::zeros(&[2, 2]);
        let _ = a.kron(&b);
    }

    #[test]
    fn mode_n_identity_and_ones() {
        let t = Tensor::ones(&[2, 2, 2]);
        let same = t.mode_n_product(&Tensor::eye(2), 1);
        assert_eq!(same.data(), t.data());

        // 2x2x2 of ones contracted along mode 3 by [[1, 1]] -> 2x2x1 of twos.
        let u = t2(1, 2, &[1.0, 1.0]);
        let out = t.mode_n_product(&u, 2);
        assert_eq!(out.shape(), &[2, 2, 1]);
        assert!(out.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn mode_n_shape_chain() {
        // (p x q x s) x1 (Co x p) x2 (Ci x q) x3 (HW x s) -> Co x Ci x HW
        let mut rng = seeded_rng(3);
        let v = Tensor::randn(&[2, 3, 4], 1.0, &mut rng);
        let u1 = Tensor::randn(&[5, 2], 1.0, &mut rng);
        let u2 = Tensor::randn(&[6, 3], 1.0, &mut rng);
        let u3 = Tensor::randn(&[7, 4], 1.0, &mut rng);
        let out = v.mode_n_product(&u1, 0).mode_n_product(&u2, 1).mode_n_product(&u3, 2);
        assert_eq!(out.shape(), &[5, 6, 7]);
    }

    #[test]
    #[should_panic(expected = "does not contract mode")]
    fn mode_n_dimension_mismatch() {
        let t = Tensor::ones(&[2, 2, 2]);
        let u = Tensor::ones(&[2, 3]);
        let _ = t.mode_n_product(&u, 0);
    }

    #[test]
    fn vec_row_definition_and_round_trip() {
        let w = t2(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = w.vec_row();
        assert_eq!(v.shape(), &[4]);
        assert_eq!(v.data(), &[1.0, 2.0, 3.0, 4.0]);
        let back = v.reshape(&[2, 2]);
        assert_eq!(back.data(), w.data());
    }

    #[test]
    fn vec_identity_pins_orientation() {
        // vec_row(A X B^T) == kron(A, B) vec_row(X)
        let mut rng = seeded_rng(11);
        let a = Tensor::randn(&[3, 2], 1.0, &mut rng);
        let x = Tensor::randn(&[2, 4], 1.0, &mut rng);
        let b = Tensor::randn(&[5, 4], 1.0, &mut rng);
        let lhs = a.matmul(&x).matmul(&b.transpose()).vec_row();
        let rhs = a.kron(&b).matmul(&x.vec_row().reshape(&[8, 1])).reshape(&[15]);
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1.0));
        }
    }

    #[test]
    fn append_ones_col_extends_input() {
        let x = t2(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let ext = x.append_ones_col();
        assert_eq!(ext.shape(), &[2, 3]);
        assert_eq!(ext.data(), &[1.0, 2.0, 1.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn softmax_cross_entropy_matches_direct_formula() {
        let logits = t2(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.0, 3.0]);
        let labels = [1usize, 2usize];
        let loss = softmax_cross_entropy(&logits, &labels).item();
        let mut expect = 0.0;
        for (r, &lab) in labels.iter().enumerate() {
            let row = &logits.data()[r * 3..(r + 1) * 3];
            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            expect += lse - row[lab];
        }
        expect /= 2.0;
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn mse_mean_of_squared_differences() {
        let a = t2(1, 2, &[1.0, 3.0]);
        let b = t2(1, 2, &[0.0, 1.0]);
        assert!((mse(&a, &b).item() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn argmax_rows_picks_first_max() {
        let t = t2(2, 3, &[0.0, 5.0, 5.0, -1.0, -2.0, -3.0]);
        assert_eq!(argmax_rows(&t), vec![1, 0]);
    }
}
