//! Dense layers: full symmetry-matrix reparameterization, Kronecker
//! factorization, and the plain baseline.
//!
//! All variants share the bias convention of appending a constant-1 input
//! dimension, so the bias lives inside the (reparameterized) weight matrix.

use rand::Rng;

use super::{ParamRole, ParamSpec};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiasMode {
    None,
    AppendOne,
}

impl BiasMode {
    fn extend(&self, n: usize) -> usize {
        match self {
            BiasMode::None => n,
            BiasMode::AppendOne => n + 1,
        }
    }

    fn apply(&self, x: &Tensor) -> Tensor {
        match self {
            BiasMode::None => x.clone(),
            BiasMode::AppendOne => x.append_ones_col(),
        }
    }
}

/// Weights factored as `vec_row(W) = U v` with `U` an `(m * n_eff) x k`
/// symmetry matrix (outer) and `v` a length-`k` filter (inner). `W` is
/// materialized on the graph at every forward pass and never stored.
#[derive(Clone)]
pub struct ReparamDense {
    in_dim: usize,
    out_dim: usize,
    bias: BiasMode,
    filter_dim: usize,
    frozen_identity: bool,
    u: Tensor,
    v: Tensor,
}

impl ReparamDense {
    /// `filter_dim` defaults to the (bias-extended) input size, which is the
    /// largest filter any group cross-correlation on that space needs.
    /// Symmetry entries start i.i.d. normal with variance `1/sqrt(m n)`;
    /// filters with variance `1/n`.
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        bias: BiasMode,
        filter_dim: Option<usize>,
        rng: &mut impl Rng,
    ) -> Self {
        let n_eff = bias.extend(in_dim);
        let k = filter_dim.unwrap_or(n_eff);
        let rows = out_dim * n_eff;
        let u = Tensor::randn(&[rows, k], 1.0 / ((out_dim * n_eff) as f64).sqrt(), rng);
        let v = Tensor::randn(&[k], (1.0 / n_eff as f64).sqrt(), rng);
        ReparamDense { in_dim, out_dim, bias, filter_dim: k, frozen_identity: false, u, v }
    }

    /// Symmetry matrix pinned to the identity and hidden from training; the
    /// filter is then exactly the flattened weight matrix, which reproduces
    /// the plain-baseline trajectory bit for bit.
    pub fn new_frozen_identity(in_dim: usize, out_dim: usize, bias: BiasMode, rng: &mut impl Rng) -> Self {
        let n_eff = bias.extend(in_dim);
        let rows = out_dim * n_eff;
        let v = Tensor::randn(&[rows], (1.0 / n_eff as f64).sqrt(), rng);
        ReparamDense {
            in_dim,
            out_dim,
            bias,
            filter_dim: rows,
            frozen_identity: true,
            u: Tensor::eye(rows),
            v,
        }
    }

    /// Symmetry matrix pinned to a constructed value (for example a stacked
    /// group representation) and hidden from training.
    pub fn with_fixed_symmetry(in_dim: usize, out_dim: usize, bias: BiasMode, u: Tensor, v: Tensor) -> Self {
        let n_eff = bias.extend(in_dim);
        assert_eq!(u.shape()[0], out_dim * n_eff, "symmetry matrix rows must equal out_dim * n_eff");
        assert_eq!(u.shape()[1], v.numel(), "filter length must match symmetry matrix columns");
        ReparamDense { in_dim, out_dim, bias, filter_dim: v.numel(), frozen_identity: true, u, v }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        if !self.frozen_identity {
            specs.push(ParamSpec { name: "U".into(), role: ParamRole::Symmetry, shape: self.u.shape().to_vec() });
        }
        specs.push(ParamSpec { name: "v".into(), role: ParamRole::Filter, shape: self.v.shape().to_vec() });
        specs
    }

    pub fn params(&self) -> Vec<Tensor> {
        if self.frozen_identity {
            vec![self.v.clone()]
        } else {
            vec![self.u.clone(), self.v.clone()]
        }
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        if self.frozen_identity {
            self.v = values[0].detach();
        } else {
            self.u = values[0].detach();
            self.v = values[1].detach();
        }
    }

    fn split<'a>(&self, params: &'a [Tensor]) -> (Tensor, &'a Tensor) {
        if self.frozen_identity {
            (self.u.clone(), &params[0])
        } else {
            (params[0].clone(), &params[1])
        }
    }

    pub fn materialize_weight(&self, params: &[Tensor]) -> Tensor {
        let (u, v) = self.split(params);
        let n_eff = self.bias.extend(self.in_dim);
        u.matmul(&v.reshape(&[self.filter_dim, 1])).reshape(&[self.out_dim, n_eff])
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let w = self.materialize_weight(params);
        self.bias.apply(x).matmul(&w.transpose())
    }
}

/// Kronecker-factored reparameterization `W = U_out V U_in^T`, built with two
/// matrix multiplies rather than ever forming the Kronecker product. Storage
/// is `m k + n l + k l` instead of the full matrix's `m n k l`.
#[derive(Clone)]
pub struct KroneckerDense {
    in_dim: usize,
    out_dim: usize,
    bias: BiasMode,
    u_out: Tensor,
    u_in: Tensor,
    v: Tensor,
}

impl KroneckerDense {
    /// Square factors initialized to identity, so the layer starts as a plain
    /// dense layer with weights `V`.
    pub fn new(in_dim: usize, out_dim: usize, bias: BiasMode, rng: &mut impl Rng) -> Self {
        let n_eff = bias.extend(in_dim);
        KroneckerDense {
            in_dim,
            out_dim,
            bias,
            u_out: Tensor::eye(out_dim),
            u_in: Tensor::eye(n_eff),
            v: Tensor::randn(&[out_dim, n_eff], (1.0 / n_eff as f64).sqrt(), rng),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Stored parameter count for the factored form vs the full matrix.
    pub fn storage_counts(&self) -> (usize, usize) {
        let (m, k) = (self.u_out.shape()[0], self.u_out.shape()[1]);
        let (n, l) = (self.u_in.shape()[0], self.u_in.shape()[1]);
        (m * k + n * l + k * l, m * n * k * l)
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        vec![
            ParamSpec { name: "U_out".into(), role: ParamRole::Symmetry, shape: self.u_out.shape().to_vec() },
            ParamSpec { name: "U_in".into(), role: ParamRole::Symmetry, shape: self.u_in.shape().to_vec() },
            ParamSpec { name: "V".into(), role: ParamRole::Filter, shape: self.v.shape().to_vec() },
        ]
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.u_out.clone(), self.u_in.clone(), self.v.clone()]
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        self.u_out = values[0].detach();
        self.u_in = values[1].detach();
        self.v = values[2].detach();
    }

    pub fn materialize_weight(&self, params: &[Tensor]) -> Tensor {
        params[0].matmul(&params[2]).matmul(&params[1].transpose())
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let w = self.materialize_weight(params);
        self.bias.apply(x).matmul(&w.transpose())
    }
}

/// Ordinary dense layer; the baseline treats the whole weight matrix as a
/// per-task parameter.
#[derive(Clone)]
pub struct PlainDense {
    in_dim: usize,
    out_dim: usize,
    bias: BiasMode,
    w: Tensor,
}

impl PlainDense {
    pub fn new(in_dim: usize, out_dim: usize, bias: BiasMode, rng: &mut impl Rng) -> Self {
        let n_eff = bias.extend(in_dim);
        let w = Tensor::randn(&[out_dim * n_eff], (1.0 / n_eff as f64).sqrt(), rng);
        PlainDense { in_dim, out_dim, bias, w }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        vec![ParamSpec { name: "W".into(), role: ParamRole::Plain, shape: self.w.shape().to_vec() }]
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.w.clone()]
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        self.w = values[0].detach();
    }

    pub fn materialize_weight(&self, params: &[Tensor]) -> Tensor {
        let n_eff = self.bias.extend(self.in_dim);
        params[0].reshape(&[self.out_dim, n_eff])
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let w = self.materialize_weight(params);
        self.bias.apply(x).matmul(&w.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::tensor::{finite_diff_check, Graph, Tensor};

    #[test]
    fn identity_symmetry_is_a_plain_dense_layer() {
        let mut rng = seeded_rng(1);
        let layer = ReparamDense::new_frozen_identity(3, 2, BiasMode::None, &mut rng);
        let x = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let params = layer.params();
        let y = layer.forward(&x, &params);
        let w = params[0].reshape(&[2, 3]);
        let direct = x.matmul(&w.transpose());
        assert_eq!(y.data(), direct.data());
    }

    #[test]
    fn s2_symmetry_shares_as_expected() {
        // U stacking the identity and the swap gives W = [[a, b], [b, a]].
        let u = Tensor::from_vec(&[4, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let v = Tensor::from_vec(&[2], vec![3.0, 5.0]);
        let layer = ReparamDense::with_fixed_symmetry(2, 2, BiasMode::None, u, v);
        let params = layer.params();
        let w = layer.materialize_weight(&params);
        assert_eq!(w.data(), &[3.0, 5.0, 5.0, 3.0]);
    }

    #[test]
    fn dense_full_gradients_match_finite_differences() {
        let mut rng = seeded_rng(2);
        let layer = ReparamDense::new(3, 2, BiasMode::AppendOne, None, &mut rng);
        let x = Tensor::randn(&[5, 3], 1.0, &mut rng);
        let target = Tensor::randn(&[5, 2], 1.0, &mut rng);
        let u0 = layer.params()[0].clone();
        let v0 = layer.params()[1].clone();

        let layer_u = layer.clone();
        let (x2, t2, v2) = (x.clone(), target.clone(), v0.clone());
        let report = finite_diff_check(
            move |u| {
                let y = layer_u.forward(&x2, &[u.clone(), v2.clone()]);
                crate::tensor::mse(&y, &t2)
            },
            &u0,
            1e-5,
            1e-5,
        )
        .unwrap();
        assert!(report.passed(), "dU rel err {}", report.max_rel_err);

        let report = finite_diff_check(
            move |v| {
                let y = layer.forward(&x, &[u0.clone(), v.clone()]);
                crate::tensor::mse(&y, &target)
            },
            &v0,
            1e-5,
            1e-5,
        )
        .unwrap();
        assert!(report.passed(), "dv rel err {}", report.max_rel_err);
    }

    #[test]
    fn kronecker_identity_factors_reduce_to_v() {
        let mut rng = seeded_rng(3);
        let layer = KroneckerDense::new(3, 3, BiasMode::None, &mut rng);
        let params = layer.params();
        let w = layer.materialize_weight(&params);
        assert_eq!(w.data(), params[2].data());
    }

    #[test]
    fn kronecker_equals_full_reparameterization() {
        let mut rng = seeded_rng(4);
        let (m, n) = (3, 4);
        let u_out = Tensor::randn(&[m, m], 1.0, &mut rng);
        let u_in = Tensor::randn(&[n, n], 1.0, &mut rng);
        let v = Tensor::randn(&[m, n], 1.0, &mut rng);
        let mut layer = KroneckerDense::new(n, m, BiasMode::None, &mut rng);
        layer.set_params(&[u_out.clone(), u_in.clone(), v.clone()]);

        // The same map as a full symmetry matrix: U = u_out (x) u_in acting on
        // vec_row(V).
        let full = ReparamDense::with_fixed_symmetry(n, m, BiasMode::None, u_out.kron(&u_in), v.vec_row());
        let x = Tensor::randn(&[6, n], 1.0, &mut rng);
        let a = layer.forward(&x, &layer.params());
        let b = full.forward(&x, &full.params());
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() <= 1e-12 * p.abs().max(q.abs()).max(1.0));
        }
    }

    #[test]
    fn kronecker_storage_accounting() {
        let mut rng = seeded_rng(5);
        let layer = KroneckerDense::new(4, 3, BiasMode::None, &mut rng);
        let (factored, full) = layer.storage_counts();
        // m k + n l + k l with square factors k = m, l = n.
        assert_eq!(factored, 3 * 3 + 4 * 4 + 3 * 4);
        assert_eq!(full, 3 * 4 * 3 * 4);
        assert!(factored < full);
    }

    #[test]
    fn kronecker_gradients_match_finite_differences() {
        let mut rng = seeded_rng(6);
        let layer = KroneckerDense::new(3, 2, BiasMode::None, &mut rng);
        let x = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let target = Tensor::randn(&[4, 2], 1.0, &mut rng);
        let base = layer.params();
        for slot in 0..3 {
            let layer = layer.clone();
            let (x, target, base) = (x.clone(), target.clone(), base.clone());
            let flat = base[slot].reshape(&[base[slot].numel()]);
            let shape = base[slot].shape().to_vec();
            let report = finite_diff_check(
                move |p| {
                    let mut params = base.clone();
                    params[slot] = p.reshape(&shape);
                    crate::tensor::mse(&layer.forward(&x, &params), &target)
                },
                &flat,
                1e-5,
                1e-5,
            )
            .unwrap();
            assert!(report.passed(), "slot {slot} rel err {}", report.max_rel_err);
        }
    }

    #[test]
    fn bias_column_behaves_like_a_bias() {
        let mut rng = seeded_rng(7);
        let layer = PlainDense::new(2, 1, BiasMode::AppendOne, &mut rng);
        let mut params = layer.params();
        params[0] = Tensor::from_vec(&[3], vec![1.0, 2.0, 10.0]);
        let x = Tensor::from_vec(&[1, 2], vec![3.0, 4.0]);
        let y = layer.forward(&x, &params);
        assert_eq!(y.data(), &[3.0 + 8.0 + 10.0]);
    }

    #[test]
    fn graph_flow_reaches_both_parameter_groups() {
        let mut rng = seeded_rng(8);
        let layer = ReparamDense::new(3, 2, BiasMode::None, None, &mut rng);
        let graph = Graph::new();
        let u = layer.params()[0].leaf(&graph);
        let v = layer.params()[1].leaf(&graph);
        let x = Tensor::randn(&[2, 3], 1.0, &mut rng);
        let loss = layer.forward(&x, &[u.clone(), v.clone()]).mul(&Tensor::ones(&[2, 2])).sum_all();
        let gs = crate::tensor::grad(&loss, &[&u, &v], false).unwrap();
        assert!(gs[0].max_abs() > 0.0);
        assert!(gs[1].max_abs() > 0.0);
    }
}
