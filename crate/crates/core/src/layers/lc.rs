//! 1-D locally connected layer: an untied filter per output location,
//! valid-mode sliding window, no bias.

use rand::Rng;

use super::{LayerError, ParamRole, ParamSpec};
use crate::tensor::plan::plan_band_embed;
use crate::tensor::Tensor;

/// `y[b, j] = sum_t f[j, t] * x[b, j + t]` via band embedding of the filters
/// into an `(out_len, in_len)` matrix.
pub fn lc_forward(x: &Tensor, filters: &Tensor) -> Tensor {
    assert_eq!(x.shape().len(), 2, "lc input must be (batch, n), got {:?}", x.shape());
    assert_eq!(filters.shape().len(), 2, "lc filters must be (out_len, width), got {:?}", filters.shape());
    let (out_len, width) = (filters.shape()[0], filters.shape()[1]);
    let n = x.shape()[1];
    assert_eq!(
        n,
        out_len + width - 1,
        "lc window mismatch: input length {n} vs {out_len} outputs of width {width}"
    );
    let band = filters.spread(&plan_band_embed(out_len, width, n));
    x.matmul(&band.transpose())
}

/// Per-location filters as a `(out_len, width)` matrix. Rank-`k` instances
/// are built as `F = C . B` from `k` basis filters and per-location mixing
/// coefficients; with a constant mixing row this is exactly a standard
/// convolution.
#[derive(Clone)]
pub struct LocallyConnected1d {
    in_dim: usize,
    out_dim: usize,
    width: usize,
    f: Tensor,
}

impl LocallyConnected1d {
    pub fn new(in_dim: usize, width: usize, rng: &mut impl Rng) -> Result<Self, LayerError> {
        if in_dim < width {
            return Err(LayerError::WindowMismatch { needed: width, outputs: 1, width, got: in_dim });
        }
        let out_dim = in_dim - width + 1;
        let f = Tensor::randn(&[out_dim, width], (1.0 / width as f64).sqrt(), rng);
        Ok(LocallyConnected1d { in_dim, out_dim, width, f })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        vec![ParamSpec { name: "F".into(), role: ParamRole::Plain, shape: self.f.shape().to_vec() }]
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.f.clone()]
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        self.f = values[0].detach();
    }

    /// Filters embedded as the banded `(out_len, in_len)` matrix.
    pub fn band_matrix(&self, params: &[Tensor]) -> Tensor {
        params[0].spread(&plan_band_embed(self.out_dim, self.width, self.in_dim))
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        lc_forward(x, &params[0])
    }
}

/// Tied-filter 1-D convolution baseline: one shared width-`w` filter slid
/// over the input in valid mode, no bias. Equivalent to a locally connected
/// layer whose rows are all equal.
#[derive(Clone)]
pub struct PlainConv1d {
    in_dim: usize,
    out_dim: usize,
    width: usize,
    w: Tensor,
}

impl PlainConv1d {
    pub fn new(in_dim: usize, width: usize, rng: &mut impl Rng) -> Result<Self, LayerError> {
        if in_dim < width {
            return Err(LayerError::WindowMismatch { needed: width, outputs: 1, width, got: in_dim });
        }
        let out_dim = in_dim - width + 1;
        let w = Tensor::randn(&[1, width], (1.0 / width as f64).sqrt(), rng);
        Ok(PlainConv1d { in_dim, out_dim, width, w })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        vec![ParamSpec { name: "w".into(), role: ParamRole::Plain, shape: self.w.shape().to_vec() }]
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.w.clone()]
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        self.w = values[0].detach();
    }

    /// The tied filter embedded as the banded `(out_len, in_len)` matrix.
    pub fn band_matrix(&self, params: &[Tensor]) -> Tensor {
        let tied = Tensor::ones(&[self.out_dim, 1]).matmul(&params[0]);
        tied.spread(&plan_band_embed(self.out_dim, self.width, self.in_dim))
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let tied = Tensor::ones(&[self.out_dim, 1]).matmul(&params[0]);
        lc_forward(x, &tied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::tensor::{finite_diff_check, mse};

    #[test]
    fn tied_conv_matches_sliding_dot_product() {
        let mut rng = seeded_rng(9);
        let mut layer = PlainConv1d::new(5, 3, &mut rng).unwrap();
        let w = Tensor::from_vec(&[1, 3], vec![1.0, -1.0, 2.0]);
        layer.set_params(&[w.clone()]);
        let x = Tensor::from_vec(&[1, 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = layer.forward(&x, &layer.params());
        assert_eq!(y.data(), &[1.0 - 2.0 + 6.0, 2.0 - 3.0 + 8.0, 3.0 - 4.0 + 10.0]);
    }

    #[test]
    fn tied_conv_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(10);
        let layer = PlainConv1d::new(6, 3, &mut rng).unwrap();
        let x = Tensor::randn(&[4, 6], 1.0, &mut rng);
        let target = Tensor::randn(&[4, 4], 1.0, &mut rng);
        let w0 = layer.params()[0].reshape(&[3]);
        let report = finite_diff_check(
            move |w| mse(&layer.forward(&x, &[w.reshape(&[1, 3])]), &target),
            &w0,
            1e-5,
            1e-5,
        )
        .unwrap();
        assert!(report.passed(), "rel err {}", report.max_rel_err);
    }

    #[test]
    fn equal_rows_reduce_to_valid_convolution() {
        let f = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let x = Tensor::from_vec(&[1, 4], vec![1.0, 1.0, 1.0, 1.0]);
        let y = lc_forward(&x, &f);
        assert_eq!(y.data(), &[6.0, 6.0]);
    }

    #[test]
    fn hand_expanded_sliding_sum() {
        // n=4, w=3, L=2, F=[[1,0,0],[0,0,1]], x=[a,b,c,d] -> [a, d]
        let f = Tensor::from_vec(&[2, 3], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let x = Tensor::from_vec(&[1, 4], vec![10.0, 20.0, 30.0, 40.0]);
        let y = lc_forward(&x, &f);
        assert_eq!(y.data(), &[10.0, 40.0]);
    }

    #[test]
    fn rank_one_constant_mixing_commutes_with_interior_shift() {
        let mut rng = seeded_rng(1);
        // F = 1 . b^T: every row the same random filter.
        let b = Tensor::randn(&[1, 3], 1.0, &mut rng);
        let ones = Tensor::ones(&[6, 1]);
        let f = ones.matmul(&b);
        let x = Tensor::randn(&[1, 8], 1.0, &mut rng);
        // Shift input one step right; interior outputs shift accordingly.
        let mut shifted = vec![0.0; 8];
        shifted[1..].copy_from_slice(&x.data()[..7]);
        let xs = Tensor::from_vec(&[1, 8], shifted);
        let y = lc_forward(&x, &f);
        let ys = lc_forward(&xs, &f);
        for j in 1..6 {
            assert!((ys.data()[j] - y.data()[j - 1]).abs() < 1e-12, "location {j}");
        }
    }

    #[test]
    fn window_mismatch_is_an_error() {
        let mut rng = seeded_rng(2);
        assert!(LocallyConnected1d::new(2, 3, &mut rng).is_err());
    }

    #[test]
    fn lc_gradients_match_finite_differences() {
        let mut rng = seeded_rng(3);
        let x = Tensor::randn(&[4, 6], 1.0, &mut rng);
        let target = Tensor::randn(&[4, 4], 1.0, &mut rng);
        let f0 = Tensor::randn(&[12], 1.0, &mut rng);
        let report = finite_diff_check(
            move |f| mse(&lc_forward(&x, &f.reshape(&[4, 3])), &target),
            &f0,
            1e-5,
            1e-5,
        )
        .unwrap();
        assert!(report.passed(), "rel err {}", report.max_rel_err);
    }
}
