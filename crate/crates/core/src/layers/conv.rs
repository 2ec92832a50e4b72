//! 2-D convolution layers: mode-factored reparameterization and the plain
//! baseline. Cross-correlation is computed as im2col patch extraction (a
//! spread plan) followed by one matrix multiply, so gradients of any order
//! come from the tensor engine.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::Rng;

use super::{LayerError, ParamRole, ParamSpec};
use crate::tensor::plan::{plan_broadcast_channels, plan_im2col, plan_positions_to_nchw, SpreadPlan};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding preserving the spatial size (odd filters, stride 1 gives
    /// exact preservation).
    Same,
    /// No padding.
    Valid,
}

#[derive(Clone, Debug)]
pub struct Conv2dConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub filter_side: usize,
    pub stride: usize,
    pub padding: Padding,
    pub bias: bool,
}

impl Conv2dConfig {
    fn pad(&self) -> Result<usize, LayerError> {
        match self.padding {
            Padding::Valid => Ok(0),
            Padding::Same => {
                if self.filter_side % 2 == 0 {
                    Err(LayerError::EvenFilterForSamePadding { side: self.filter_side })
                } else {
                    Ok((self.filter_side - 1) / 2)
                }
            }
        }
    }

    pub fn out_spatial(&self, h: usize, w: usize) -> (usize, usize) {
        let pad = match self.padding {
            Padding::Valid => 0,
            Padding::Same => (self.filter_side - 1) / 2,
        };
        (
            (h + 2 * pad - self.filter_side) / self.stride + 1,
            (w + 2 * pad - self.filter_side) / self.stride + 1,
        )
    }
}

type PlanKey = (usize, usize, usize);

#[derive(Default)]
struct PlanCache {
    im2col: HashMap<PlanKey, Arc<SpreadPlan>>,
    to_nchw: HashMap<PlanKey, Arc<SpreadPlan>>,
    bias: HashMap<PlanKey, Arc<SpreadPlan>>,
}

/// Shared cross-correlation kernel: patches = im2col(x), y = patches . bank^T,
/// then a layout permutation back to `(batch, c_out, oh, ow)`.
fn correlate(
    x: &Tensor,
    bank: &Tensor,
    cfg: &Conv2dConfig,
    bias: Option<&Tensor>,
    cache: &Mutex<PlanCache>,
) -> Tensor {
    assert_eq!(x.shape().len(), 4, "conv input must be (batch, c, h, w), got {:?}", x.shape());
    let (batch, c_in, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    assert_eq!(c_in, cfg.in_channels, "conv expects {} input channels, got {c_in}", cfg.in_channels);
    let f = cfg.filter_side;
    let pad = cfg.pad().expect("padding validated at construction");
    let (oh, ow) = cfg.out_spatial(h, w);
    let key = (batch, h, w);

    let (im2col, to_nchw, bias_plan) = {
        let mut guard = cache.lock().unwrap();
        let im2col = guard
            .im2col
            .entry(key)
            .or_insert_with(|| plan_im2col(batch, c_in, h, w, f, f, cfg.stride, pad))
            .clone();
        let to_nchw = guard
            .to_nchw
            .entry(key)
            .or_insert_with(|| plan_positions_to_nchw(batch, oh, ow, cfg.out_channels))
            .clone();
        let bias_plan = if bias.is_some() {
            Some(
                guard
                    .bias
                    .entry(key)
                    .or_insert_with(|| plan_broadcast_channels(batch, cfg.out_channels, oh, ow))
                    .clone(),
            )
        } else {
            None
        };
        (im2col, to_nchw, bias_plan)
    };

    let patches = x.spread(&im2col);
    let bank_mat = bank.reshape(&[cfg.out_channels, c_in * f * f]);
    let y = patches.matmul(&bank_mat.transpose()).spread(&to_nchw);
    match (bias, bias_plan) {
        (Some(b), Some(plan)) => y.add(&b.spread(&plan)),
        _ => y,
    }
}

/// Convolution whose filter bank is materialized from a rank-3 filter tensor
/// `V` contracted with three mode factors, then reshaped into
/// `(c_out, c_in, f, f)`. Square factors initialized to the identity make the
/// layer start as a plain convolution with filters `V`.
#[derive(Clone)]
pub struct ReparamConv2d {
    cfg: Conv2dConfig,
    v_dims: [usize; 3],
    u1: Tensor,
    u2: Tensor,
    u3: Tensor,
    v: Tensor,
    bias: Option<Tensor>,
    frozen_symmetry: bool,
    cache: Arc<Mutex<PlanCache>>,
}

impl ReparamConv2d {
    pub fn new(cfg: Conv2dConfig, rng: &mut impl Rng) -> Result<Self, LayerError> {
        cfg.pad()?;
        let (p, q, s) = (cfg.out_channels, cfg.in_channels, cfg.filter_side * cfg.filter_side);
        if p == 0 || q == 0 || s == 0 {
            return Err(LayerError::ZeroDimension { what: "conv dimensions" });
        }
        let fan_in = q * s;
        let v = Tensor::randn(&[p, q, s], (1.0 / fan_in as f64).sqrt(), rng);
        let bias = cfg.bias.then(|| Tensor::zeros(&[cfg.out_channels]));
        Ok(ReparamConv2d {
            cfg,
            v_dims: [p, q, s],
            u1: Tensor::eye(p),
            u2: Tensor::eye(q),
            u3: Tensor::eye(s),
            v,
            bias,
            frozen_symmetry: false,
            cache: Arc::default(),
        })
    }

    /// Pins the mode factors to given matrices and hides them from training.
    /// The contracted tensor must still reshape into the layer's filter bank;
    /// stacking a group's filter-grid representation into `u3` with a
    /// one-channel `V` yields a bank of transformed copies of one base
    /// filter.
    pub fn with_fixed_factors(
        cfg: Conv2dConfig,
        u1: Tensor,
        u2: Tensor,
        u3: Tensor,
        v: Tensor,
    ) -> Result<Self, LayerError> {
        cfg.pad()?;
        assert_eq!(v.shape().len(), 3, "filter tensor must be rank 3, got {:?}", v.shape());
        let v_dims = [v.shape()[0], v.shape()[1], v.shape()[2]];
        let produced = u1.shape()[0] * u2.shape()[0] * u3.shape()[0];
        let target = cfg.out_channels * cfg.in_channels * cfg.filter_side * cfg.filter_side;
        if produced != target
            || u1.shape()[1] != v_dims[0]
            || u2.shape()[1] != v_dims[1]
            || u3.shape()[1] != v_dims[2]
        {
            return Err(LayerError::BankShapeMismatch {
                factors: vec![u1.shape()[0], u2.shape()[0], u3.shape()[0]],
                target: vec![cfg.out_channels, cfg.in_channels, cfg.filter_side, cfg.filter_side],
            });
        }
        let bias = cfg.bias.then(|| Tensor::zeros(&[cfg.out_channels]));
        Ok(ReparamConv2d {
            cfg,
            v_dims,
            u1,
            u2,
            u3,
            v,
            bias,
            frozen_symmetry: true,
            cache: Arc::default(),
        })
    }

    pub fn config(&self) -> &Conv2dConfig {
        &self.cfg
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        if !self.frozen_symmetry {
            specs.push(ParamSpec { name: "U1".into(), role: ParamRole::Symmetry, shape: self.u1.shape().to_vec() });
            specs.push(ParamSpec { name: "U2".into(), role: ParamRole::Symmetry, shape: self.u2.shape().to_vec() });
            specs.push(ParamSpec { name: "U3".into(), role: ParamRole::Symmetry, shape: self.u3.shape().to_vec() });
        }
        specs.push(ParamSpec { name: "V".into(), role: ParamRole::Filter, shape: self.v.shape().to_vec() });
        if let Some(b) = &self.bias {
            specs.push(ParamSpec { name: "bias".into(), role: ParamRole::Filter, shape: b.shape().to_vec() });
        }
        specs
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        if !self.frozen_symmetry {
            out.extend([self.u1.clone(), self.u2.clone(), self.u3.clone()]);
        }
        out.push(self.v.clone());
        if let Some(b) = &self.bias {
            out.push(b.clone());
        }
        out
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        let mut it = values.iter();
        if !self.frozen_symmetry {
            self.u1 = it.next().unwrap().detach();
            self.u2 = it.next().unwrap().detach();
            self.u3 = it.next().unwrap().detach();
        }
        self.v = it.next().unwrap().detach();
        if self.bias.is_some() {
            self.bias = Some(it.next().unwrap().detach());
        }
    }

    /// Filter bank as a `(c_out, c_in * f * f)` matrix plus the optional bias.
    pub fn materialize_bank<'a>(&self, params: &'a [Tensor]) -> (Tensor, Option<&'a Tensor>) {
        let (u1, u2, u3, v, bias) = if self.frozen_symmetry {
            (&self.u1, &self.u2, &self.u3, &params[0], params.get(1))
        } else {
            (&params[0], &params[1], &params[2], &params[3], params.get(4))
        };
        let _ = self.v_dims;
        let tilde = v.mode_n_product(u1, 0).mode_n_product(u2, 1).mode_n_product(u3, 2);
        let f = self.cfg.filter_side;
        let bank = tilde.reshape(&[self.cfg.out_channels, self.cfg.in_channels * f * f]);
        (bank, bias)
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let (bank, bias) = self.materialize_bank(params);
        correlate(x, &bank, &self.cfg, bias, &self.cache)
    }
}

/// Plain convolution baseline: the whole filter bank is a per-task parameter.
#[derive(Clone)]
pub struct PlainConv2d {
    cfg: Conv2dConfig,
    bank: Tensor,
    bias: Option<Tensor>,
    cache: Arc<Mutex<PlanCache>>,
}

impl PlainConv2d {
    pub fn new(cfg: Conv2dConfig, rng: &mut impl Rng) -> Result<Self, LayerError> {
        cfg.pad()?;
        let fan_in = cfg.in_channels * cfg.filter_side * cfg.filter_side;
        let bank = Tensor::randn(
            &[cfg.out_channels, cfg.in_channels, cfg.filter_side, cfg.filter_side],
            (1.0 / fan_in as f64).sqrt(),
            rng,
        );
        let bias = cfg.bias.then(|| Tensor::zeros(&[cfg.out_channels]));
        Ok(PlainConv2d { cfg, bank, bias, cache: Arc::default() })
    }

    pub fn config(&self) -> &Conv2dConfig {
        &self.cfg
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut specs =
            vec![ParamSpec { name: "W".into(), role: ParamRole::Plain, shape: self.bank.shape().to_vec() }];
        if let Some(b) = &self.bias {
            specs.push(ParamSpec { name: "bias".into(), role: ParamRole::Plain, shape: b.shape().to_vec() });
        }
        specs
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut out = vec![self.bank.clone()];
        if let Some(b) = &self.bias {
            out.push(b.clone());
        }
        out
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        self.bank = values[0].detach();
        if self.bias.is_some() {
            self.bias = Some(values[1].detach());
        }
    }

    pub fn bank_matrix(&self, params: &[Tensor]) -> Tensor {
        let f = self.cfg.filter_side;
        params[0].reshape(&[self.cfg.out_channels, self.cfg.in_channels * f * f])
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let bank = self.bank_matrix(params);
        correlate(x, &bank, &self.cfg, params.get(1), &self.cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::tensor::{finite_diff_check, mse, Tensor};

    fn cfg(c_in: usize, c_out: usize, f: usize) -> Conv2dConfig {
        Conv2dConfig {
            in_channels: c_in,
            out_channels: c_out,
            filter_side: f,
            stride: 1,
            padding: Padding::Same,
            bias: false,
        }
    }

    /// Direct quadruple-loop cross-correlation oracle.
    fn conv_oracle(x: &Tensor, bank: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (b, ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (co, f) = (bank.shape()[0], bank.shape()[2]);
        let oh = (h + 2 * pad - f) / stride + 1;
        let ow = (w + 2 * pad - f) / stride + 1;
        let mut out = vec![0.0; b * co * oh * ow];
        for bi in 0..b {
            for c in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for q in 0..ci {
                            for dy in 0..f {
                                for dx in 0..f {
                                    let y = (oy * stride + dy) as isize - pad as isize;
                                    let xx = (ox * stride + dx) as isize - pad as isize;
                                    if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                        continue;
                                    }
                                    let xe = x.data()[((bi * ci + q) * h + y as usize) * w + xx as usize];
                                    let we = bank.data()[((c * ci + q) * f + dy) * f + dx];
                                    acc += xe * we;
                                }
                            }
                        }
                        out[((bi * co + c) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        Tensor::from_vec(&[b, co, oh, ow], out)
    }

    #[test]
    fn identity_factors_equal_plain_convolution() {
        let mut rng = seeded_rng(1);
        let layer = ReparamConv2d::new(cfg(2, 3, 3), &mut rng).unwrap();
        let x = Tensor::randn(&[2, 2, 5, 5], 1.0, &mut rng);
        let params = layer.params();
        let y = layer.forward(&x, &params);
        let bank = params[3].reshape(&[3, 2, 3, 3]);
        let oracle = conv_oracle(&x, &bank, 1, 1);
        for (a, b) in y.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn valid_padding_and_stride_match_oracle() {
        let mut rng = seeded_rng(2);
        let c = Conv2dConfig {
            in_channels: 1,
            out_channels: 2,
            filter_side: 3,
            stride: 2,
            padding: Padding::Valid,
            bias: false,
        };
        let layer = PlainConv2d::new(c, &mut rng).unwrap();
        let x = Tensor::randn(&[1, 1, 7, 7], 1.0, &mut rng);
        let y = layer.forward(&x, &layer.params());
        assert_eq!(y.shape(), &[1, 2, 3, 3]);
        let oracle = conv_oracle(&x, &layer.params()[0], 2, 0);
        for (a, b) in y.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_stack_in_u3_makes_rotated_filter_copies() {
        use crate::groups::{build_symmetry_matrix, rotation_representation_2d, Interpolation};
        use crate::groups::FiniteGroup;

        let c4 = FiniteGroup::cyclic(4).unwrap();
        let rep = rotation_representation_2d(&c4, 3, Interpolation::Exact90).unwrap();
        let stack = build_symmetry_matrix(&rep);
        let mut rng = seeded_rng(3);
        let base = Tensor::randn(&[1, 1, 9], 1.0, &mut rng);

        let layer = ReparamConv2d::with_fixed_factors(
            cfg(1, 4, 3),
            Tensor::eye(1),
            Tensor::eye(1),
            stack.matrix().clone(),
            base.clone(),
        )
        .unwrap();
        let x = Tensor::randn(&[1, 1, 9, 9], 1.0, &mut rng);
        let y = layer.forward(&x, &layer.params());

        // Channel c must equal a plain convolution with the rotated filter.
        for g in 0..4 {
            let rotated = rep.matrix(g).matmul(&base.reshape(&[9, 1])).reshape(&[1, 1, 3, 3]);
            let expect = conv_oracle(&x, &rotated, 1, 1);
            for p in 0..81 {
                let got = y.data()[g * 81 + p];
                let want = expect.data()[p];
                assert!((got - want).abs() < 1e-12, "channel {g} pixel {p}");
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences_for_every_factor() {
        let mut rng = seeded_rng(4);
        let layer = ReparamConv2d::new(cfg(1, 2, 3), &mut rng).unwrap();
        let x = Tensor::randn(&[2, 1, 4, 4], 1.0, &mut rng);
        let target = Tensor::randn(&[2, 2, 4, 4], 1.0, &mut rng);
        let base = layer.params();
        for slot in 0..4 {
            let layer = layer.clone();
            let (x, target, base) = (x.clone(), target.clone(), base.clone());
            let flat = base[slot].reshape(&[base[slot].numel()]);
            let shape = base[slot].shape().to_vec();
            let report = finite_diff_check(
                move |p| {
                    let mut params = base.clone();
                    params[slot] = p.reshape(&shape);
                    mse(&layer.forward(&x, &params), &target)
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
    fn even_filter_with_same_padding_is_rejected() {
        let mut rng = seeded_rng(5);
        let bad = Conv2dConfig {
            in_channels: 1,
            out_channels: 1,
            filter_side: 2,
            stride: 1,
            padding: Padding::Same,
            bias: false,
        };
        assert!(matches!(
            PlainConv2d::new(bad, &mut rng),
            Err(LayerError::EvenFilterForSamePadding { side: 2 })
        ));
    }

    #[test]
    fn bias_adds_per_channel_constant() {
        let mut rng = seeded_rng(6);
        let mut c = cfg(1, 2, 1);
        c.bias = true;
        let mut layer = PlainConv2d::new(c, &mut rng).unwrap();
        let mut params = layer.params();
        params[0] = Tensor::zeros(&[2, 1, 1, 1]);
        params[1] = Tensor::from_vec(&[2], vec![1.5, -2.5]);
        layer.set_params(&params);
        let x = Tensor::zeros(&[1, 1, 2, 2]);
        let y = layer.forward(&x, &params);
        assert_eq!(&y.data()[..4], &[1.5; 4]);
        assert_eq!(&y.data()[4..], &[-2.5; 4]);
    }
}
