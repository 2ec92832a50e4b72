//! Network layers with an inner/outer parameter split.
//!
//! Every layer factors into symmetry parameters (the sharing pattern, meta
//! learned across tasks) and filter parameters (adapted within a task).
//! Plain baselines carry ordinary weights. Layers are stateless at forward
//! time: the caller passes the parameter tensors (graph leaves or adapted
//! values) in the order given by `param_specs`.

mod conv;
mod dense;
mod lc;
mod score;

pub use conv::{Conv2dConfig, Padding, PlainConv2d, ReparamConv2d};
pub use dense::{BiasMode, KroneckerDense, PlainDense, ReparamDense};
pub use lc::{lc_forward, LocallyConnected1d, PlainConv1d};
pub use score::sharing_score;

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("{what} must be positive")]
    ZeroDimension { what: &'static str },
    #[error("factor shapes {factors:?} cannot produce a {target:?} filter bank")]
    BankShapeMismatch { factors: Vec<usize>, target: Vec<usize> },
    #[error("same padding requires an odd filter side, got {side}")]
    EvenFilterForSamePadding { side: usize },
    #[error("locally connected layer needs input length {needed} for {outputs} outputs of width {width}, got {got}")]
    WindowMismatch { needed: usize, outputs: usize, width: usize, got: usize },
}

/// How a parameter participates in the two training loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    /// Per-task filter values; adapted in the inner loop.
    Filter,
    /// Sharing-pattern factors; meta-learned in the outer loop only
    /// (also inner-adapted in the joint ablation).
    Symmetry,
    /// Ordinary weights of baseline layers; behave like filters at
    /// adaptation time.
    Plain,
}

#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub name: String,
    pub role: ParamRole,
    pub shape: Vec<usize>,
}

#[derive(Clone)]
pub enum Layer {
    DenseFull(ReparamDense),
    DenseKron(KroneckerDense),
    DensePlain(PlainDense),
    Conv(ReparamConv2d),
    ConvPlain(PlainConv2d),
    Conv1dPlain(PlainConv1d),
    LcPlain(LocallyConnected1d),
}

impl Layer {
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        match self {
            Layer::DenseFull(l) => l.param_specs(),
            Layer::DenseKron(l) => l.param_specs(),
            Layer::DensePlain(l) => l.param_specs(),
            Layer::Conv(l) => l.param_specs(),
            Layer::ConvPlain(l) => l.param_specs(),
            Layer::Conv1dPlain(l) => l.param_specs(),
            Layer::LcPlain(l) => l.param_specs(),
        }
    }

    /// Currently stored parameter values, aligned with `param_specs`.
    pub fn params(&self) -> Vec<Tensor> {
        match self {
            Layer::DenseFull(l) => l.params(),
            Layer::DenseKron(l) => l.params(),
            Layer::DensePlain(l) => l.params(),
            Layer::Conv(l) => l.params(),
            Layer::ConvPlain(l) => l.params(),
            Layer::Conv1dPlain(l) => l.params(),
            Layer::LcPlain(l) => l.params(),
        }
    }

    pub fn set_params(&mut self, values: &[Tensor]) {
        match self {
            Layer::DenseFull(l) => l.set_params(values),
            Layer::DenseKron(l) => l.set_params(values),
            Layer::DensePlain(l) => l.set_params(values),
            Layer::Conv(l) => l.set_params(values),
            Layer::ConvPlain(l) => l.set_params(values),
            Layer::Conv1dPlain(l) => l.set_params(values),
            Layer::LcPlain(l) => l.set_params(values),
        }
    }

    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        match self {
            Layer::DenseFull(l) => l.forward(x, params),
            Layer::DenseKron(l) => l.forward(x, params),
            Layer::DensePlain(l) => l.forward(x, params),
            Layer::Conv(l) => l.forward(x, params),
            Layer::ConvPlain(l) => l.forward(x, params),
            Layer::Conv1dPlain(l) => l.forward(x, params),
            Layer::LcPlain(l) => l.forward(x, params),
        }
    }

    /// The effective dense weight matrix (or flattened filter bank) realized
    /// by the given parameters.
    pub fn materialize_weight(&self, params: &[Tensor]) -> Tensor {
        match self {
            Layer::DenseFull(l) => l.materialize_weight(params),
            Layer::DenseKron(l) => l.materialize_weight(params),
            Layer::DensePlain(l) => l.materialize_weight(params),
            Layer::Conv(l) => l.materialize_bank(params).0,
            Layer::ConvPlain(l) => l.bank_matrix(params),
            Layer::Conv1dPlain(l) => l.band_matrix(params),
            Layer::LcPlain(l) => l.band_matrix(params),
        }
    }

    /// Named symmetry factors for export, aligned with nothing in particular.
    pub fn symmetry_matrices(&self, params: &[Tensor]) -> Vec<(String, Tensor)> {
        let specs = self.param_specs();
        specs
            .iter()
            .zip(params)
            .filter(|(s, _)| s.role == ParamRole::Symmetry)
            .map(|(s, p)| (s.name.clone(), p.clone()))
            .collect()
    }
}
