//! Model container: an ordered stack of layers, the training mode, and one
//! meta-learned inner learning rate per (layer, parameter-role) pair.

use crate::layers::{Layer, ParamRole};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// Inner loop adapts filters only; sharing patterns are outer-only.
    Msr,
    /// Inner loop adapts plain weights and filters; no sharing patterns are
    /// trained (any present stay frozen).
    Maml,
    /// Ablation: sharing patterns are adapted in the inner loop as well.
    MsrJoint,
    /// Ablation: multi-task joint optimization instead of meta-learning.
    Mtsr,
}

#[derive(Clone)]
pub struct ModelLayer {
    pub layer: Layer,
    /// Apply a pointwise nonlinearity after this layer.
    pub relu: bool,
}

#[derive(Clone, Debug)]
pub struct ParamInfo {
    pub layer: usize,
    pub slot: usize,
    pub name: String,
    pub role: ParamRole,
}

#[derive(Clone)]
pub struct MetaModel {
    pub layers: Vec<ModelLayer>,
    pub mode: TrainMode,
    /// Meta-learn the inner-parameter initialization (always effectively on
    /// in plain-baseline mode, where the initialization is all there is).
    pub meta_init: bool,
    /// Learned inner rates, one per (layer, role) pair present in the model,
    /// in layer-major order. Unconstrained scalars; they may go negative.
    pub inner_lrs: Vec<f64>,
    lr_keys: Vec<(usize, ParamRole)>,
}

impl MetaModel {
    pub fn new(layers: Vec<ModelLayer>, mode: TrainMode, meta_init: bool, inner_lr_init: f64) -> Self {
        let mut lr_keys = Vec::new();
        for (li, ml) in layers.iter().enumerate() {
            for spec in ml.layer.param_specs() {
                if !lr_keys.contains(&(li, spec.role)) {
                    lr_keys.push((li, spec.role));
                }
            }
        }
        let inner_lrs = vec![inner_lr_init; lr_keys.len()];
        MetaModel { layers, mode, meta_init, inner_lrs, lr_keys }
    }

    pub fn param_infos(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        for (li, ml) in self.layers.iter().enumerate() {
            for (slot, spec) in ml.layer.param_specs().into_iter().enumerate() {
                out.push(ParamInfo { layer: li, slot, name: spec.name, role: spec.role });
            }
        }
        out
    }

    pub fn param_values(&self) -> Vec<Tensor> {
        self.layers.iter().flat_map(|ml| ml.layer.params()).collect()
    }

    pub fn set_param_values(&mut self, values: &[Tensor]) {
        let mut offset = 0;
        for ml in &mut self.layers {
            let count = ml.layer.param_specs().len();
            ml.layer.set_params(&values[offset..offset + count]);
            offset += count;
        }
        assert_eq!(offset, values.len(), "parameter count mismatch");
    }

    /// Whether a parameter is adapted within a task.
    pub fn is_inner(&self, role: ParamRole) -> bool {
        match self.mode {
            TrainMode::Msr => role == ParamRole::Filter,
            TrainMode::Maml => matches!(role, ParamRole::Filter | ParamRole::Plain),
            TrainMode::MsrJoint => matches!(role, ParamRole::Filter | ParamRole::Symmetry),
            // Multi-task training re-fits filters per task at test time.
            TrainMode::Mtsr => matches!(role, ParamRole::Filter | ParamRole::Plain),
        }
    }

    /// Whether a parameter receives outer (meta) updates.
    pub fn is_outer(&self, role: ParamRole) -> bool {
        match role {
            ParamRole::Symmetry => !matches!(self.mode, TrainMode::Maml),
            ParamRole::Filter | ParamRole::Plain => {
                self.meta_init || matches!(self.mode, TrainMode::Maml)
            }
        }
    }

    /// Index into `inner_lrs` for a layer/role pair.
    pub fn lr_index(&self, layer: usize, role: ParamRole) -> usize {
        self.lr_keys
            .iter()
            .position(|&(l, r)| l == layer && r == role)
            .expect("every layer/role pair has a learned rate")
    }

    pub fn lr_keys(&self) -> &[(usize, ParamRole)] {
        &self.lr_keys
    }

    /// Forward pass with explicit parameter tensors (aligned with
    /// `param_infos`). Rank-4 image inputs are flattened before dense layers.
    pub fn forward(&self, x: &Tensor, params: &[Tensor]) -> Tensor {
        let mut offset = 0;
        let mut h = x.clone();
        for ml in &self.layers {
            let count = ml.layer.param_specs().len();
            let slice = &params[offset..offset + count];
            offset += count;
            let needs_flat = matches!(ml.layer, Layer::DenseFull(_) | Layer::DenseKron(_) | Layer::DensePlain(_));
            if needs_flat && h.shape().len() == 4 {
                let n: usize = h.shape()[1..].iter().product();
                h = h.reshape(&[h.shape()[0], n]);
            }
            h = ml.layer.forward(&h, slice);
            if ml.relu {
                h = h.relu();
            }
        }
        h
    }

    /// Forward pass using the stored parameter values.
    pub fn forward_stored(&self, x: &Tensor) -> Tensor {
        self.forward(x, &self.param_values())
    }
}
