//! Inner-loop adaptation: plain SGD on the mode's inner parameters with the
//! model's learned per-layer rates. With `create_graph`, every update is
//! recorded so the outer loss can be differentiated through the whole
//! unrolled chain.

use super::{MetaModel, TrainError};
use crate::tasks::{Targets, TaskKind};
use crate::tensor::{grad, mse, softmax_cross_entropy, Tensor};

/// Supervised loss selected by task kind.
pub fn task_loss(kind: TaskKind, pred: &Tensor, targets: &Targets) -> Tensor {
    match kind {
        TaskKind::Regression => mse(pred, targets.values()),
        TaskKind::Classification => softmax_cross_entropy(pred, targets.labels()),
    }
}

/// Applies `steps` SGD updates to the inner parameters and returns the full
/// parameter list with adapted values in place. `lr_tensors` are scalar
/// tensors aligned with `model.inner_lrs`; passing them as graph leaves
/// makes the rates meta-learnable.
#[allow(clippy::too_many_arguments)]
pub fn adapt_params(
    model: &MetaModel,
    mut params: Vec<Tensor>,
    lr_tensors: &[Tensor],
    kind: TaskKind,
    support_x: &Tensor,
    support_y: &Targets,
    steps: usize,
    create_graph: bool,
    task_id: u64,
) -> Result<Vec<Tensor>, TrainError> {
    let infos = model.param_infos();
    let inner: Vec<usize> =
        (0..infos.len()).filter(|&i| model.is_inner(infos[i].role)).collect();
    if inner.is_empty() {
        return Ok(params);
    }
    for step in 0..steps {
        let pred = model.forward(support_x, &params);
        let loss = task_loss(kind, &pred, support_y);
        if !loss.item().is_finite() {
            return Err(TrainError::NonFiniteLoss { step, task_id });
        }
        let leaves: Vec<&Tensor> = inner.iter().map(|&i| &params[i]).collect();
        let grads = grad(&loss, &leaves, create_graph)?;
        for (&i, g) in inner.iter().zip(grads) {
            let info = &infos[i];
            let lr = &lr_tensors[model.lr_index(info.layer, info.role)];
            let scaled = g.mul(&lr.expand_to(g.shape()));
            params[i] = params[i].sub(&scaled);
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{BiasMode, Layer, ParamRole, ReparamDense};
    use crate::meta::{ModelLayer, TrainMode};
    use crate::rng::seeded_rng;
    use crate::tensor::Graph;

    fn one_layer_msr(rng: &mut impl rand::Rng) -> MetaModel {
        let l = ReparamDense::new(3, 2, BiasMode::None, None, rng);
        MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Msr, true, 0.05)
    }

    fn leaves_on(graph: &Graph, model: &MetaModel) -> (Vec<Tensor>, Vec<Tensor>) {
        let params = model.param_values().iter().map(|p| p.leaf(graph)).collect();
        let lrs = model.inner_lrs.iter().map(|&v| Tensor::scalar(v).leaf(graph)).collect();
        (params, lrs)
    }

    #[test]
    fn zero_steps_is_identity_adaptation() {
        let mut rng = seeded_rng(1);
        let model = one_layer_msr(&mut rng);
        let graph = Graph::new();
        let (params, lrs) = leaves_on(&graph, &model);
        let x = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let y = Targets::Values(Tensor::randn(&[4, 2], 1.0, &mut rng));
        let adapted =
            adapt_params(&model, params.clone(), &lrs, TaskKind::Regression, &x, &y, 0, false, 0).unwrap();
        for (a, b) in adapted.iter().zip(&params) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn single_step_matches_closed_form_on_linear_model() {
        // One dense layer, MSE: v' = v - lr * U^T X_e^T 2 (X_e W^T... folded)
        // Verified numerically against the explicit chain rule.
        let mut rng = seeded_rng(2);
        let model = one_layer_msr(&mut rng);
        let graph = Graph::new();
        let (params, lrs) = leaves_on(&graph, &model);
        let x = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let target = Tensor::randn(&[4, 2], 1.0, &mut rng);
        let y = Targets::Values(target.clone());
        let adapted =
            adapt_params(&model, params.clone(), &lrs, TaskKind::Regression, &x, &y, 1, false, 0).unwrap();

        // Closed form: dL/dW = 2/(B*m) * (X W^T - T)^T X, dv = U^T vec(dW).
        let u = &params[0];
        let v = &params[1];
        let w = u.matmul(&v.reshape(&[3, 1])).reshape(&[2, 3]);
        let resid = x.matmul(&w.transpose()).sub(&target);
        let dw = resid.transpose().matmul(&x).scale(2.0 / 8.0);
        let dv = u.transpose().matmul(&dw.reshape(&[6, 1])).reshape(&[3]);
        let expect = v.sub(&dv.scale(model.inner_lrs[model.lr_index(0, ParamRole::Filter)]));
        for (a, b) in adapted[1].data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // U unchanged by the inner loop.
        assert_eq!(adapted[0].data(), params[0].data());
    }

    #[test]
    fn adaptation_reduces_support_loss() {
        let mut rng = seeded_rng(3);
        let model = one_layer_msr(&mut rng);
        let graph = Graph::new();
        let (params, lrs) = leaves_on(&graph, &model);
        let x = Tensor::randn(&[8, 3], 1.0, &mut rng);
        let y = Targets::Values(Tensor::randn(&[8, 2], 1.0, &mut rng));
        let before = task_loss(TaskKind::Regression, &model.forward(&x, &params), &y).item();
        let adapted = adapt_params(&model, params, &lrs, TaskKind::Regression, &x, &y, 5, false, 0).unwrap();
        let after = task_loss(TaskKind::Regression, &model.forward(&x, &adapted), &y).item();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn joint_mode_also_updates_symmetry_in_inner_loop() {
        let mut rng = seeded_rng(4);
        let l = ReparamDense::new(3, 2, BiasMode::None, None, &mut rng);
        let model = MetaModel::new(
            vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }],
            TrainMode::MsrJoint,
            true,
            0.05,
        );
        let graph = Graph::new();
        let params: Vec<Tensor> = model.param_values().iter().map(|p| p.leaf(&graph)).collect();
        let lrs: Vec<Tensor> = model.inner_lrs.iter().map(|&v| Tensor::scalar(v).leaf(&graph)).collect();
        let x = Tensor::randn(&[4, 3], 1.0, &mut rng);
        let y = Targets::Values(Tensor::randn(&[4, 2], 1.0, &mut rng));
        let adapted = adapt_params(&model, params.clone(), &lrs, TaskKind::Regression, &x, &y, 1, false, 0).unwrap();
        assert_ne!(adapted[0].data(), params[0].data(), "U should move in joint mode");
        assert_ne!(adapted[1].data(), params[1].data());
    }

    #[test]
    fn non_finite_loss_reports_step_and_task() {
        let mut rng = seeded_rng(5);
        let model = one_layer_msr(&mut rng);
        let graph = Graph::new();
        let (params, lrs) = leaves_on(&graph, &model);
        let x = Tensor::from_vec(&[1, 3], vec![f64::INFINITY, 0.0, 0.0]);
        let y = Targets::Values(Tensor::zeros(&[1, 2]));
        let err = adapt_params(&model, params, &lrs, TaskKind::Regression, &x, &y, 3, false, 42).unwrap_err();
        match err {
            TrainError::NonFiniteLoss { step, task_id } => {
                assert_eq!(step, 0);
                assert_eq!(task_id, 42);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
