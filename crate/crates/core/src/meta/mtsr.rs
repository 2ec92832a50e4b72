//! Multi-task ablation: one shared set of symmetry parameters and one filter
//! set per training task, jointly optimized by Adam on the full task batch.
//! At test time the shared parameters freeze and a fresh filter is fitted to
//! each task's support data.

use rayon::prelude::*;

use super::adapt::task_loss;
use super::eval::EvalSummary;
use super::{AdamState, MetaModel, TrainError};
use crate::layers::ParamRole;
use crate::rng::{derived_rng, streams};
use crate::tasks::{Targets, Task, TaskKind, TaskSource};
use crate::tensor::{argmax_rows, grad, Graph, Tensor};

#[derive(Clone, Debug)]
pub struct MtsrOptions {
    pub train_steps: usize,
    pub test_steps: usize,
    pub adam_lr: f64,
    pub master_seed: u64,
    pub parallel: bool,
}

impl Default for MtsrOptions {
    fn default() -> Self {
        MtsrOptions { train_steps: 500, test_steps: 500, adam_lr: 1e-3, master_seed: 0, parallel: true }
    }
}

fn fresh_filters(model: &MetaModel, seed_index: u64, master_seed: u64) -> Vec<Tensor> {
    let infos = model.param_infos();
    let mut rng = derived_rng(master_seed, streams::PARAMS, (1 << 32) + seed_index);
    model
        .param_values()
        .iter()
        .zip(&infos)
        .filter(|(_, i)| matches!(i.role, ParamRole::Filter | ParamRole::Plain))
        .map(|(p, _)| {
            let n: usize = p.shape().iter().product();
            Tensor::randn(p.shape(), (1.0 / (n as f64).sqrt()).min(1.0), &mut rng)
        })
        .collect()
}

/// Merges shared tensors and one task's filters into a full parameter list.
fn assemble(model: &MetaModel, shared: &[Tensor], filters: &[Tensor]) -> Vec<Tensor> {
    let infos = model.param_infos();
    let mut out = Vec::with_capacity(infos.len());
    let (mut si, mut fi) = (0, 0);
    for info in &infos {
        if matches!(info.role, ParamRole::Filter | ParamRole::Plain) {
            out.push(filters[fi].clone());
            fi += 1;
        } else {
            out.push(shared[si].clone());
            si += 1;
        }
    }
    out
}

fn shared_values(model: &MetaModel) -> Vec<Tensor> {
    let infos = model.param_infos();
    model
        .param_values()
        .iter()
        .zip(&infos)
        .filter(|(_, i)| !matches!(i.role, ParamRole::Filter | ParamRole::Plain))
        .map(|(p, _)| p.clone())
        .collect()
}

fn write_back(model: &mut MetaModel, shared: &[Tensor]) {
    let infos = model.param_infos();
    let mut values = model.param_values();
    let mut si = 0;
    for (i, info) in infos.iter().enumerate() {
        if !matches!(info.role, ParamRole::Filter | ParamRole::Plain) {
            values[i] = shared[si].clone();
            si += 1;
        }
    }
    model.set_param_values(&values);
}

/// Joint optimization of shared symmetry parameters and per-task filters on
/// the mean loss over all training tasks (each task contributes its full
/// example set). Returns the final per-task filters. Logs a warning if the
/// training loss fails to improve for 50 consecutive steps.
pub fn train_mtsr(
    model: &mut MetaModel,
    train: &dyn TaskSource,
    opts: &MtsrOptions,
) -> Result<Vec<Vec<Tensor>>, TrainError> {
    if train.is_empty() {
        return Err(TrainError::NoTasks);
    }
    let tasks: Vec<Task> = (0..train.len()).map(|i| train.task(i)).collect();
    let mut shared = shared_values(model);
    let mut filters: Vec<Vec<Tensor>> =
        (0..tasks.len()).map(|i| fresh_filters(model, i as u64, opts.master_seed)).collect();

    let mut sizes: Vec<usize> = shared.iter().map(|t| t.numel()).collect();
    for f in &filters {
        sizes.extend(f.iter().map(|t| t.numel()));
    }
    let mut adam = AdamState::new(opts.adam_lr, &sizes);

    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    for step in 0..opts.train_steps {
        let graph = Graph::new();
        let shared_leaves: Vec<Tensor> = shared.iter().map(|t| t.leaf(&graph)).collect();
        let filter_leaves: Vec<Vec<Tensor>> =
            filters.iter().map(|f| f.iter().map(|t| t.leaf(&graph)).collect()).collect();

        let mut total: Option<Tensor> = None;
        for (task, f) in tasks.iter().zip(&filter_leaves) {
            let params = assemble(model, &shared_leaves, f);
            // Full example set: support and query together.
            let loss_s = task_loss(task.kind, &model.forward(&task.support_x, &params), &task.support_y);
            let loss_q = task_loss(task.kind, &model.forward(&task.query_x, &params), &task.query_y);
            let n_s = task.support_x.shape()[0] as f64;
            let n_q = task.query_x.shape()[0] as f64;
            let combined = loss_s.scale(n_s / (n_s + n_q)).add(&loss_q.scale(n_q / (n_s + n_q)));
            total = Some(match total {
                None => combined,
                Some(acc) => acc.add(&combined),
            });
        }
        let loss = total.expect("non-empty task set").scale(1.0 / tasks.len() as f64);
        let loss_value = loss.item();
        if !loss_value.is_finite() {
            return Err(TrainError::NonFiniteLoss { step, task_id: u64::MAX });
        }
        if loss_value < best {
            best = loss_value;
            stale = 0;
        } else {
            stale += 1;
            if stale >= 50 {
                log::warn!("multi-task loss has not improved for {stale} steps (now {loss_value:.6})");
                stale = 0;
            }
        }

        let mut leaves: Vec<&Tensor> = shared_leaves.iter().collect();
        for f in &filter_leaves {
            leaves.extend(f.iter());
        }
        let grads = grad(&loss, &leaves, false)?;

        let mut flat: Vec<Tensor> = shared.clone();
        for f in &filters {
            flat.extend(f.iter().cloned());
        }
        let updated = adam.update(&flat, &grads);
        let mut it = updated.into_iter();
        for s in shared.iter_mut() {
            *s = it.next().unwrap();
        }
        for f in filters.iter_mut() {
            for t in f.iter_mut() {
                *t = it.next().unwrap();
            }
        }
    }
    write_back(model, &shared);
    Ok(filters)
}

fn fit_fresh_filters(
    model: &MetaModel,
    task: &Task,
    steps: usize,
    adam_lr: f64,
    master_seed: u64,
) -> Result<f64, TrainError> {
    let shared = shared_values(model);
    let mut filters = fresh_filters(model, (1 << 33) + task.id, master_seed);
    let mut adam = AdamState::new(adam_lr, &filters.iter().map(|t| t.numel()).collect::<Vec<_>>());
    for step in 0..steps {
        let graph = Graph::new();
        let filter_leaves: Vec<Tensor> = filters.iter().map(|t| t.leaf(&graph)).collect();
        let params = assemble(model, &shared, &filter_leaves);
        let loss = task_loss(task.kind, &model.forward(&task.support_x, &params), &task.support_y);
        if !loss.item().is_finite() {
            return Err(TrainError::NonFiniteLoss { step, task_id: task.id });
        }
        let grads = grad(&loss, &filter_leaves.iter().collect::<Vec<_>>(), false)?;
        filters = adam.update(&filters, &grads);
    }
    let params = assemble(model, &shared, &filters);
    let pred = model.forward(&task.query_x, &params);
    Ok(match (&task.kind, &task.query_y) {
        (TaskKind::Regression, targets) => task_loss(task.kind, &pred, targets).item(),
        (TaskKind::Classification, Targets::Labels(labels)) => {
            let hits = argmax_rows(&pred).iter().zip(labels.iter()).filter(|(a, b)| a == b).count();
            hits as f64 / labels.len() as f64
        }
        (TaskKind::Classification, Targets::Values(_)) => panic!("classification task carries value targets"),
    })
}

/// Test-time protocol: freeze the shared parameters, optimize a newly
/// initialized filter on each test task's support data, report query metrics.
pub fn mtsr_test(
    model: &MetaModel,
    tasks: &dyn TaskSource,
    opts: &MtsrOptions,
    limit: usize,
) -> Result<EvalSummary, TrainError> {
    if tasks.is_empty() {
        return Err(TrainError::NoTasks);
    }
    let count = if limit == 0 { tasks.len() } else { limit.min(tasks.len()) };
    let metric = match tasks.task(0).kind {
        TaskKind::Regression => "mse",
        TaskKind::Classification => "accuracy",
    };
    let per_task: Result<Vec<f64>, TrainError> = if opts.parallel {
        (0..count)
            .into_par_iter()
            .map(|i| fit_fresh_filters(model, &tasks.task(i), opts.test_steps, opts.adam_lr, opts.master_seed))
            .collect()
    } else {
        (0..count)
            .map(|i| fit_fresh_filters(model, &tasks.task(i), opts.test_steps, opts.adam_lr, opts.master_seed))
            .collect()
    };
    let per_task = per_task?;
    let n = per_task.len() as f64;
    let mean = per_task.iter().sum::<f64>() / n;
    let ci95 = if per_task.len() > 1 {
        let var = per_task.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    } else {
        0.0
    };
    Ok(EvalSummary { metric, per_task, mean, ci95 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{BiasMode, Layer, ReparamDense};
    use crate::meta::{ModelLayer, TrainMode};
    use crate::rng::derived_rng;
    use crate::tasks::{gen_lc_tasks, LcTaskSpec};

    fn mtsr_fc(in_dim: usize, out_dim: usize) -> MetaModel {
        let mut rng = derived_rng(0, crate::rng::streams::PARAMS, 0);
        let l = ReparamDense::new(in_dim, out_dim, BiasMode::None, None, &mut rng);
        MetaModel::new(vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }], TrainMode::Mtsr, true, 0.02)
    }

    #[test]
    fn single_task_identity_symmetry_is_ordinary_regression() {
        // With U frozen at identity the shared parameters vanish and the
        // problem reduces to fitting one weight vector to one task.
        let mut rng = derived_rng(0, crate::rng::streams::PARAMS, 0);
        let l = ReparamDense::new_frozen_identity(6, 4, BiasMode::None, &mut rng);
        let mut model = MetaModel::new(
            vec![ModelLayer { layer: Layer::DenseFull(l), relu: false }],
            TrainMode::Mtsr,
            true,
            0.02,
        );
        let spec = LcTaskSpec { input_dim: 6, train_tasks: 1, test_tasks: 1, examples_per_train_task: 16, ..Default::default() };
        let (train, _) = gen_lc_tasks(&spec).unwrap();
        let opts = MtsrOptions { train_steps: 300, adam_lr: 0.02, ..Default::default() };
        let filters = train_mtsr(&mut model, &train, &opts).unwrap();
        // The fitted filter solves the task on its own data.
        let task = train.task(0);
        let params = assemble(&model, &shared_values(&model), &filters[0]);
        let loss = task_loss(task.kind, &model.forward(&task.support_x, &params), &task.support_y).item();
        assert!(loss < 1e-2, "residual {loss}");
    }

    #[test]
    fn training_loss_decreases_on_small_family() {
        let spec = LcTaskSpec {
            input_dim: 8,
            train_tasks: 12,
            test_tasks: 4,
            examples_per_train_task: 10,
            ..Default::default()
        };
        let (train, test) = gen_lc_tasks(&spec).unwrap();
        let mut model = mtsr_fc(8, 6);
        let opts = MtsrOptions { train_steps: 150, test_steps: 150, adam_lr: 5e-3, ..Default::default() };
        train_mtsr(&mut model, &train, &opts).unwrap();
        let summary = mtsr_test(&model, &test, &opts, 0).unwrap();
        assert_eq!(summary.metric, "mse");
        assert_eq!(summary.per_task.len(), 4);
        assert!(summary.mean.is_finite());
    }
}
