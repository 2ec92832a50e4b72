//! Meta-test evaluation: adapt on each task's support set with frozen outer
//! parameters, score the query set, and report the mean with a 95%
//! normal-approximation confidence interval over tasks.

use rayon::prelude::*;

use super::adapt::{adapt_params, task_loss};
use super::{MetaModel, TrainError};
use crate::tasks::{Targets, Task, TaskKind, TaskSource};
use crate::tensor::{argmax_rows, Graph, Tensor};

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub metric: &'static str,
    pub per_task: Vec<f64>,
    pub mean: f64,
    /// Half-width of the 95% confidence interval: `1.96 * stderr`.
    pub ci95: f64,
}

impl EvalSummary {
    fn from_values(metric: &'static str, per_task: Vec<f64>) -> Self {
        let n = per_task.len() as f64;
        let mean = per_task.iter().sum::<f64>() / n;
        let ci95 = if per_task.len() > 1 {
            let var = per_task.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        EvalSummary { metric, per_task, mean, ci95 }
    }
}

/// Adapts the model on one task and returns the query metric: MSE for
/// regression, accuracy for classification.
pub fn evaluate_task(model: &MetaModel, task: &Task, adapt_steps: usize) -> Result<f64, TrainError> {
    let graph = Graph::new();
    let params: Vec<Tensor> = model.param_values().iter().map(|p| p.leaf(&graph)).collect();
    let lrs: Vec<Tensor> = model.inner_lrs.iter().map(|&v| Tensor::scalar(v)).collect();
    let adapted = adapt_params(
        model,
        params,
        &lrs,
        task.kind,
        &task.support_x,
        &task.support_y,
        adapt_steps,
        false,
        task.id,
    )?;
    let pred = model.forward(&task.query_x, &adapted);
    Ok(match (&task.kind, &task.query_y) {
        (TaskKind::Regression, targets) => task_loss(task.kind, &pred, targets).item(),
        (TaskKind::Classification, Targets::Labels(labels)) => {
            let hits = argmax_rows(&pred).iter().zip(labels.iter()).filter(|(a, b)| a == b).count();
            hits as f64 / labels.len() as f64
        }
        (TaskKind::Classification, Targets::Values(_)) => {
            panic!("classification task carries value targets")
        }
    })
}

/// Evaluates up to `limit` test tasks (all of them when `limit` is 0).
pub fn meta_test(
    model: &MetaModel,
    tasks: &dyn TaskSource,
    adapt_steps: usize,
    limit: usize,
    parallel: bool,
) -> Result<EvalSummary, TrainError> {
    if tasks.is_empty() {
        return Err(TrainError::NoTasks);
    }
    let count = if limit == 0 { tasks.len() } else { limit.min(tasks.len()) };
    let kind = tasks.task(0).kind;
    let metric = match kind {
        TaskKind::Regression => "mse",
        TaskKind::Classification => "accuracy",
    };
    let per_task: Result<Vec<f64>, TrainError> = if parallel {
        (0..count)
            .into_par_iter()
            .map(|i| evaluate_task(model, &tasks.task(i), adapt_steps))
            .collect()
    } else {
        (0..count).map(|i| evaluate_task(model, &tasks.task(i), adapt_steps)).collect()
    };
    Ok(EvalSummary::from_values(metric, per_task?))
}
