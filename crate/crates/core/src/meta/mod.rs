//! Two-loop training: per-task inner adaptation of filter parameters by SGD
//! and cross-task outer updates of sharing patterns (plus learned inner
//! rates and filter initializations) by Adam, differentiated through the
//! unrolled inner loop. Includes the plain-baseline mode, the joint-update
//! ablation, the multi-task ablation, evaluation and checkpointing.

mod adam;
mod adapt;
mod checkpoint;
mod eval;
mod model;
mod mtsr;
mod outer;

pub use adam::AdamState;
pub use adapt::{adapt_params, task_loss};
pub use checkpoint::{load_checkpoint, save_checkpoint, AdamSnapshot, Checkpoint, CheckpointError};
pub use eval::{meta_test, EvalSummary};
pub use model::{MetaModel, ModelLayer, ParamInfo, TrainMode};
pub use mtsr::{mtsr_test, train_mtsr, MtsrOptions};
pub use outer::{outer_step, train_meta, BatchMetrics, TrainOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at inner step {step} of task {task_id}")]
    NonFiniteLoss { step: usize, task_id: u64 },
    #[error("empty task batch")]
    EmptyBatch,
    #[error("no tasks to evaluate")]
    NoTasks,
    #[error(transparent)]
    Grad(#[from] crate::tensor::GradError),
}
