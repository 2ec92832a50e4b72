//! Task distributions: synthetic regression families with known symmetries,
//! query-set augmentation, episodic few-shot sampling and IDX ingestion.
//!
//! Task sets are lazy: `(spec, master seed, task id)` fully determines a
//! task, so tasks are regenerated on demand, bit-identically, in any order.

mod augment;
mod episode;
mod glyphs;
mod idx;
mod image2d;
mod lc;
mod manifest;

pub use augment::{augment_wrap, draw_transform, image_transform, AugmentSpec, AugmentedTasks, TransformParams};
pub use episode::{sample_episodes, EpisodeTaskSet};
pub use glyphs::gen_glyph_dataset;
pub use idx::{load_idx, write_idx, IdxError};
pub use image2d::{gen_group_equivariant_tasks, GroupTaskSet, GroupTaskSpec, TaskGroup2d};
pub use lc::{gen_lc_tasks, LcTaskSet, LcTaskSpec};
pub use manifest::{read_manifest, write_manifest};

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("rank {rank} is not one of the supported ranks 1, 2, 5")]
    InvalidRank { rank: usize },
    #[error("input dimension {input_dim} too small for filter width {width}")]
    InputTooSmall { input_dim: usize, width: usize },
    #[error("train tasks need at least 2 examples for a support/query split, got {got}")]
    TrainExamplesTooFew { got: usize },
    #[error("class {class} has {size} examples, episodes need {needed}")]
    ClassTooSmall { class: usize, size: usize, needed: usize },
    #[error("need {need} classes with enough examples, found {have}")]
    NotEnoughClasses { have: usize, need: usize },
    #[error("augmentation requires image tasks with (n, c, h, w) inputs, got shape {shape:?}")]
    NonImageTasks { shape: Vec<usize> },
    #[error(transparent)]
    Layer(#[from] crate::layers::LayerError),
    #[error(transparent)]
    Group(#[from] crate::groups::GroupError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Clone, Debug)]
pub enum Targets {
    Values(Tensor),
    Labels(Vec<usize>),
}

impl Targets {
    pub fn values(&self) -> &Tensor {
        match self {
            Targets::Values(t) => t,
            Targets::Labels(_) => panic!("expected value targets, found labels"),
        }
    }

    pub fn labels(&self) -> &[usize] {
        match self {
            Targets::Labels(l) => l,
            Targets::Values(_) => panic!("expected label targets, found values"),
        }
    }
}

/// One support/query pair drawn from a task distribution.
#[derive(Clone, Debug)]
pub struct Task {
    pub id: u64,
    pub seed: u64,
    pub kind: TaskKind,
    pub support_x: Tensor,
    pub support_y: Targets,
    pub query_x: Tensor,
    pub query_y: Targets,
}

/// Deterministic lazy collection of tasks.
pub trait TaskSource: Send + Sync {
    fn len(&self) -> usize;
    fn task(&self, index: usize) -> Task;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
