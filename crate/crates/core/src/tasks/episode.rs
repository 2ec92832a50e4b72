//! Episodic few-shot sampling: each task draws `n_way` classes without
//! replacement, `k_shot` support and `q` query examples per class (disjoint
//! within the episode), with labels remapped to `0..n_way`.

use std::sync::Arc;

use rand::seq::SliceRandom;

use super::idx::ImageDataset;
use super::{Task, TaskError, TaskKind, TaskSource, Targets};
use crate::rng::{derive_seed, derived_rng, streams};
use crate::tensor::Tensor;

#[derive(Clone)]
pub struct EpisodeTaskSet {
    dataset: Arc<ImageDataset>,
    by_class: Arc<Vec<Vec<usize>>>,
    n_way: usize,
    k_shot: usize,
    queries: usize,
    count: usize,
    master_seed: u64,
    /// Keeps episode ids globally distinct across independently sampled sets.
    id_offset: u64,
}

pub fn sample_episodes(
    dataset: Arc<ImageDataset>,
    n_way: usize,
    k_shot: usize,
    queries: usize,
    count: usize,
    master_seed: u64,
) -> Result<EpisodeTaskSet, TaskError> {
    let needed = k_shot + queries;
    let by_class = dataset.by_class();
    let eligible = by_class.iter().filter(|c| c.len() >= needed).count();
    if eligible < n_way {
        if let Some((class, members)) = by_class.iter().enumerate().find(|(_, c)| c.len() < needed) {
            if by_class.len() >= n_way {
                return Err(TaskError::ClassTooSmall { class, size: members.len(), needed });
            }
        }
        return Err(TaskError::NotEnoughClasses { have: eligible, need: n_way });
    }
    Ok(EpisodeTaskSet {
        dataset,
        by_class: Arc::new(by_class),
        n_way,
        k_shot,
        queries,
        count,
        master_seed,
        id_offset: 0,
    })
}

impl EpisodeTaskSet {
    pub fn with_id_offset(mut self, offset: u64) -> Self {
        self.id_offset = offset;
        self
    }

    fn stack(&self, indices: &[usize]) -> Tensor {
        let px = self.dataset.rows * self.dataset.cols;
        let mut data = Vec::with_capacity(indices.len() * px);
        for &i in indices {
            data.extend_from_slice(&self.dataset.images.data()[i * px..(i + 1) * px]);
        }
        Tensor::from_vec(&[indices.len(), 1, self.dataset.rows, self.dataset.cols], data)
    }
}

impl TaskSource for EpisodeTaskSet {
    fn len(&self) -> usize {
        self.count
    }

    fn task(&self, index: usize) -> Task {
        assert!(index < self.count, "episode index {index} out of range {}", self.count);
        let id = self.id_offset + index as u64;
        let mut rng = derived_rng(self.master_seed, streams::TASKS, id);
        let needed = self.k_shot + self.queries;
        let eligible: Vec<usize> =
            (0..self.by_class.len()).filter(|&c| self.by_class[c].len() >= needed).collect();
        let classes: Vec<usize> = {
            let mut pool = eligible;
            pool.shuffle(&mut rng);
            pool.truncate(self.n_way);
            pool
        };
        let mut support_idx = Vec::with_capacity(self.n_way * self.k_shot);
        let mut support_labels = Vec::with_capacity(self.n_way * self.k_shot);
        let mut query_idx = Vec::with_capacity(self.n_way * self.queries);
        let mut query_labels = Vec::with_capacity(self.n_way * self.queries);
        for (episode_label, &class) in classes.iter().enumerate() {
            let mut members = self.by_class[class].clone();
            members.shuffle(&mut rng);
            for &i in &members[..self.k_shot] {
                support_idx.push(i);
                support_labels.push(episode_label);
            }
            for &i in &members[self.k_shot..needed] {
                query_idx.push(i);
                query_labels.push(episode_label);
            }
        }
        Task {
            id,
            seed: derive_seed(self.master_seed, streams::TASKS, id),
            kind: TaskKind::Classification,
            support_x: self.stack(&support_idx),
            support_y: Targets::Labels(support_labels),
            query_x: self.stack(&query_idx),
            query_y: Targets::Labels(query_labels),
        }
    }
}
