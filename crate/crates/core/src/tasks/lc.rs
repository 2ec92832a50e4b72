//! Regression tasks generated by rank-constrained 1-D locally connected
//! layers: rank 1 with shared mixing is exactly a convolution (full
//! translation symmetry), higher ranks give partial symmetry.

use std::sync::Arc;

use rand::Rng;

use super::{Task, TaskError, TaskKind, TaskSource, Targets};
use crate::layers::lc_forward;
use crate::rng::{derive_seed, derived_rng, streams};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct LcTaskSpec {
    /// Rank of the per-location filter family; 1, 2 or 5.
    pub rank: usize,
    pub input_dim: usize,
    pub filter_width: usize,
    pub train_tasks: usize,
    pub test_tasks: usize,
    /// Total examples per training task; `train_support` of them form the
    /// support set, the rest the query set.
    pub examples_per_train_task: usize,
    /// Support size of training tasks. Matches the test-task support size by
    /// default so that adaptation conditions agree between the loops.
    pub train_support: usize,
    pub test_support: usize,
    pub test_query: usize,
    pub master_seed: u64,
}

impl Default for LcTaskSpec {
    fn default() -> Self {
        LcTaskSpec {
            rank: 1,
            input_dim: 16,
            filter_width: 3,
            train_tasks: 400,
            test_tasks: 100,
            examples_per_train_task: 20,
            train_support: 1,
            test_support: 1,
            test_query: 20,
            master_seed: 0,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Test,
}

#[derive(Clone)]
pub struct LcTaskSet {
    spec: Arc<LcTaskSpec>,
    /// Per-location mixing coefficients, the structure shared by every task
    /// of the distribution. Rank 1 uses a constant column (the family is
    /// then exactly convolutional); higher ranks draw one standard-normal
    /// `(out_dim, k)` matrix per distribution. Tasks vary only in their `k`
    /// basis filters, so each task has `3k` degrees of freedom and a single
    /// support example identifies it.
    mixing: Tensor,
    split: Split,
}

/// Builds the disjoint train/test task sets for one spec. Train tasks get
/// global ids `0..train_tasks`, test tasks follow.
pub fn gen_lc_tasks(spec: &LcTaskSpec) -> Result<(LcTaskSet, LcTaskSet), TaskError> {
    if !matches!(spec.rank, 1 | 2 | 5) {
        return Err(TaskError::InvalidRank { rank: spec.rank });
    }
    if spec.input_dim < spec.filter_width + 1 {
        return Err(TaskError::InputTooSmall { input_dim: spec.input_dim, width: spec.filter_width });
    }
    if spec.examples_per_train_task < spec.train_support + 1 || spec.train_support == 0 {
        return Err(TaskError::TrainExamplesTooFew { got: spec.examples_per_train_task });
    }
    let out_dim = spec.input_dim - spec.filter_width + 1;
    let mixing = if spec.rank == 1 {
        Tensor::ones(&[out_dim, 1])
    } else {
        let mut rng = derived_rng(spec.master_seed, streams::DATASET, spec.rank as u64);
        Tensor::randn(&[out_dim, spec.rank], 1.0, &mut rng)
    };
    let spec = Arc::new(spec.clone());
    Ok((
        LcTaskSet { spec: spec.clone(), mixing: mixing.clone(), split: Split::Train },
        LcTaskSet { spec, mixing, split: Split::Test },
    ))
}

impl LcTaskSet {
    pub fn spec(&self) -> &LcTaskSpec {
        &self.spec
    }

    pub fn out_dim(&self) -> usize {
        self.spec.input_dim - self.spec.filter_width + 1
    }

    fn global_id(&self, index: usize) -> u64 {
        match self.split {
            Split::Train => index as u64,
            Split::Test => (self.spec.train_tasks + index) as u64,
        }
    }

    /// The distribution's shared mixing pattern, `(out_dim, rank)`.
    pub fn mixing(&self) -> &Tensor {
        &self.mixing
    }

    /// The ground-truth per-location filters of a task, `(out_dim, width)`:
    /// the shared mixing applied to the task's basis filters. Rank 1 rows
    /// are all the same filter, so the map is exactly a convolution.
    pub fn ground_truth_filters(&self, index: usize) -> Tensor {
        let mut rng = self.task_rng(index);
        self.sample_filters(&mut rng)
    }

    fn task_rng(&self, index: usize) -> impl Rng {
        derived_rng(self.spec.master_seed, streams::TASKS, self.global_id(index))
    }

    fn sample_filters(&self, rng: &mut impl Rng) -> Tensor {
        let basis = Tensor::randn(&[self.spec.rank, self.spec.filter_width], 1.0, rng);
        self.mixing.matmul(&basis)
    }
}

impl TaskSource for LcTaskSet {
    fn len(&self) -> usize {
        match self.split {
            Split::Train => self.spec.train_tasks,
            Split::Test => self.spec.test_tasks,
        }
    }

    fn task(&self, index: usize) -> Task {
        assert!(index < self.len(), "task index {index} out of range {}", self.len());
        let id = self.global_id(index);
        let mut rng = self.task_rng(index);
        let filters = self.sample_filters(&mut rng);
        let (n_support, n_query) = match self.split {
            Split::Train => {
                let e = self.spec.examples_per_train_task;
                (self.spec.train_support, e - self.spec.train_support)
            }
            Split::Test => (self.spec.test_support, self.spec.test_query),
        };
        let n = self.spec.input_dim;
        let support_x = Tensor::randn(&[n_support, n], 1.0, &mut rng);
        let query_x = Tensor::randn(&[n_query, n], 1.0, &mut rng);
        let support_y = lc_forward(&support_x, &filters);
        let query_y = lc_forward(&query_x, &filters);
        Task {
            id,
            seed: derive_seed(self.spec.master_seed, streams::TASKS, id),
            kind: TaskKind::Regression,
            support_x,
            support_y: Targets::Values(support_y),
            query_x,
            query_y: Targets::Values(query_y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::sharing_score;

    #[test]
    fn rank_one_tasks_are_convolutions() {
        let spec = LcTaskSpec { rank: 1, train_tasks: 5, test_tasks: 2, ..Default::default() };
        let (train, _) = gen_lc_tasks(&spec).unwrap();
        for i in 0..5 {
            let f = train.ground_truth_filters(i);
            // Banded weight matrix of a shared filter is Toeplitz.
            let band = f.spread(&crate::tensor::plan::plan_band_embed(14, 3, 16));
            assert!((sharing_score(&band) - 1.0).abs() < 1e-12, "task {i}");
        }
    }

    #[test]
    fn paper_default_counts() {
        let spec = LcTaskSpec { examples_per_train_task: 2, ..Default::default() };
        let (train, test) = gen_lc_tasks(&spec).unwrap();
        assert_eq!(train.len(), 400);
        assert_eq!(test.len(), 100);
        let t = train.task(0);
        assert_eq!(t.support_x.shape()[0] + t.query_x.shape()[0], 2);
        let t = test.task(0);
        assert_eq!(t.support_x.shape()[0], 1);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let spec = LcTaskSpec { rank: 2, train_tasks: 3, test_tasks: 1, ..Default::default() };
        let (train, _) = gen_lc_tasks(&spec).unwrap();
        let a = train.task(1);
        let b = train.task(1);
        assert_eq!(a.support_x.data(), b.support_x.data());
        assert_eq!(a.query_y.values().data(), b.query_y.values().data());
        assert_eq!(a.seed, b.seed);
    }

    #[test]
    fn targets_come_from_the_stored_filters() {
        let spec = LcTaskSpec { rank: 5, train_tasks: 2, test_tasks: 1, ..Default::default() };
        let (train, _) = gen_lc_tasks(&spec).unwrap();
        let t = train.task(0);
        let f = train.ground_truth_filters(0);
        let y = lc_forward(&t.support_x, &f);
        assert_eq!(y.data(), t.support_y.values().data());
    }

    #[test]
    fn train_and_test_ids_are_disjoint() {
        let spec = LcTaskSpec { train_tasks: 4, test_tasks: 4, ..Default::default() };
        let (train, test) = gen_lc_tasks(&spec).unwrap();
        let train_ids: Vec<u64> = (0..4).map(|i| train.task(i).id).collect();
        let test_ids: Vec<u64> = (0..4).map(|i| test.task(i).id).collect();
        for id in &test_ids {
            assert!(!train_ids.contains(id));
        }
    }

    #[test]
    fn invalid_rank_is_rejected() {
        let spec = LcTaskSpec { rank: 3, ..Default::default() };
        assert!(matches!(gen_lc_tasks(&spec), Err(TaskError::InvalidRank { rank: 3 })));
    }
}
