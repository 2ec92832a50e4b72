//! Regression tasks on small images generated by an exactly equivariant
//! one-layer group convolution: a random base filter is expanded through the
//! group's action on the filter grid, so targets are equivariant to
//! translations plus the chosen rotations (and flips) by construction.

use std::sync::Arc;

use rand::Rng;

use super::{Task, TaskError, TaskKind, TaskSource, Targets};
use crate::groups::{
    build_symmetry_matrix, regular_representation, rotation_representation_2d, tensor_product_rep,
    FiniteGroup, Interpolation, Representation,
};
use crate::layers::{Conv2dConfig, Padding, ReparamConv2d};
use crate::rng::{derive_seed, derived_rng, streams};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskGroup2d {
    /// No rotation component; plain convolution tasks.
    Trivial,
    /// Quarter-turn rotations (exact permutation action).
    C4,
    /// Quarter-turn rotations plus flips (exact).
    D4,
    /// 45-degree rotations (bilinear approximation).
    C8,
    /// 45-degree rotations plus flips (bilinear).
    D8,
}

impl TaskGroup2d {
    pub fn is_exact(&self) -> bool {
        matches!(self, TaskGroup2d::Trivial | TaskGroup2d::C4 | TaskGroup2d::D4)
    }

    fn build(&self) -> Result<(Arc<FiniteGroup>, Interpolation), TaskError> {
        Ok(match self {
            TaskGroup2d::Trivial => (FiniteGroup::cyclic(1)?, Interpolation::Exact90),
            TaskGroup2d::C4 => (FiniteGroup::cyclic(4)?, Interpolation::Exact90),
            TaskGroup2d::D4 => (FiniteGroup::dihedral(4)?, Interpolation::Exact90),
            TaskGroup2d::C8 => (FiniteGroup::cyclic(8)?, Interpolation::Bilinear),
            TaskGroup2d::D8 => (FiniteGroup::dihedral(8)?, Interpolation::Bilinear),
        })
    }
}

#[derive(Clone, Debug)]
pub struct GroupTaskSpec {
    pub group: TaskGroup2d,
    pub side: usize,
    pub filter_side: usize,
    pub train_tasks: usize,
    pub test_tasks: usize,
    pub examples_per_train_task: usize,
    /// Support size of training tasks; matches the test support by default.
    pub train_support: usize,
    pub test_support: usize,
    pub test_query: usize,
    pub master_seed: u64,
}

impl Default for GroupTaskSpec {
    fn default() -> Self {
        GroupTaskSpec {
            group: TaskGroup2d::C4,
            side: 9,
            filter_side: 3,
            train_tasks: 8000,
            test_tasks: 2000,
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
pub struct GroupTaskSet {
    spec: Arc<GroupTaskSpec>,
    group: Arc<FiniteGroup>,
    /// Group action on the filter grid, stacked into the fixed symmetry
    /// factor of the generator.
    filter_stack: Tensor,
    split: Split,
}

pub fn gen_group_equivariant_tasks(spec: &GroupTaskSpec) -> Result<(GroupTaskSet, GroupTaskSet), TaskError> {
    let (group, interp) = spec.group.build()?;
    let rep = rotation_representation_2d(&group, spec.filter_side, interp)?;
    let filter_stack = build_symmetry_matrix(&rep).matrix().clone();
    let spec = Arc::new(spec.clone());
    Ok((
        GroupTaskSet { spec: spec.clone(), group: group.clone(), filter_stack: filter_stack.clone(), split: Split::Train },
        GroupTaskSet { spec, group, filter_stack, split: Split::Test },
    ))
}

impl GroupTaskSet {
    pub fn spec(&self) -> &GroupTaskSpec {
        &self.spec
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn out_channels(&self) -> usize {
        self.group.order()
    }

    fn global_id(&self, index: usize) -> u64 {
        match self.split {
            Split::Train => index as u64,
            Split::Test => (self.spec.train_tasks + index) as u64,
        }
    }

    /// The exactly equivariant generator network of one task: a convolution
    /// whose output channels apply every group transform of one base filter.
    pub fn generator_layer(&self, index: usize) -> ReparamConv2d {
        let mut rng = derived_rng(self.spec.master_seed, streams::TASKS, self.global_id(index));
        self.sample_generator(&mut rng)
    }

    fn sample_generator(&self, rng: &mut impl Rng) -> ReparamConv2d {
        let s = self.spec.filter_side * self.spec.filter_side;
        let base = Tensor::randn(&[1, 1, s], 1.0, rng);
        let cfg = Conv2dConfig {
            in_channels: 1,
            out_channels: self.group.order(),
            filter_side: self.spec.filter_side,
            stride: 1,
            padding: Padding::Same,
            bias: false,
        };
        ReparamConv2d::with_fixed_factors(cfg, Tensor::eye(1), Tensor::eye(1), self.filter_stack.clone(), base)
            .expect("generator bank shape is consistent by construction")
    }

    /// Input-side representation: the group acting on flattened images.
    pub fn input_representation(&self) -> Result<Representation, TaskError> {
        let (_, interp) = self.spec.group.build()?;
        Ok(rotation_representation_2d(&self.group, self.spec.side, interp)?)
    }

    /// Output-side representation: channels permute by the regular action
    /// while each channel's image rotates.
    pub fn output_representation(&self) -> Result<Representation, TaskError> {
        let spatial = self.input_representation()?;
        let reg = regular_representation(&self.group)?;
        Ok(tensor_product_rep(&reg, &spatial)?)
    }
}

impl TaskSource for GroupTaskSet {
    fn len(&self) -> usize {
        match self.split {
            Split::Train => self.spec.train_tasks,
            Split::Test => self.spec.test_tasks,
        }
    }

    fn task(&self, index: usize) -> Task {
        assert!(index < self.len(), "task index {index} out of range {}", self.len());
        let id = self.global_id(index);
        let mut rng = derived_rng(self.spec.master_seed, streams::TASKS, id);
        let generator = self.sample_generator(&mut rng);
        let (n_support, n_query) = match self.split {
            Split::Train => {
                let e = self.spec.examples_per_train_task;
                (self.spec.train_support, e - self.spec.train_support)
            }
            Split::Test => (self.spec.test_support, self.spec.test_query),
        };
        let side = self.spec.side;
        let support_x = Tensor::randn(&[n_support, 1, side, side], 1.0, &mut rng);
        let query_x = Tensor::randn(&[n_query, 1, side, side], 1.0, &mut rng);
        let params = generator.params();
        let support_y = generator.forward(&support_x, &params);
        let query_y = generator.forward(&query_x, &params);
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
