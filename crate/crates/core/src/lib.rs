//! Meta-learned equivariant parameter sharing.
//!
//! Layer weights factor into a learnable sharing pattern (updated across
//! tasks in an outer loop) and per-task filter parameters (adapted within a
//! task in an inner loop). The crate provides:
//!
//! - [`tensor`]: dense `f64` tensors with reverse-mode autodiff that supports
//!   differentiating through gradients (second order);
//! - [`groups`]: finite groups, their matrix representations, constructive
//!   symmetry matrices and a brute-force group cross-correlation oracle;
//! - [`layers`]: reparameterized dense/convolution layers, locally connected
//!   generators, and plain baselines with an inner/outer parameter split;
//! - [`tasks`]: synthetic task distributions with known symmetries, query-set
//!   augmentation, episodic few-shot sampling and IDX ingestion;
//! - [`meta`]: the two-loop training procedures, ablations, optimizers,
//!   evaluation and checkpointing.

pub mod groups;
pub mod layers;
pub mod meta;
pub mod rng;
pub mod tasks;
pub mod tensor;

pub use tensor::{finite_diff_check, grad, Graph, Tensor};
