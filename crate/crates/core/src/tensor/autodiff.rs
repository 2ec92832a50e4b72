//! Reverse-mode differentiation over a recorded graph.
//!
//! Adjoint rules are written in terms of the public tensor operations and the
//! saved parent values, never a node's own output. With `create_graph` the
//! parents and running adjoints stay attached to the graph, so every adjoint
//! computation is recorded and the returned gradients can be differentiated
//! again; without it the same rules run on detached tensors and the graph
//! does not grow.

use thiserror::Error;

use super::graph::{Graph, Node, Op};
use super::Tensor;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("loss must be scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("loss tensor is not recorded on any graph")]
    LossNotOnGraph,
    #[error("leaf {index} is not recorded on any graph")]
    LeafNotOnGraph { index: usize },
    #[error("leaf {index} belongs to a different graph than the loss")]
    LeafOnDifferentGraph { index: usize },
}

/// Gradient of a scalar `loss` with respect to each tensor in `leaves`.
///
/// Unreached leaves get zero gradients. With `create_graph`, the returned
/// tensors are graph nodes, so a further `grad` call differentiates through
/// them.
pub fn grad(loss: &Tensor, leaves: &[&Tensor], create_graph: bool) -> Result<Vec<Tensor>, GradError> {
    if loss.numel() != 1 {
        return Err(GradError::NonScalarLoss { shape: loss.shape().to_vec() });
    }
    let loss_ref = loss.node_ref().ok_or(GradError::LossNotOnGraph)?;
    let graph = loss_ref.graph.clone();
    let mut leaf_ids = Vec::with_capacity(leaves.len());
    for (index, leaf) in leaves.iter().enumerate() {
        let nr = leaf.node_ref().ok_or(GradError::LeafNotOnGraph { index })?;
        if !Graph::same_graph(&nr.graph, &graph) {
            return Err(GradError::LeafOnDifferentGraph { index });
        }
        leaf_ids.push(nr.id);
    }

    let nodes = graph.snapshot(loss_ref.id);
    let mut adjoints: Vec<Option<Tensor>> = vec![None; nodes.len()];
    let seed = Tensor::scalar(1.0);
    adjoints[loss_ref.id] = Some(if create_graph { constant_on(&graph, &seed) } else { seed });

    for id in (0..=loss_ref.id).rev() {
        let node = &nodes[id];
        if !node.requires_grad || matches!(node.op, Op::Leaf | Op::Constant) {
            continue;
        }
        let Some(g) = adjoints[id].clone() else { continue };
        let parents: Vec<Tensor> = node
            .parents
            .iter()
            .map(|&pid| parent_tensor(&graph, &nodes, pid, create_graph))
            .collect();
        let contributions = adjoint_rule(node, &g, &parents);
        for (slot, contribution) in contributions.into_iter().enumerate() {
            let pid = node.parents[slot];
            let Some(c) = contribution else { continue };
            if !nodes[pid].requires_grad {
                continue;
            }
            adjoints[pid] = Some(match adjoints[pid].take() {
                None => c,
                Some(prev) => prev.add(&c),
            });
        }
    }

    Ok(leaf_ids
        .iter()
        .map(|&id| match adjoints[id].take() {
            Some(t) => t,
            None => Tensor::zeros(&nodes[id].shape),
        })
        .collect())
}

/// Attaches a non-differentiable value to the graph so that downstream
/// recorded ops stay on-graph.
fn constant_on(graph: &Graph, t: &Tensor) -> Tensor {
    let id = graph.push_constant(t.shape().to_vec(), t.data().to_vec());
    Tensor::from_node(graph, id)
}

fn parent_tensor(graph: &Graph, nodes: &[Node], pid: usize, create_graph: bool) -> Tensor {
    if create_graph {
        Tensor::from_node(graph, pid)
    } else {
        Tensor::from_vec(&nodes[pid].shape, nodes[pid].data.as_ref().clone())
    }
}

/// Per-op adjoints: one optional contribution per parent slot.
fn adjoint_rule(node: &Node, g: &Tensor, parents: &[Tensor]) -> Vec<Option<Tensor>> {
    match &node.op {
        Op::Leaf | Op::Constant => vec![],
        Op::Add => vec![Some(g.clone()), Some(g.clone())],
        Op::Sub => vec![Some(g.clone()), Some(g.neg())],
        Op::Mul => vec![Some(g.mul(&parents[1])), Some(g.mul(&parents[0]))],
        Op::Div => {
            let (a, b) = (&parents[0], &parents[1]);
            vec![
                Some(g.div(b)),
                Some(g.mul(a).div(&b.mul(b)).neg()),
            ]
        }
        Op::Scale(c) => vec![Some(g.scale(*c))],
        Op::Matmul => vec![
            Some(g.matmul(&parents[1].transpose())),
            Some(parents[0].transpose().matmul(g)),
        ],
        Op::Transpose => vec![Some(g.transpose())],
        Op::Reshape => vec![Some(g.reshape(parents[0].shape()))],
        Op::Exp => vec![Some(g.mul(&parents[0].exp()))],
        Op::Log => vec![Some(g.div(&parents[0]))],
        Op::Relu => {
            // The unit-step mask has zero derivative almost everywhere and
            // enters as a constant.
            let mask: Vec<f64> = parents[0].data().iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
            vec![Some(g.mul(&Tensor::from_vec(parents[0].shape(), mask)))]
        }
        Op::SumAll => vec![Some(g.expand_to(parents[0].shape()))],
        Op::ExpandScalar => vec![Some(g.sum_all())],
        Op::Spread { plan, reverse } => {
            if *reverse {
                vec![Some(g.spread(plan))]
            } else {
                vec![Some(g.spread_reverse(plan))]
            }
        }
        Op::Kron => vec![
            Some(g.kron_adj_left(&parents[1])),
            Some(g.kron_adj_right(&parents[0])),
        ],
        Op::KronAdjLeft => vec![
            Some(g.kron(&parents[1])),
            Some(parents[0].kron_adj_right(g)),
        ],
        Op::KronAdjRight => vec![
            Some(parents[1].kron(g)),
            Some(parents[0].kron_adj_left(g)),
        ],
    }
}

/// Result of a central-difference gradient check.
#[derive(Debug, Clone)]
pub struct FiniteDiffReport {
    pub max_rel_err: f64,
    pub worst_coordinate: usize,
    pub tolerance: f64,
    /// Coordinates whose perturbed evaluations were not finite.
    pub non_finite: Vec<usize>,
}

impl FiniteDiffReport {
    pub fn passed(&self) -> bool {
        self.non_finite.is_empty() && self.max_rel_err < self.tolerance
    }
}

/// Checks `grad` of a scalar-valued `f` at `x` against central differences.
///
/// Steps are scaled per coordinate as `epsilon * max(1, |x_i|)`. Relative
/// error uses `|fd - an| / max(|fd|, |an|, 1e-6)` per coordinate; the report
/// carries the worst one.
pub fn finite_diff_check<F>(f: F, x: &Tensor, epsilon: f64, tolerance: f64) -> Result<FiniteDiffReport, GradError>
where
    F: Fn(&Tensor) -> Tensor,
{
    let graph = Graph::new();
    let leaf = x.leaf(&graph);
    let loss = f(&leaf);
    if loss.numel() != 1 {
        return Err(GradError::NonScalarLoss { shape: loss.shape().to_vec() });
    }
    let analytic = grad(&loss, &[&leaf], false)?.remove(0);

    let mut max_rel_err = 0.0f64;
    let mut worst_coordinate = 0;
    let mut non_finite = Vec::new();
    let base = x.data().to_vec();
    for i in 0..base.len() {
        let step = epsilon * base[i].abs().max(1.0);
        let mut plus = base.clone();
        plus[i] += step;
        let mut minus = base.clone();
        minus[i] -= step;
        let fp = f(&Tensor::from_vec(x.shape(), plus)).item();
        let fm = f(&Tensor::from_vec(x.shape(), minus)).item();
        if !fp.is_finite() || !fm.is_finite() {
            non_finite.push(i);
            continue;
        }
        let fd = (fp - fm) / (2.0 * step);
        let an = analytic.data()[i];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_coordinate = i;
        }
    }
    Ok(FiniteDiffReport { max_rel_err, worst_coordinate, tolerance, non_finite })
}
