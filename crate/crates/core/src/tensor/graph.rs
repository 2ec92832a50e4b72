//! Append-only computation graph for reverse-mode differentiation.
//!
//! Nodes are recorded in execution order, so the vector order is already a
//! topological order. Forward operand values are saved eagerly on each node;
//! a backward pass replays adjoint rules against those saved values and, when
//! `create_graph` is requested, records the adjoint computations as ordinary
//! new nodes so that gradients are themselves differentiable.

use std::sync::{Arc, Mutex};

use super::plan::SpreadPlan;

#[derive(Clone, Debug)]
pub(crate) enum Op {
    /// Differentiable input.
    Leaf,
    /// Non-differentiable value captured by an operation.
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    Matmul,
    Transpose,
    Reshape,
    Exp,
    Log,
    Relu,
    SumAll,
    /// Scalar broadcast to the node's shape.
    ExpandScalar,
    Spread { plan: Arc<SpreadPlan>, reverse: bool },
    Kron,
    KronAdjLeft,
    KronAdjRight,
}

#[derive(Clone)]
pub(crate) struct Node {
    pub op: Op,
    pub parents: Vec<usize>,
    pub shape: Vec<usize>,
    pub data: Arc<Vec<f64>>,
    pub requires_grad: bool,
}

/// Shared handle to one computation graph. Cheap to clone; a graph lives as
/// long as any tensor recorded on it and is dropped wholesale afterwards.
#[derive(Clone)]
pub struct Graph {
    nodes: Arc<Mutex<Vec<Node>>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Arc::new(Mutex::new(Vec::new())) }
    }

    pub fn len(&self) -> usize {
        self.nodes.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn same_graph(a: &Graph, b: &Graph) -> bool {
        Arc::ptr_eq(&a.nodes, &b.nodes)
    }

    /// Appends a node; `requires_grad` is inherited from the parents.
    pub(crate) fn push(
        &self,
        op: Op,
        parents: Vec<usize>,
        shape: Vec<usize>,
        data: Arc<Vec<f64>>,
    ) -> usize {
        let mut nodes = self.nodes.lock().unwrap();
        let requires_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => parents.iter().any(|&p| nodes[p].requires_grad),
        };
        nodes.push(Node { op, parents, shape, data, requires_grad });
        nodes.len() - 1
    }

    pub(crate) fn push_constant(&self, shape: Vec<usize>, data: Vec<f64>) -> usize {
        self.push(Op::Constant, vec![], shape, Arc::new(data))
    }

    pub(crate) fn node_value(&self, id: usize) -> (Vec<usize>, Arc<Vec<f64>>) {
        let nodes = self.nodes.lock().unwrap();
        (nodes[id].shape.clone(), nodes[id].data.clone())
    }

    /// Snapshot of nodes `0..=upto` for a backward sweep.
    pub(crate) fn snapshot(&self, upto: usize) -> Vec<Node> {
        let nodes = self.nodes.lock().unwrap();
        nodes[..=upto].to_vec()
    }
}
