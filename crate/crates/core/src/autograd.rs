//! Reverse-mode autograd on an append-only tape.
//!
//! A forward pass pushes nodes in topological order; each non-leaf node
//! carries a boxed [`Op`] that knows how to turn the output cotangent into
//! input cotangents. Gradients flow only into subgraphs that contain a
//! leaf marked `needs_grad`, so inference graphs pay nothing for backward
//! bookkeeping and untrainable inputs (frames, stop-gradients) are skipped.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub type NodeId = usize;

/// Backward rule of a single tape node.
pub trait Op<S: Scalar>: Send + Sync {
    /// Given d(loss)/d(output), the input values and the output value,
    /// return d(loss)/d(input) for every input. Entries whose `needs`
    /// flag is false may be returned as `None` to skip work.
    fn backward(
        &self,
        grad_out: &Tensor<S>,
        inputs: &[&Tensor<S>],
        output: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>>;
}

struct TapeNode<S: Scalar> {
    value: Tensor<S>,
    parents: Vec<NodeId>,
    op: Option<Box<dyn Op<S>>>,
    needs_grad: bool,
}

/// Computation tape. One per forward pass; dropped after backward.
pub struct Tape<S: Scalar> {
    nodes: Vec<TapeNode<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    /// Enter a leaf value. `needs_grad` marks trainable parameters.
    pub fn leaf(&mut self, value: Tensor<S>, needs_grad: bool) -> NodeId {
        self.nodes.push(TapeNode {
            value,
            parents: Vec::new(),
            op: None,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    /// Internal: record an op node. Gradient demand is inherited from parents.
    pub(crate) fn push(
        &mut self,
        value: Tensor<S>,
        parents: Vec<NodeId>,
        op: Box<dyn Op<S>>,
    ) -> NodeId {
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.nodes.push(TapeNode {
            value,
            parents,
            op: Some(op),
            needs_grad,
        });
        self.nodes.len() - 1
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Scalar value of a [1,1,1,1] node.
    pub fn scalar(&self, id: NodeId) -> S {
        let t = self.value(id);
        assert_eq!(t.len(), 1, "node is not a scalar");
        t.data()[0]
    }

    /// Backpropagate from `root`, seeding with ones.
    pub fn backward(&self, root: NodeId) -> Gradients<S> {
        let seed = Tensor::full(self.nodes[root].value.shape(), S::one());
        self.backward_seeded(root, seed)
    }

    /// Backpropagate from `root` with an explicit cotangent.
    pub fn backward_seeded(&self, root: NodeId, seed: Tensor<S>) -> Gradients<S> {
        assert_eq!(seed.shape(), self.nodes[root].value.shape());
        let mut grads: Vec<Option<Tensor<S>>> = alloc::vec![None; self.nodes.len()];
        if !self.nodes[root].needs_grad {
            return Gradients { by_node: grads };
        }
        grads[root] = Some(seed);
        for id in (0..=root).rev() {
            if grads[id].is_none() || self.nodes[id].op.is_none() {
                continue;
            }
            let node = &self.nodes[id];
            let grad_out = grads[id].take().expect("grad present");
            let inputs: Vec<&Tensor<S>> =
                node.parents.iter().map(|&p| &self.nodes[p].value).collect();
            let needs: Vec<bool> = node
                .parents
                .iter()
                .map(|&p| self.nodes[p].needs_grad)
                .collect();
            let input_grads =
                node.op
                    .as_ref()
                    .expect("op")
                    .backward(&grad_out, &inputs, &node.value, &needs);
            debug_assert_eq!(input_grads.len(), node.parents.len());
            for (slot, grad) in node.parents.iter().zip(input_grads) {
                if let Some(g) = grad {
                    if !self.nodes[*slot].needs_grad {
                        continue;
                    }
                    debug_assert_eq!(g.shape(), self.nodes[*slot].value.shape());
                    match &mut grads[*slot] {
                        Some(acc) => acc.axpy(S::one(), &g),
                        none => *none = Some(g),
                    }
                }
            }
        }
        Gradients { by_node: grads }
    }
}

/// Gradients indexed by tape node id. Only leaves keep their gradient
/// after [`Tape::backward`] (interior cotangents are consumed as the
/// sweep passes them).
pub struct Gradients<S: Scalar> {
    by_node: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<S>> {
        self.by_node.get(id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<S>> {
        self.by_node.get_mut(id).and_then(|g| g.take())
    }
}
