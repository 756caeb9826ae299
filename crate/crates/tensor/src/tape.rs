//! Execution record for reverse-mode differentiation.
//!
//! Every op appends one node holding its output value and a [`Function`]
//! that knows how to map the output adjoint back onto the op's inputs.
//! [`Tape::backward`] walks the nodes in exact reverse order. Adjoints of
//! intermediate nodes live only for the duration of one backward pass;
//! leaf gradients are accumulated across passes, so running backward twice
//! without [`Tape::zero_grads`] doubles every leaf gradient.

use std::collections::HashMap;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Inputs available to an op's adjoint rule.
pub struct BackwardCtx<'a> {
    pub inputs: &'a [&'a Tensor],
    pub output: &'a Tensor,
    pub grad: &'a Tensor,
    /// Which inputs need a gradient; rules may skip the others.
    pub needs: &'a [bool],
}

/// Adjoint rule of a recorded op.
///
/// Returns one entry per input, `None` where no gradient is needed.
pub trait Function {
    fn name(&self) -> &'static str;
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Result<Vec<Option<Tensor>>>;
}

struct Node {
    value: Tensor,
    inputs: Vec<Var>,
    func: Option<Box<dyn Function>>,
    requires_grad: bool,
    grad: Option<Tensor>,
    scope: usize,
}

/// Summary of one recorded node, for graph introspection.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeInfo<'a> {
    pub op: &'static str,
    pub scope: &'a str,
    pub shape: &'a [usize],
    pub inputs: &'a [Var],
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    scopes: Vec<String>,
    scope_index: HashMap<String, usize>,
    scope_stack: Vec<String>,
    fault: Option<(String, f64)>,
}

impl Tape {
    pub fn new() -> Self {
        let mut tape = Tape::default();
        tape.intern_scope(String::new());
        tape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Vec::new(), None, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Records the result of an op. Fails if the output is not finite.
    pub fn record(
        &mut self,
        func: Box<dyn Function>,
        inputs: Vec<Var>,
        output: Tensor,
    ) -> Result<Var> {
        if !output.is_finite() {
            return Err(TensorError::NonFinite { op: func.name() });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(output, inputs, Some(func), requires_grad))
    }

    fn push(
        &mut self,
        value: Tensor,
        inputs: Vec<Var>,
        func: Option<Box<dyn Function>>,
        requires_grad: bool,
    ) -> Var {
        let scope = self.current_scope();
        self.nodes.push(Node { value, inputs, func, requires_grad, grad: None, scope });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Propagates d(loss)/d(node) to every reachable leaf that requires grad.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let root = &self.nodes[loss.0];
        if root.value.numel() != 1 || root.value.rank() > 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        if !root.requires_grad {
            return Ok(());
        }
        let mut adjoints: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adjoints[loss.0] = Some(Tensor::ones(root.value.shape().to_vec()));

        for idx in (0..=loss.0).rev() {
            let Some(adj) = adjoints[idx].take() else { continue };
            let node = &self.nodes[idx];
            let Some(func) = node.func.as_ref() else {
                // Leaf: accumulate, never overwrite.
                if node.requires_grad {
                    let slot = &mut self.nodes[idx].grad;
                    match slot {
                        Some(g) => g.add_assign(&adj),
                        None => *slot = Some(adj),
                    }
                }
                continue;
            };
            let needs: Vec<bool> = node.inputs.iter().map(|v| self.nodes[v.0].requires_grad).collect();
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let ctx = BackwardCtx { inputs: &inputs, output: &node.value, grad: &adj, needs: &needs };
            let mut grads = func.backward(&ctx)?;
            if let Some((op, factor)) = &self.fault {
                if op == func.name() {
                    for g in grads.iter_mut().flatten() {
                        g.scale_in_place(*factor);
                    }
                }
            }
            for ((input, grad), need) in node.inputs.iter().zip(grads).zip(needs) {
                let (Some(grad), true) = (grad, need) else { continue };
                debug_assert_eq!(grad.shape(), self.nodes[input.0].value.shape(), "{}", func.name());
                match &mut adjoints[input.0] {
                    Some(acc) => acc.add_assign(&grad),
                    slot @ None => *slot = Some(grad),
                }
            }
        }
        Ok(())
    }

    /// Test hook: scales every adjoint produced by ops named `op`.
    pub fn inject_fault(&mut self, op: &str, factor: f64) {
        self.fault = Some((op.to_string(), factor));
    }

    pub fn clear_fault(&mut self) {
        self.fault = None;
    }

    /// Pushes a named scope; nodes recorded until the matching
    /// [`Tape::exit_scope`] are tagged with the dotted path.
    pub fn enter_scope(&mut self, name: &str) {
        self.scope_stack.push(name.to_string());
    }

    pub fn exit_scope(&mut self) {
        self.scope_stack.pop();
    }

    fn current_scope(&mut self) -> usize {
        let path = self.scope_stack.join(".");
        self.intern_scope(path)
    }

    fn intern_scope(&mut self, path: String) -> usize {
        if let Some(&i) = self.scope_index.get(&path) {
            return i;
        }
        self.scopes.push(path.clone());
        self.scope_index.insert(path, self.scopes.len() - 1);
        self.scopes.len() - 1
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeInfo<'_>> {
        self.nodes.iter().map(|n| NodeInfo {
            op: n.func.as_ref().map_or("leaf", |f| f.name()),
            scope: &self.scopes[n.scope],
            shape: n.value.shape(),
            inputs: &n.inputs,
        })
    }

    /// Number of nodes produced by `op` whose scope starts with `prefix`.
    pub fn count_ops(&self, op: &str, prefix: &str) -> usize {
        self.nodes().filter(|n| n.op == op && n.scope.starts_with(prefix)).count()
    }

    /// Sign pattern of every `relu` input, in recording order. Two
    /// evaluations of the same graph with equal patterns sit on the same
    /// linear piece of every rectifier.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter(|n| n.func.as_ref().is_some_and(|f| f.name() == "relu"))
            .flat_map(|n| self.nodes[n.inputs[0].index()].value.data().iter().map(|&x| x > 0.0))
            .collect()
    }
}
