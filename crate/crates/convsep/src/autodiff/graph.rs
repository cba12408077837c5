//! Define-by-run computation graph with reverse-mode gradient accumulation.
//!
//! Values are evaluated eagerly as nodes are added; `backward` walks the
//! record in reverse topological order (which is insertion order, since a
//! node can only reference earlier nodes) and accumulates gradients into
//! every node that requires them.

use super::ops;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node inside one [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Matmul(NodeId, NodeId),
    Softplus(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    ConvTime { input: NodeId, filters: NodeId },
    ConvTimeTransposed { code: NodeId, filters: NodeId },
    Column(NodeId, usize),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SumRows(NodeId),
    SumAll(NodeId),
    L1(NodeId),
    KlDiv { target: NodeId, estimate: NodeId },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Matmul(..) => "matmul",
            Op::Softplus(..) => "softplus",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::ConvTime { .. } => "causal_conv_time",
            Op::ConvTimeTransposed { .. } => "causal_conv_time_transposed",
            Op::Column(..) => "column",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::SumRows(..) => "sum_rows",
            Op::SumAll(..) => "sum_all",
            Op::L1(..) => "l1",
            Op::KlDiv { .. } => "kl_divergence",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Scalar-and-tensor computation record.
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a constant input; no gradient is tracked for it.
    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        value.ensure_finite("constant leaf")?;
        Ok(self.push(Op::Leaf, value, false))
    }

    /// Adds a trainable input; `backward` will populate its gradient.
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        value.ensure_finite("parameter leaf")?;
        Ok(self.push(Op::Leaf, value, true))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated for `id` by the last `backward` call. `None` for
    /// nodes that do not require gradients.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape(a, b, "add")?;
        let value = Tensor::from_fn(self.value(a).shape(), |i| {
            self.value(a).data()[i] + self.value(b).data()[i]
        });
        self.push_checked(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape(a, b, "sub")?;
        let value = Tensor::from_fn(self.value(a).shape(), |i| {
            self.value(a).data()[i] - self.value(b).data()[i]
        });
        self.push_checked(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_same_shape(a, b, "mul")?;
        let value = Tensor::from_fn(self.value(a).shape(), |i| {
            self.value(a).data()[i] * self.value(b).data()[i]
        });
        self.push_checked(Op::Mul(a, b), value)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let value = self.value(a).map(|x| x * factor);
        self.push_checked(Op::Scale(a, factor), value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        self.push_checked(Op::Matmul(a, b), value)
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        let value = ops::softplus(self.value(a));
        self.push_checked(Op::Softplus(a), value)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(ops::sigmoid_scalar);
        self.push_checked(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(f64::tanh);
        self.push_checked(Op::Tanh(a), value)
    }

    /// Encoder convolution, see [`ops::causal_conv_time`].
    pub fn causal_conv_time(&mut self, input: NodeId, filters: NodeId) -> Result<NodeId> {
        let value = ops::causal_conv_time(self.value(input), self.value(filters))?;
        self.push_checked(Op::ConvTime { input, filters }, value)
    }

    /// Decoder convolution, see [`ops::causal_conv_time_transposed_accumulate`].
    pub fn causal_conv_time_transposed(&mut self, code: NodeId, filters: NodeId) -> Result<NodeId> {
        let value =
            ops::causal_conv_time_transposed_accumulate(self.value(code), self.value(filters))?;
        self.push_checked(Op::ConvTimeTransposed { code, filters }, value)
    }

    /// Extracts column `t` of a matrix as a (rows x 1) tensor.
    pub fn column(&mut self, a: NodeId, t: usize) -> Result<NodeId> {
        let v = self.value(a);
        if !v.is_matrix() || t >= v.cols() {
            return Err(Error::shape(format!(
                "column {} out of range for {:?}",
                t,
                v.shape()
            )));
        }
        let (rows, cols) = (v.rows(), v.cols());
        let value = Tensor::from_fn(&[rows, 1], |r| v.data()[r * cols + t]);
        self.push_checked(Op::Column(a, t), value)
    }

    /// Concatenates same-height matrices left to right.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat_cols: no inputs"));
        }
        let rows = self.value(parts[0]).rows();
        let total: usize = parts
            .iter()
            .map(|&p| self.value(p).cols())
            .sum();
        let mut value = Tensor::zeros(&[rows, total]);
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            if !v.is_matrix() || v.rows() != rows {
                return Err(Error::shape("concat_cols: row counts differ".to_string()));
            }
            let w = v.cols();
            for r in 0..rows {
                for c in 0..w {
                    value.set2(r, offset + c, v.at2(r, c));
                }
            }
            offset += w;
        }
        self.push_checked(Op::ConcatCols(parts.to_vec()), value)
    }

    /// Stacks same-width matrices top to bottom.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat_rows: no inputs"));
        }
        let cols = self.value(parts[0]).cols();
        let total: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut data = Vec::with_capacity(total * cols);
        for &p in parts {
            let v = self.value(p);
            if !v.is_matrix() || v.cols() != cols {
                return Err(Error::shape("concat_rows: column counts differ".to_string()));
            }
            data.extend_from_slice(v.data());
        }
        let value = Tensor::from_vec(&[total, cols], data)?;
        self.push_checked(Op::ConcatRows(parts.to_vec()), value)
    }

    /// Collapses a (p x n) matrix to its per-column sums (1 x n).
    pub fn sum_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if !v.is_matrix() {
            return Err(Error::shape("sum_rows expects a matrix".to_string()));
        }
        let (rows, cols) = (v.rows(), v.cols());
        let value = Tensor::from_fn(&[1, cols], |c| (0..rows).map(|r| v.at2(r, c)).sum());
        self.push_checked(Op::SumRows(a), value)
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let value = Tensor::scalar(self.value(a).sum());
        self.push_checked(Op::SumAll(a), value)
    }

    /// Sum of absolute values, as a scalar node.
    pub fn l1(&mut self, a: NodeId) -> Result<NodeId> {
        let value = Tensor::scalar(self.value(a).data().iter().map(|x| x.abs()).sum());
        self.push_checked(Op::L1(a), value)
    }

    /// Generalized KL divergence of `estimate` against the constant `target`.
    pub fn kl_div(&mut self, target: NodeId, estimate: NodeId) -> Result<NodeId> {
        if self.nodes[target.0].requires_grad {
            return Err(Error::invalid(
                "kl_div: gradient through the target is not supported",
            ));
        }
        let value = ops::kl_divergence(self.value(target), self.value(estimate))?;
        self.push_checked(Op::KlDiv { target, estimate }, Tensor::scalar(value))
    }

    /// Reverse accumulation from a scalar loss node. Gradients for every
    /// grad-requiring node become available through [`Graph::grad`]; leaves
    /// the loss does not reach keep a zero gradient.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::invalid(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.grads = vec![None; self.nodes.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && matches!(node.op, Op::Leaf) {
                self.grads[idx] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(()); // loss does not depend on any parameter
        }
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            // Grad at idx is final here: later nodes have all been processed.
            let grad = match self.grads[idx].take() {
                Some(g) => g,
                None => continue, // not reachable from the loss
            };
            if !grad.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of node {} ({})",
                    idx,
                    self.nodes[idx].op.name()
                )));
            }
            self.propagate(idx, &grad);
            self.grads[idx] = Some(grad);
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, grad: &Tensor) {
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(a, grad, 1.0);
                self.accumulate(b, grad, 1.0);
            }
            Op::Sub(a, b) => {
                self.accumulate(a, grad, 1.0);
                self.accumulate(b, grad, -1.0);
            }
            Op::Mul(a, b) => {
                if self.requires(a) {
                    let g = Tensor::from_fn(grad.shape(), |i| {
                        grad.data()[i] * self.value(b).data()[i]
                    });
                    self.accumulate(a, &g, 1.0);
                }
                if self.requires(b) {
                    let g = Tensor::from_fn(grad.shape(), |i| {
                        grad.data()[i] * self.value(a).data()[i]
                    });
                    self.accumulate(b, &g, 1.0);
                }
            }
            Op::Scale(a, c) => self.accumulate(a, grad, c),
            Op::Matmul(a, b) => {
                if self.requires(a) {
                    let g = ops::matmul_nt(grad, self.value(b));
                    self.accumulate(a, &g, 1.0);
                }
                if self.requires(b) {
                    let g = ops::matmul_tn(self.value(a), grad);
                    self.accumulate(b, &g, 1.0);
                }
            }
            Op::Softplus(a) => {
                let g = Tensor::from_fn(grad.shape(), |i| {
                    grad.data()[i] * ops::sigmoid_scalar(self.value(a).data()[i])
                });
                self.accumulate(a, &g, 1.0);
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[idx].value;
                let g = Tensor::from_fn(grad.shape(), |i| {
                    let s = y.data()[i];
                    grad.data()[i] * s * (1.0 - s)
                });
                self.accumulate(a, &g, 1.0);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[idx].value;
                let g = Tensor::from_fn(grad.shape(), |i| {
                    let t = y.data()[i];
                    grad.data()[i] * (1.0 - t * t)
                });
                self.accumulate(a, &g, 1.0);
            }
            Op::ConvTime { input, filters } => {
                if self.requires(input) {
                    let v = self.value(input);
                    let g =
                        ops::conv_time_grad_input(grad, self.value(filters), v.rows(), v.cols());
                    self.accumulate(input, &g, 1.0);
                }
                if self.requires(filters) {
                    let fs = self.value(filters).shape().to_vec();
                    let g = ops::conv_time_grad_filters(grad, self.value(input), fs[0], fs[2]);
                    self.accumulate(filters, &g, 1.0);
                }
            }
            Op::ConvTimeTransposed { code, filters } => {
                if self.requires(code) {
                    let v = self.value(code);
                    let g = ops::conv_transposed_grad_code(
                        grad,
                        self.value(filters),
                        v.rows(),
                        v.cols(),
                    );
                    self.accumulate(code, &g, 1.0);
                }
                if self.requires(filters) {
                    let t_len = self.value(filters).shape()[1];
                    let g = ops::conv_transposed_grad_filters(grad, self.value(code), t_len);
                    self.accumulate(filters, &g, 1.0);
                }
            }
            Op::Column(a, t) => {
                if self.requires(a) {
                    let v = self.value(a);
                    let (rows, cols) = (v.rows(), v.cols());
                    let mut g = Tensor::zeros(&[rows, cols]);
                    for r in 0..rows {
                        g.set2(r, t, grad.data()[r]);
                    }
                    self.accumulate(a, &g, 1.0);
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (rows, w) = (self.value(p).rows(), self.value(p).cols());
                    if self.requires(p) {
                        let g = Tensor::from_fn(&[rows, w], |i| {
                            let (r, c) = (i / w, i % w);
                            grad.at2(r, offset + c)
                        });
                        self.accumulate(p, &g, 1.0);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (h, cols) = (self.value(p).rows(), self.value(p).cols());
                    if self.requires(p) {
                        let g = Tensor::from_fn(&[h, cols], |i| {
                            grad.data()[offset * cols + i]
                        });
                        self.accumulate(p, &g, 1.0);
                    }
                    offset += h;
                }
            }
            Op::SumRows(a) => {
                if self.requires(a) {
                    let v = self.value(a);
                    let (rows, cols) = (v.rows(), v.cols());
                    let g = Tensor::from_fn(&[rows, cols], |i| grad.data()[i % cols]);
                    self.accumulate(a, &g, 1.0);
                }
            }
            Op::SumAll(a) => {
                let g0 = grad.data()[0];
                if self.requires(a) {
                    let g = Tensor::filled(self.value(a).shape(), g0);
                    self.accumulate(a, &g, 1.0);
                }
            }
            Op::L1(a) => {
                let g0 = grad.data()[0];
                if self.requires(a) {
                    let g = self.value(a).map(|x| {
                        if x > 0.0 {
                            g0
                        } else if x < 0.0 {
                            -g0
                        } else {
                            0.0
                        }
                    });
                    self.accumulate(a, &g, 1.0);
                }
            }
            Op::KlDiv { target, estimate } => {
                if self.requires(estimate) {
                    let g0 = grad.data()[0];
                    let mut g = ops::kl_grad_estimate(self.value(target), self.value(estimate));
                    for v in g.data_mut() {
                        *v *= g0;
                    }
                    self.accumulate(estimate, &g, 1.0);
                }
            }
        }
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn accumulate(&mut self, id: NodeId, grad: &Tensor, factor: f64) {
        if !self.requires(id) {
            return;
        }
        let slot = &mut self.grads[id.0];
        match slot {
            Some(existing) => {
                for (dst, &src) in existing.data_mut().iter_mut().zip(grad.data()) {
                    *dst += factor * src;
                }
            }
            None => {
                let mut g = grad.clone();
                if factor != 1.0 {
                    for v in g.data_mut() {
                        *v *= factor;
                    }
                }
                *slot = Some(g);
            }
        }
    }

    fn check_same_shape(&self, a: NodeId, b: NodeId, op: &str) -> Result<()> {
        if !self.value(a).same_shape(self.value(b)) {
            return Err(Error::shape(format!(
                "{}: {:?} vs {:?}",
                op,
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    fn push_checked(&mut self, op: Op, value: Tensor) -> Result<NodeId> {
        value.ensure_finite(&format!("output of node {} ({})", self.nodes.len(), op.name()))?;
        let requires = self.op_requires_grad(&op);
        Ok(self.push(op, value, requires))
    }

    fn op_requires_grad(&self, op: &Op) -> bool {
        let dep = |id: &NodeId| self.nodes[id.0].requires_grad;
        match op {
            Op::Leaf => false,
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Matmul(a, b) => {
                dep(a) || dep(b)
            }
            Op::Scale(a, _)
            | Op::Softplus(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Column(a, _)
            | Op::SumRows(a)
            | Op::SumAll(a)
            | Op::L1(a) => dep(a),
            Op::ConvTime { input, filters } => dep(input) || dep(filters),
            Op::ConvTimeTransposed { code, filters } => dep(code) || dep(filters),
            Op::ConcatCols(parts) | Op::ConcatRows(parts) => parts.iter().any(dep),
            Op::KlDiv { estimate, .. } => dep(estimate),
        }
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        id
    }
}

/// Node handles for one LSTM gate: recurrent map, input projection, bias.
#[derive(Debug, Clone, Copy)]
pub struct LstmGateIds {
    pub recurrent: NodeId,
    pub project: NodeId,
    pub bias: NodeId,
}

/// Node handles for a full LSTM cell, gate order: input, forget, cell, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmIds {
    pub gates: [LstmGateIds; 4],
}

fn gate_preactivation(
    g: &mut Graph,
    gate: &LstmGateIds,
    x_t: NodeId,
    h_prev: NodeId,
) -> Result<NodeId> {
    let from_input = g.matmul(gate.project, x_t)?;
    let from_state = g.matmul(gate.recurrent, h_prev)?;
    let summed = g.add(from_input, from_state)?;
    g.add(summed, gate.bias)
}

/// One LSTM step: gates i,f,o = sigmoid(affine), candidate = tanh(affine),
/// c_t = f*c_prev + i*candidate, h_t = o*tanh(c_t). Returns (h_t, c_t).
pub fn lstm_cell_step(
    g: &mut Graph,
    weights: &LstmIds,
    x_t: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let pre_i = gate_preactivation(g, &weights.gates[0], x_t, h_prev)?;
    let pre_f = gate_preactivation(g, &weights.gates[1], x_t, h_prev)?;
    let pre_c = gate_preactivation(g, &weights.gates[2], x_t, h_prev)?;
    let pre_o = gate_preactivation(g, &weights.gates[3], x_t, h_prev)?;
    let gate_i = g.sigmoid(pre_i)?;
    let gate_f = g.sigmoid(pre_f)?;
    let candidate = g.tanh(pre_c)?;
    let gate_o = g.sigmoid(pre_o)?;
    let keep = g.mul(gate_f, c_prev)?;
    let write = g.mul(gate_i, candidate)?;
    let c_t = g.add(keep, write)?;
    let c_squashed = g.tanh(c_t)?;
    let h_t = g.mul(gate_o, c_squashed)?;
    Ok((h_t, c_t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{finite_difference_gradients, max_relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_chain_gradient_is_input() {
        // loss = sum(W x): dloss/dW(i,j) = x(j) for every row i.
        let w_val = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 3.0, 1.0, -1.0]).unwrap();
        let x_val = Tensor::from_vec(&[3, 1], vec![0.25, -0.5, 4.0]).unwrap();
        let mut g = Graph::new();
        let w = g.param(w_val).unwrap();
        let x = g.constant(x_val.clone()).unwrap();
        let y = g.matmul(w, x).unwrap();
        let loss = g.sum_all(y).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(w).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((grad.at2(i, j) - x_val.data()[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shared_parameter_gradients_accumulate() {
        let w_val = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let x1 = Tensor::from_vec(&[2, 1], vec![3.0, 4.0]).unwrap();
        let x2 = Tensor::from_vec(&[2, 1], vec![-1.0, 5.0]).unwrap();

        let grad_for = |inputs: &[&Tensor]| {
            let mut g = Graph::new();
            let w = g.param(w_val.clone()).unwrap();
            let mut parts = Vec::new();
            for x in inputs {
                let xi = g.constant((*x).clone()).unwrap();
                let y = g.matmul(w, xi).unwrap();
                parts.push(g.sum_all(y).unwrap());
            }
            let loss = if parts.len() == 1 {
                parts[0]
            } else {
                g.add(parts[0], parts[1]).unwrap()
            };
            g.backward(loss).unwrap();
            g.grad(w).unwrap().clone()
        };

        let both = grad_for(&[&x1, &x2]);
        let first = grad_for(&[&x1]);
        let second = grad_for(&[&x2]);
        for i in 0..2 {
            assert!((both.data()[i] - (first.data()[i] + second.data()[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut g = Graph::new();
        let used = g.param(Tensor::scalar(2.0)).unwrap();
        let unused = g.param(Tensor::scalar(5.0)).unwrap();
        let loss = g.sum_all(used).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(unused).unwrap().data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::new();
        let a = g.param(Tensor::zeros(&[2, 2])).unwrap();
        assert!(g.backward(a).is_err());
    }

    #[test]
    fn overflowing_gradient_is_trapped_with_node_name() {
        let mut g = Graph::new();
        let a = g.param(Tensor::scalar(0.0)).unwrap();
        let b = g.scale(a, 1e308).unwrap();
        let c = g.scale(b, 1e308).unwrap();
        let err = g.backward(c).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gradient of node"), "got: {msg}");
    }

    #[test]
    fn lstm_zero_everything_gives_zero_state() {
        let mut g = Graph::new();
        let zero_mat = |g: &mut Graph| g.constant(Tensor::zeros(&[2, 2])).unwrap();
        let zero_vec = |g: &mut Graph| g.constant(Tensor::zeros(&[2, 1])).unwrap();
        let gates = [(); 4].map(|_| LstmGateIds {
            recurrent: zero_mat(&mut g),
            project: zero_mat(&mut g),
            bias: zero_vec(&mut g),
        });
        let weights = LstmIds { gates };
        let x = zero_vec(&mut g);
        let h0 = zero_vec(&mut g);
        let c0 = zero_vec(&mut g);
        let (h1, c1) = lstm_cell_step(&mut g, &weights, x, h0, c0).unwrap();
        assert!(g.value(h1).data().iter().all(|&v| v == 0.0));
        assert!(g.value(c1).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_saturated_gates_carry_cell_state() {
        // Forget bias -> +inf limit, input bias -> -inf limit: c_t ~= c_prev.
        let mut g = Graph::new();
        let zero_mat = |g: &mut Graph| g.constant(Tensor::zeros(&[2, 2])).unwrap();
        let bias = |g: &mut Graph, v: f64| g.constant(Tensor::filled(&[2, 1], v)).unwrap();
        let mk_gate = |g: &mut Graph, b: f64| LstmGateIds {
            recurrent: zero_mat(g),
            project: zero_mat(g),
            bias: bias(g, b),
        };
        let gates = [
            mk_gate(&mut g, -60.0), // input gate shut
            mk_gate(&mut g, 60.0),  // forget gate open
            mk_gate(&mut g, 0.0),
            mk_gate(&mut g, 0.0),
        ];
        let weights = LstmIds { gates };
        let x = g.constant(Tensor::zeros(&[2, 1])).unwrap();
        let h0 = g.constant(Tensor::zeros(&[2, 1])).unwrap();
        let c0 = g
            .constant(Tensor::from_vec(&[2, 1], vec![0.3, -0.7]).unwrap())
            .unwrap();
        let (_, c1) = lstm_cell_step(&mut g, &weights, x, h0, c0).unwrap();
        for (a, b) in g.value(c1).data().iter().zip([0.3, -0.7]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k_in = 3;
        let m = 4;
        let steps = 3;
        let mut params = Vec::new();
        for _ in 0..4 {
            params.push(Tensor::from_fn(&[k_in, k_in], |_| rng.gen_range(-0.5..0.5)));
            params.push(Tensor::from_fn(&[k_in, m], |_| rng.gen_range(-0.5..0.5)));
            params.push(Tensor::from_fn(&[k_in, 1], |_| rng.gen_range(-0.5..0.5)));
        }
        let x = Tensor::from_fn(&[m, steps], |_| rng.gen_range(-1.0..1.0));

        let build = |p: &[Tensor]| -> (Graph, NodeId, Vec<NodeId>) {
            let mut g = Graph::new();
            let ids: Vec<NodeId> = p.iter().map(|t| g.param(t.clone()).unwrap()).collect();
            let gates = [0, 1, 2, 3].map(|gi| LstmGateIds {
                recurrent: ids[gi * 3],
                project: ids[gi * 3 + 1],
                bias: ids[gi * 3 + 2],
            });
            let weights = LstmIds { gates };
            let input = g.constant(x.clone()).unwrap();
            let mut h = g.constant(Tensor::zeros(&[k_in, 1])).unwrap();
            let mut c = g.constant(Tensor::zeros(&[k_in, 1])).unwrap();
            let mut h_sums = Vec::new();
            for t in 0..steps {
                let x_t = g.column(input, t).unwrap();
                let (h_t, c_t) = lstm_cell_step(&mut g, &weights, x_t, h, c).unwrap();
                h = h_t;
                c = c_t;
                h_sums.push(g.sum_all(h_t).unwrap());
            }
            let mut loss = h_sums[0];
            for &s in &h_sums[1..] {
                loss = g.add(loss, s).unwrap();
            }
            (g, loss, ids)
        };

        let (mut g, loss, ids) = build(&params);
        g.backward(loss).unwrap();
        let analytic: Vec<Tensor> = ids.iter().map(|&id| g.grad(id).unwrap().clone()).collect();

        let numeric = finite_difference_gradients(&params, 1e-5, |p| {
            let (g, loss, _) = build(p);
            Ok(g.value(loss).data()[0])
        })
        .unwrap();

        let err = max_relative_error(&analytic, &numeric, 1e-8);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn structural_ops_roundtrip_gradients() {
        // concat/column/sum_rows wiring: loss = sum(sum_rows(concat_cols(cols of X)))
        // must reproduce dX = ones.
        let x_val = Tensor::from_fn(&[3, 4], |i| i as f64 * 0.1);
        let mut g = Graph::new();
        let x = g.param(x_val).unwrap();
        let cols: Vec<NodeId> = (0..4).map(|t| g.column(x, t).unwrap()).collect();
        let back = g.concat_cols(&cols).unwrap();
        let rows = g.sum_rows(back).unwrap();
        let loss = g.sum_all(rows).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(x).unwrap().data().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }
}
