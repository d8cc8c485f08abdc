//! Wengert tape: reverse-mode differentiation over the fixed matrix
//! operation set.
//!
//! Operations are recorded eagerly during the forward pass, each node storing
//! its output value. The backward sweep visits nodes in exact reverse order
//! of recording and accumulates gradients for every node marked as a
//! parameter. Forward values are produced by the same [`Matrix`] routines the
//! rest of the crate uses, so a taped forward pass is bit-identical to the
//! plain one.
//!
//! Derivative conventions: max(x, 0) has derivative 0 at the kink, and the
//! row-threshold op (see [`RowThresholdData`]) differentiates through the
//! saved support as a piecewise-affine map.

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Index of a recorded node.
pub type NodeId = usize;

/// How a row-threshold node maps upstream gradients back to its cost input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowThresholdKind {
    /// Rows were thresholded against a fixed per-row shift; the map is an
    /// independent rescaling on the support.
    FixedShift,
    /// Rows were projected onto the probability simplex; the map removes the
    /// support mean before rescaling.
    SimplexActiveSet,
}

/// Saved data for a row-threshold node over an n-by-n cost matrix.
///
/// Forward semantics per row `i`, off-diagonal entries only:
/// `s[i][j] = -c[i][j]/two_gamma[i] + shift[i]` for `j` in `support[i]`,
/// zero elsewhere (including the diagonal).
#[derive(Debug, Clone)]
pub struct RowThresholdData {
    pub kind: RowThresholdKind,
    /// Per-row divisor 2*gamma_i applied to the cost entries.
    pub two_gamma: Vec<f64>,
    /// Per-row additive threshold applied after the rescale.
    pub shift: Vec<f64>,
    /// Per-row indices with strictly positive output.
    pub support: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    RowSoftmax(NodeId),
    LnClamped(NodeId, f64),
    SumAll(NodeId),
    RowThreshold(NodeId, RowThresholdData),
}

struct Node {
    op: Op,
    value: Matrix,
    param: bool,
}

/// Ordered record of primitive operations with saved forward values.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients per recorded node, produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    /// Removes and returns the gradient for `id`, if any flowed to it.
    pub fn take(&mut self, id: NodeId) -> Option<Matrix> {
        self.grads.get_mut(id).and_then(|g| g.take())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a recorded node.
    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id].value
    }

    pub fn is_param(&self, id: NodeId) -> bool {
        self.nodes[id].param
    }

    fn push(&mut self, op: Op, value: Matrix, param: bool) -> NodeId {
        self.nodes.push(Node { op, value, param });
        self.nodes.len() - 1
    }

    /// Registers a trainable parameter leaf; `backward` reports its gradient.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// Registers a constant leaf; gradients do not flow past it.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value, false))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value, false)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value, false))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(Op::Hadamard(a, b), value, false))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), value, false)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).relu();
        self.push(Op::Relu(a), value, false)
    }

    pub fn rowwise_softmax(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).rowwise_softmax();
        self.push(Op::RowSoftmax(a), value, false)
    }

    pub fn ln_clamped(&mut self, a: NodeId, floor: f64) -> NodeId {
        let value = self.value(a).ln_clamped(floor);
        self.push(Op::LnClamped(a, floor), value, false)
    }

    /// Total sum reduction to a 1x1 node.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let value = Matrix::from_fn(1, 1, |_, _| self.value(a).sum());
        self.push(Op::SumAll(a), value, false)
    }

    /// Records a row-threshold node whose forward value was computed by the
    /// caller from `self.value(input)`. The saved data must describe that
    /// value exactly; `replay_matches` verifies this.
    pub fn push_row_threshold(
        &mut self,
        input: NodeId,
        value: Matrix,
        data: RowThresholdData,
    ) -> NodeId {
        self.push(Op::RowThreshold(input, data), value, false)
    }

    /// Reverse sweep from a scalar loss node. Returns gradients for every
    /// node reached; parameter gradients are the intended outputs.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_val = self.value(loss);
        if loss_val.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a scalar (1x1) loss node, got {}x{}",
                loss_val.rows(),
                loss_val.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Matrix::from_fn(1, 1, |_, _| 1.0));

        for id in (0..=loss).rev() {
            // Take to release the borrow while accumulating into operands;
            // restored below so callers can read every node's gradient.
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.transpose());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Hadamard(a, b) => {
                    let da = g.hadamard(self.value(*b))?;
                    let db = g.hadamard(self.value(*a))?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, f) => {
                    accumulate(&mut grads, *a, g.scale(*f));
                }
                Op::Relu(a) => {
                    // Derivative 0 at the kink: strict positivity mask.
                    let input = self.value(*a);
                    let da = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                        if input.get(i, j) > 0.0 {
                            g.get(i, j)
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::RowSoftmax(a) => {
                    let z = self.value(id);
                    let mut da = Matrix::zeros(g.rows(), g.cols());
                    for i in 0..g.rows() {
                        let mut dot = 0.0;
                        for j in 0..g.cols() {
                            dot += g.get(i, j) * z.get(i, j);
                        }
                        for j in 0..g.cols() {
                            da.set(i, j, z.get(i, j) * (g.get(i, j) - dot));
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::LnClamped(a, floor) => {
                    let input = self.value(*a);
                    let da = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                        let x = input.get(i, j);
                        if x > *floor {
                            g.get(i, j) / x
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::SumAll(a) => {
                    let upstream = g.get(0, 0);
                    let shape = self.value(*a).shape();
                    let da = Matrix::from_fn(shape.0, shape.1, |_, _| upstream);
                    accumulate(&mut grads, *a, da);
                }
                Op::RowThreshold(a, data) => {
                    let mut da = Matrix::zeros(g.rows(), g.cols());
                    for i in 0..g.rows() {
                        let support = &data.support[i];
                        if support.is_empty() {
                            continue;
                        }
                        let tg = data.two_gamma[i];
                        match data.kind {
                            RowThresholdKind::FixedShift => {
                                for &j in support {
                                    da.set(i, j, -g.get(i, j) / tg);
                                }
                            }
                            RowThresholdKind::SimplexActiveSet => {
                                let mut mean = 0.0;
                                for &j in support {
                                    mean += g.get(i, j);
                                }
                                mean /= support.len() as f64;
                                for &j in support {
                                    da.set(i, j, -(g.get(i, j) - mean) / tg);
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Replays every recorded operation from its operands and checks that
    /// the stored outputs are reproduced bit for bit.
    pub fn replay_matches(&self) -> bool {
        for node in &self.nodes {
            let recomputed = match &node.op {
                Op::Leaf => continue,
                Op::MatMul(a, b) => self.value(*a).matmul(self.value(*b)).unwrap(),
                Op::Transpose(a) => self.value(*a).transpose(),
                Op::Add(a, b) => self.value(*a).add(self.value(*b)).unwrap(),
                Op::Hadamard(a, b) => self.value(*a).hadamard(self.value(*b)).unwrap(),
                Op::Scale(a, f) => self.value(*a).scale(*f),
                Op::Relu(a) => self.value(*a).relu(),
                Op::RowSoftmax(a) => self.value(*a).rowwise_softmax(),
                Op::LnClamped(a, floor) => self.value(*a).ln_clamped(*floor),
                Op::SumAll(a) => Matrix::from_fn(1, 1, |_, _| self.value(*a).sum()),
                Op::RowThreshold(a, data) => {
                    let c = self.value(*a);
                    let mut s = Matrix::zeros(c.rows(), c.cols());
                    for i in 0..c.rows() {
                        for &j in &data.support[i] {
                            s.set(i, j, -c.get(i, j) / data.two_gamma[i] + data.shift[i]);
                        }
                    }
                    s
                }
            };
            if recomputed != node.value {
                return false;
            }
        }
        true
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: NodeId, delta: Matrix) {
    match &mut grads[id] {
        Some(g) => {
            *g = g.add(&delta).expect("gradient shapes match by construction");
        }
        slot @ None => *slot = Some(delta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap());
        let loss = tape.sum_all(w);
        let grads = tape.backward(loss).unwrap();
        let gw = grads.get(w).unwrap();
        assert_eq!(gw.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn relu_gradient_is_sign_mask() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::from_rows(&[vec![-1.0, 2.0], vec![3.0, -4.0]]).unwrap());
        let r = tape.relu(w);
        let loss = tape.sum_all(r);
        let grads = tape.backward(loss).unwrap();
        let gw = grads.get(w).unwrap();
        assert_eq!(gw.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let w = tape.param(Matrix::zeros(2, 2));
        let err = tape.backward(w).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn replay_reproduces_recorded_values() {
        let mut tape = Tape::new();
        let a = tape.param(Matrix::from_rows(&[vec![0.3, -1.2], vec![2.0, 0.7]]).unwrap());
        let b = tape.constant(Matrix::from_rows(&[vec![1.5, 0.0], vec![-0.4, 2.2]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        let d = tape.relu(c);
        let e = tape.rowwise_softmax(d);
        let f = tape.ln_clamped(e, 1e-12);
        let _ = tape.sum_all(f);
        assert!(tape.replay_matches());
    }

    #[test]
    fn gradient_accumulates_over_repeated_use() {
        // loss = sum(W + W) => gradient 2 everywhere.
        let mut tape = Tape::new();
        let w = tape.param(Matrix::zeros(2, 3));
        let s = tape.add(w, w).unwrap();
        let loss = tape.sum_all(s);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(w).unwrap().as_slice().iter().all(|&v| v == 2.0));
    }
}
