//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation together with its parents. Nodes are
//! appended in execution order, so parents always precede children and the
//! backward sweep is a single reverse pass that visits each node exactly once.
//! Leaves with no path to the loss keep an exactly-zero gradient.

use super::tensor::{self, clamp_prob, Tensor, LOG_EPS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    ConcatCols(NodeId, NodeId),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    SoftmaxRows(NodeId),
    Abs(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Scale(NodeId, f64),
    Neg(NodeId),
    /// Elementwise -t*ln(p) with clamped p; the target is a constant.
    XentElem(NodeId, Tensor),
    /// Elementwise binary cross-entropy against a constant target.
    BceElem(NodeId, Tensor),
}

struct Node {
    value: Tensor,
    op: Op,
    grad: Option<Tensor>,
}

pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated at `id`; valid after [`Tape::backward`].
    pub fn grad(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0]
            .grad
            .as_ref()
            .expect("grad queried before backward")
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op,
            grad: None,
        });
        id
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = tensor::add_row(self.value(a), self.value(bias))?;
        Ok(self.push(v, Op::AddRow(a, bias)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::mul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::concat_cols(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    pub fn leaky_relu(&mut self, x: NodeId, alpha: f64) -> NodeId {
        let v = tensor::leaky_relu(self.value(x), alpha);
        self.push(v, Op::LeakyRelu(x, alpha))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = tensor::sigmoid(self.value(x));
        self.push(v, Op::Sigmoid(x))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let v = tensor::softmax_rows(self.value(x))?;
        Ok(self.push(v, Op::SoftmaxRows(x)))
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        let v = tensor::abs(self.value(x));
        self.push(v, Op::Abs(x))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = tensor::mean(self.value(x));
        self.push(Tensor::scalar(v), Op::Mean(x))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let data = self.value(x).data().iter().map(|v| c * v).collect();
        let v = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(v, Op::Scale(x, c))
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.scale_op(x)
    }

    fn scale_op(&mut self, x: NodeId) -> NodeId {
        let data = self.value(x).data().iter().map(|v| -v).collect();
        let v = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(v, Op::Neg(x))
    }

    /// Elementwise -t*ln(p), the categorical cross-entropy integrand.
    pub fn xent_elem(&mut self, pred: NodeId, target: Tensor) -> Result<NodeId> {
        if target.shape() != self.value(pred).shape() {
            return Err(Error::Dimension {
                op: "xent_elem",
                lhs: target.shape().to_vec(),
                rhs: self.value(pred).shape().to_vec(),
            });
        }
        let data = self
            .value(pred)
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| -t * clamp_prob(p).ln())
            .collect();
        let v = Tensor::new(target.shape().to_vec(), data)?;
        Ok(self.push(v, Op::XentElem(pred, target)))
    }

    /// Elementwise -t*ln(p) - (1-t)*ln(1-p) against a constant target.
    pub fn bce_elem(&mut self, pred: NodeId, target: Tensor) -> Result<NodeId> {
        if target.shape() != self.value(pred).shape() {
            return Err(Error::Dimension {
                op: "bce_elem",
                lhs: target.shape().to_vec(),
                rhs: self.value(pred).shape().to_vec(),
            });
        }
        let data = self
            .value(pred)
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| -t * clamp_prob(p).ln() - (1.0 - t) * clamp_prob(1.0 - p).ln())
            .collect();
        let v = Tensor::new(target.shape().to_vec(), data)?;
        Ok(self.push(v, Op::BceElem(pred, target)))
    }

    /// Back-propagate from a scalar loss node, accumulating gradients on every
    /// node that has a path to it.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        for node in &mut self.nodes {
            node.grad = Some(Tensor::zeros(node.value.shape().to_vec()));
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));

        for i in (0..self.nodes.len()).rev() {
            let grad = self.nodes[i].grad.clone().expect("allocated above");
            if grad.data().iter().all(|&g| g == 0.0) {
                continue;
            }
            match self.nodes[i].op.clone() {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let at = transpose(self.value(a));
                    let bt = transpose(self.value(b));
                    let da = tensor::matmul(&grad, &bt)?;
                    let db = tensor::matmul(&at, &grad)?;
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Add(a, b) => {
                    self.accumulate(a, &grad);
                    self.accumulate(b, &grad);
                }
                Op::AddRow(a, bias) => {
                    self.accumulate(a, &grad);
                    let n = self.value(bias).numel();
                    let mut db = vec![0.0; n];
                    for (j, g) in grad.data().iter().enumerate() {
                        db[j % n] += g;
                    }
                    self.accumulate(bias, &Tensor::new(vec![n], db)?);
                }
                Op::Sub(a, b) => {
                    self.accumulate(a, &grad);
                    let neg: Vec<f64> = grad.data().iter().map(|g| -g).collect();
                    self.accumulate(b, &Tensor::new(grad.shape().to_vec(), neg)?);
                }
                Op::Mul(a, b) => {
                    let da = tensor::mul(&grad, self.value(b))?;
                    let db = tensor::mul(&grad, self.value(a))?;
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::ConcatCols(a, b) => {
                    let (m, na) = (self.value(a).shape()[0], self.value(a).shape()[1]);
                    let nb = self.value(b).shape()[1];
                    let w = na + nb;
                    let mut da = vec![0.0; m * na];
                    let mut db = vec![0.0; m * nb];
                    for r in 0..m {
                        da[r * na..(r + 1) * na]
                            .copy_from_slice(&grad.data()[r * w..r * w + na]);
                        db[r * nb..(r + 1) * nb]
                            .copy_from_slice(&grad.data()[r * w + na..(r + 1) * w]);
                    }
                    self.accumulate(a, &Tensor::new(vec![m, na], da)?);
                    self.accumulate(b, &Tensor::new(vec![m, nb], db)?);
                }
                Op::LeakyRelu(x, alpha) => {
                    let dx: Vec<f64> = grad
                        .data()
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(&g, &v)| if v >= 0.0 { g } else { alpha * g })
                        .collect();
                    self.accumulate(x, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
                Op::Sigmoid(x) => {
                    let dx: Vec<f64> = grad
                        .data()
                        .iter()
                        .zip(self.nodes[i].value.data())
                        .map(|(&g, &s)| g * s * (1.0 - s))
                        .collect();
                    self.accumulate(x, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
                Op::SoftmaxRows(x) => {
                    let s = self.nodes[i].value.clone();
                    let n = s.shape()[1];
                    let mut dx = vec![0.0; s.numel()];
                    for (r, (srow, grow)) in s
                        .data()
                        .chunks(n)
                        .zip(grad.data().chunks(n))
                        .enumerate()
                    {
                        let dot: f64 = srow.iter().zip(grow).map(|(sv, gv)| sv * gv).sum();
                        for j in 0..n {
                            dx[r * n + j] = srow[j] * (grow[j] - dot);
                        }
                    }
                    self.accumulate(x, &Tensor::new(s.shape().to_vec(), dx)?);
                }
                Op::Abs(x) => {
                    let dx: Vec<f64> = grad
                        .data()
                        .iter()
                        .zip(self.value(x).data())
                        .map(|(&g, &v)| {
                            if v > 0.0 {
                                g
                            } else if v < 0.0 {
                                -g
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    self.accumulate(x, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
                Op::Sum(x) => {
                    let g = grad.item();
                    let shape = self.value(x).shape().to_vec();
                    let n: usize = shape.iter().product();
                    self.accumulate(x, &Tensor::new(shape, vec![g; n])?);
                }
                Op::Mean(x) => {
                    let shape = self.value(x).shape().to_vec();
                    let n: usize = shape.iter().product();
                    let g = grad.item() / n as f64;
                    self.accumulate(x, &Tensor::new(shape, vec![g; n])?);
                }
                Op::Scale(x, c) => {
                    let dx: Vec<f64> = grad.data().iter().map(|g| c * g).collect();
                    self.accumulate(x, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
                Op::Neg(x) => {
                    let dx: Vec<f64> = grad.data().iter().map(|g| -g).collect();
                    self.accumulate(x, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
                Op::XentElem(pred, target) => {
                    let dx: Vec<f64> = grad
                        .data()
                        .iter()
                        .zip(self.value(pred).data().iter().zip(target.data()))
                        .map(|(&g, (&p, &t))| {
                            if p > LOG_EPS && p < 1.0 - LOG_EPS {
                                -g * t / p
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    self.accumulate(pred, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
                Op::BceElem(pred, target) => {
                    let dx: Vec<f64> = grad
                        .data()
                        .iter()
                        .zip(self.value(pred).data().iter().zip(target.data()))
                        .map(|(&g, (&p, &t))| {
                            let mut d = 0.0;
                            if p > LOG_EPS && p < 1.0 - LOG_EPS {
                                d += -t / p + (1.0 - t) / (1.0 - p);
                            }
                            g * d
                        })
                        .collect();
                    self.accumulate(pred, &Tensor::new(grad.shape().to_vec(), dx)?);
                }
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, delta: &Tensor) {
        let g = self.nodes[id.0].grad.as_mut().expect("allocated");
        for (acc, d) in g.data_mut().iter_mut().zip(delta.data()) {
            *acc += d;
        }
    }

    /// Which side of every non-smooth gate the forward pass landed on: the
    /// sign of each leaky-ReLU and abs input and the clamp state of each
    /// log argument. Two evaluations with different signatures straddle a
    /// kink, where finite differences are not a valid derivative estimate.
    pub fn kink_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::LeakyRelu(x, _) | Op::Abs(x) => {
                    sig.extend(self.nodes[x.0].value.data().iter().map(|&v| v >= 0.0));
                }
                Op::XentElem(pred, _) | Op::BceElem(pred, _) => {
                    sig.extend(
                        self.nodes[pred.0]
                            .value
                            .data()
                            .iter()
                            .map(|&p| p > LOG_EPS && p < 1.0 - LOG_EPS),
                    );
                }
                _ => {}
            }
        }
        sig
    }
}

fn transpose(t: &Tensor) -> Tensor {
    let (m, n) = (t.shape()[0], t.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = t.data()[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out).expect("transpose shape")
}
