//! Dense multilayer perceptrons used for every network in the stack.

use crate::error::{Error, Result};
use crate::numcore::tensor::{self, Tensor};
use crate::numcore::{NodeId, Tape};
use crate::rng::Rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// Negative-side slope of the hidden activation.
pub const LEAKY_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Linear,
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Tensor,
    pub b: Tensor,
}

impl Layer {
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w_data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| quantize_f32(rng.gen_range(-limit..limit)))
            .collect();
        Layer {
            w: Tensor::new(vec![fan_in, fan_out], w_data).expect("layer shape"),
            b: Tensor::zeros(vec![fan_out]),
        }
    }
}

/// Snap a value onto the f32 grid. Parameters are kept f32-representable so
/// that the f32 on-disk format round-trips bit-exactly.
pub fn quantize_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Fully-connected network: leaky-ReLU hidden layers and a configurable
/// output head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub head: Head,
}

impl Mlp {
    pub fn init(sizes: &[usize], head: Head, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::contract(format!(
                "mlp needs at least input and output sizes, got {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|pair| Layer::init(pair[0], pair[1], rng))
            .collect();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            layers,
            head,
        })
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.numel() + l.b.numel())
            .sum()
    }

    /// Pure forward pass over a `[m, input]` batch.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.shape()[1] != self.input_width() {
            return Err(Error::Dimension {
                op: "mlp_apply",
                lhs: x.shape().to_vec(),
                rhs: vec![x.shape().first().copied().unwrap_or(0), self.input_width()],
            });
        }
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = tensor::add_row(&tensor::matmul(&h, &layer.w)?, &layer.b)?;
            if i < last {
                h = tensor::leaky_relu(&h, LEAKY_ALPHA);
            }
        }
        Ok(match self.head {
            Head::Linear => h,
            Head::Sigmoid => tensor::sigmoid(&h),
            Head::Softmax => tensor::softmax_rows(&h)?,
        })
    }

    /// Tape forward pass; `params` are the leaf ids of this network's layers
    /// in `param_tensors` order.
    pub fn forward_on_tape(&self, tape: &mut Tape, x: NodeId, params: &[NodeId]) -> Result<NodeId> {
        debug_assert_eq!(params.len(), self.layers.len() * 2);
        let mut h = x;
        let last = self.layers.len() - 1;
        for i in 0..self.layers.len() {
            let wm = tape.matmul(h, params[2 * i])?;
            h = tape.add_row(wm, params[2 * i + 1])?;
            if i < last {
                h = tape.leaky_relu(h, LEAKY_ALPHA);
            }
        }
        Ok(match self.head {
            Head::Linear => h,
            Head::Sigmoid => tape.sigmoid(h),
            Head::Softmax => tape.softmax_rows(h)?,
        })
    }

    pub fn param_tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.w, &l.b])
            .collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    /// Register every parameter as a tape leaf, in `param_tensors` order.
    pub fn leaves(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.param_tensors()
            .into_iter()
            .map(|t| tape.leaf(t.clone()))
            .collect()
    }
}
