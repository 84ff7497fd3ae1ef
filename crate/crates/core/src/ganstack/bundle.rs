//! The trained model ensemble: generator encoder/decoder, critic with a
//! shared attribute-classifier trunk, and the audited target model.

use super::mlp::{Head, Layer, Mlp, LEAKY_ALPHA};
use crate::error::{Error, Result};
use crate::numcore::tensor::{self, Tensor};
use crate::numcore::{NodeId, Tape};
use crate::rng::{rng_from_seed, Rng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanMode {
    Conditional,
    NonConditional,
}

/// Nonnegative weights balancing the training loss terms: reconstruction,
/// generator attribute matching, and classifier attribute matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_rec: f64,
    pub lambda_att: f64,
    pub lambda_cls: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_rec", self.lambda_rec),
            ("lambda_att", self.lambda_att),
            ("lambda_cls", self.lambda_cls),
        ] {
            if !(v >= 0.0) {
                return Err(Error::contract(format!(
                    "loss weight {name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Conditioning values in `[0,1]^N` attached to an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector(Vec<f64>);

impl AttributeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::contract(format!(
                "attribute value {v} outside [0, 1]"
            )));
        }
        Ok(AttributeVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_tensor(&self) -> Tensor {
        Tensor::new(vec![1, self.0.len()], self.0.clone()).expect("attribute row")
    }
}

/// Critic with a shared trunk and three heads: a raw score used by the
/// Wasserstein losses, a bounded plausibility score in `[0,1]`, and
/// per-attribute predictions. Sharing the trunk means an update through any
/// head moves the same storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub trunk_sizes: Vec<usize>,
    pub trunk: Vec<Layer>,
    pub score: Layer,
    pub plaus: Layer,
    pub attrs: Layer,
}

impl Critic {
    pub fn init(input: usize, hidden: &[usize], attr_count: usize, rng: &mut Rng) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::contract("critic needs at least one hidden layer"));
        }
        let mut trunk_sizes = vec![input];
        trunk_sizes.extend_from_slice(hidden);
        let trunk = trunk_sizes
            .windows(2)
            .map(|p| Layer::init(p[0], p[1], rng))
            .collect();
        let feat = *hidden.last().unwrap();
        Ok(Critic {
            trunk_sizes,
            trunk,
            score: Layer::init(feat, 1, rng),
            plaus: Layer::init(feat, 1, rng),
            attrs: Layer::init(feat, attr_count, rng),
        })
    }

    /// Pure trunk features for a `[m, input]` batch; every layer is followed
    /// by the leaky hidden activation.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.trunk {
            h = tensor::leaky_relu(
                &tensor::add_row(&tensor::matmul(&h, &layer.w)?, &layer.b)?,
                LEAKY_ALPHA,
            );
        }
        Ok(h)
    }

    /// Raw critic scores, `[m, 1]`.
    pub fn score(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.features(x)?;
        tensor::add_row(&tensor::matmul(&f, &self.score.w)?, &self.score.b)
    }

    /// Plausibility in `[0,1]`, `[m, 1]`.
    pub fn plausibility(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.features(x)?;
        Ok(tensor::sigmoid(&tensor::add_row(
            &tensor::matmul(&f, &self.plaus.w)?,
            &self.plaus.b,
        )?))
    }

    /// Per-attribute sigmoid predictions, `[m, attr_count]`.
    pub fn predict_attrs(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.features(x)?;
        Ok(tensor::sigmoid(&tensor::add_row(
            &tensor::matmul(&f, &self.attrs.w)?,
            &self.attrs.b,
        )?))
    }

    pub fn trunk_leaves(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.trunk
            .iter()
            .flat_map(|l| [tape.leaf(l.w.clone()), tape.leaf(l.b.clone())])
            .collect()
    }

    pub fn features_on_tape(
        &self,
        tape: &mut Tape,
        x: NodeId,
        trunk_params: &[NodeId],
    ) -> Result<NodeId> {
        let mut h = x;
        for i in 0..self.trunk.len() {
            let wm = tape.matmul(h, trunk_params[2 * i])?;
            let lin = tape.add_row(wm, trunk_params[2 * i + 1])?;
            h = tape.leaky_relu(lin, LEAKY_ALPHA);
        }
        Ok(h)
    }

    pub fn head_on_tape(
        tape: &mut Tape,
        features: NodeId,
        w: NodeId,
        b: NodeId,
        sigmoid: bool,
    ) -> Result<NodeId> {
        let wm = tape.matmul(features, w)?;
        let lin = tape.add_row(wm, b)?;
        Ok(if sigmoid { tape.sigmoid(lin) } else { lin })
    }
}

/// Desk-scale network shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleSpec {
    pub mode: GanMode,
    pub image_shape: Vec<usize>,
    pub latent_width: usize,
    pub attr_count: usize,
    pub hidden: Vec<usize>,
}

impl Default for BundleSpec {
    fn default() -> Self {
        BundleSpec {
            mode: GanMode::Conditional,
            image_shape: vec![16, 16, 3],
            latent_width: 32,
            attr_count: 5,
            hidden: vec![256, 64],
        }
    }
}

impl BundleSpec {
    pub fn pixel_count(&self) -> usize {
        self.image_shape.iter().product()
    }

    pub fn decoder_input_width(&self) -> usize {
        match self.mode {
            GanMode::Conditional => self.latent_width + self.attr_count,
            GanMode::NonConditional => self.latent_width,
        }
    }
}

/// The four trained networks of the generative stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub spec: BundleSpec,
    pub enc: Mlp,
    pub dec: Mlp,
    pub critic: Critic,
    pub seed: u64,
}

impl ModelBundle {
    pub fn init(spec: BundleSpec, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let pixels = spec.pixel_count();

        let mut enc_sizes = vec![pixels];
        enc_sizes.extend_from_slice(&spec.hidden);
        enc_sizes.push(spec.latent_width);

        let mut dec_sizes = vec![spec.decoder_input_width()];
        dec_sizes.extend(spec.hidden.iter().rev());
        dec_sizes.push(pixels);

        let enc = Mlp::init(&enc_sizes, Head::Linear, &mut rng)?;
        let dec = Mlp::init(&dec_sizes, Head::Sigmoid, &mut rng)?;
        let critic = Critic::init(pixels, &spec.hidden, spec.attr_count, &mut rng)?;
        Ok(ModelBundle {
            spec,
            enc,
            dec,
            critic,
            seed,
        })
    }

    /// Flatten an image tensor into a single-row batch.
    pub fn image_row(&self, image: &Tensor) -> Result<Tensor> {
        let pixels = self.spec.pixel_count();
        if image.numel() != pixels {
            return Err(Error::Dimension {
                op: "image_row",
                lhs: image.shape().to_vec(),
                rhs: self.spec.image_shape.clone(),
            });
        }
        image.reshaped(vec![1, pixels])
    }

    /// Encode a `[m, pixels]` batch into `[m, latent]` codes.
    pub fn encode(&self, images: &Tensor) -> Result<Tensor> {
        self.enc.apply(images)
    }

    /// Decode latent codes, conditioned on attributes in conditional mode.
    /// The output is a `[m, pixels]` batch of images in `[0,1]`.
    pub fn decode(&self, latents: &Tensor, attrs: &Tensor) -> Result<Tensor> {
        match self.spec.mode {
            GanMode::Conditional => {
                if attrs.shape().len() != 2 || attrs.shape()[1] != self.spec.attr_count {
                    return Err(Error::Dimension {
                        op: "decode_attrs",
                        lhs: attrs.shape().to_vec(),
                        rhs: vec![latents.shape()[0], self.spec.attr_count],
                    });
                }
                self.dec.apply(&tensor::concat_cols(latents, attrs)?)
            }
            GanMode::NonConditional => self.dec.apply(latents),
        }
    }

    /// Named parameters in serialization order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        push_mlp_params(&mut out, "enc", &self.enc);
        push_mlp_params(&mut out, "dec", &self.dec);
        for (i, layer) in self.critic.trunk.iter().enumerate() {
            out.push((format!("critic.trunk.w{i}"), &layer.w));
            out.push((format!("critic.trunk.b{i}"), &layer.b));
        }
        for (name, layer) in [
            ("score", &self.critic.score),
            ("plaus", &self.critic.plaus),
            ("attrs", &self.critic.attrs),
        ] {
            out.push((format!("critic.{name}.w"), &layer.w));
            out.push((format!("critic.{name}.b"), &layer.b));
        }
        out
    }
}

fn push_mlp_params<'a>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, mlp: &'a Mlp) {
    for (i, layer) in mlp.layers.iter().enumerate() {
        out.push((format!("{prefix}.w{i}"), &layer.w));
        out.push((format!("{prefix}.b{i}"), &layer.b));
    }
}

/// The audited black-box classifier, accessed only through its softmax
/// output.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    pub net: Mlp,
    pub labels: Vec<String>,
    pub seed: u64,
}

impl TargetModel {
    pub fn init(input: usize, hidden: &[usize], labels: Vec<String>, seed: u64) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::contract("target model needs at least two classes"));
        }
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(labels.len());
        let mut rng = rng_from_seed(seed);
        Ok(TargetModel {
            net: Mlp::init(&sizes, Head::Softmax, &mut rng)?,
            labels,
            seed,
        })
    }

    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    /// Softmax class distribution for a `[m, pixels]` batch.
    pub fn predict(&self, images: &Tensor) -> Result<Tensor> {
        self.net.apply(images)
    }

    /// Predicted class index and softmax row for one flattened image row.
    pub fn predict_one(&self, image_row: &Tensor) -> Result<(usize, Vec<f64>)> {
        let probs = self.predict(image_row)?;
        let row = probs.data().to_vec();
        let class = argmax(&row);
        Ok((class, row))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
