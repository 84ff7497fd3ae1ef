//! Training loops: the Wasserstein-regularized generative stack with weight
//! clipping, and the audited target classifier.

use super::bundle::{argmax, GanMode, LossWeights, ModelBundle, TargetModel};
use super::losses::{critic_loss_graph, generator_loss_graph};
use super::mlp::quantize_f32;
use crate::data::{AnnotatedDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::numcore::{Tape, Tensor};
use crate::rng::{rng_from_seed, Rng};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weights: LossWeights,
    /// Critic weights are clipped to `[-critic_clip, critic_clip]` after
    /// every critic update.
    pub critic_clip: f64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            weights: LossWeights {
                lambda_rec: 10.0,
                lambda_att: 1.0,
                lambda_cls: 1.0,
            },
            critic_clip: 0.01,
            n_critic: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub generator: f64,
    pub critic: f64,
    pub reconstruction: f64,
}

/// Plain SGD with momentum. Updated parameters are snapped to the f32 grid
/// so trained models serialize bit-exactly in the f32 file format.
struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<Tensor>,
}

impl Sgd {
    fn new(lr: f64, momentum: f64, params: &[&Tensor]) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: params
                .iter()
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect(),
        }
    }

    fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) {
        debug_assert_eq!(params.len(), grads.len());
        for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.velocity) {
            for ((pv, gv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(v.data_mut().iter_mut())
            {
                *vv = self.momentum * *vv + gv;
                *pv = quantize_f32(*pv - self.lr * *vv);
            }
        }
    }
}

/// Uniform draw from the attribute prior `[0,1]^n`.
pub fn sample_attribute_prior(rng: &mut Rng, n: usize) -> super::bundle::AttributeVector {
    let values: Vec<f64> = (0..n).map(|_| quantize_f32(rng.gen_range(0.0..1.0))).collect();
    super::bundle::AttributeVector::new(values).expect("uniform draw is in range")
}

fn sample_attribute_matrix(rng: &mut Rng, rows: usize, n: usize) -> Tensor {
    let data: Vec<f64> = (0..rows * n)
        .map(|_| quantize_f32(rng.gen_range(0.0..1.0)))
        .collect();
    Tensor::new(vec![rows, n], data).expect("attribute matrix")
}

fn collect_grads(tape: &Tape, params: &[crate::numcore::NodeId]) -> Vec<Tensor> {
    params.iter().map(|&id| tape.grad(id).clone()).collect()
}

fn generator_params_mut(bundle: &mut ModelBundle) -> Vec<&mut Tensor> {
    let ModelBundle { enc, dec, .. } = bundle;
    let mut out = enc.param_tensors_mut();
    out.extend(dec.param_tensors_mut());
    out
}

fn critic_params_mut(bundle: &mut ModelBundle) -> Vec<&mut Tensor> {
    let critic = &mut bundle.critic;
    let mut out = Vec::new();
    for layer in &mut critic.trunk {
        out.push(&mut layer.w);
        out.push(&mut layer.b);
    }
    for layer in [&mut critic.score, &mut critic.attrs, &mut critic.plaus] {
        out.push(&mut layer.w);
        out.push(&mut layer.b);
    }
    out
}

fn clip_critic(bundle: &mut ModelBundle, c: f64) {
    let critic = &mut bundle.critic;
    let clip = |t: &mut Tensor| {
        for v in t.data_mut() {
            *v = v.clamp(-c, c);
        }
    };
    for layer in &mut critic.trunk {
        clip(&mut layer.w);
        clip(&mut layer.b);
    }
    clip(&mut critic.score.w);
    clip(&mut critic.score.b);
}

/// Train the generative stack on the selected instances with alternating
/// critic and generator updates (`n_critic` critic steps per generator step).
pub fn train(
    bundle: &mut ModelBundle,
    dataset: &AnnotatedDataset,
    indices: &[usize],
    config: &TrainConfig,
) -> Result<Vec<EpochLosses>> {
    if indices.is_empty() {
        return Err(Error::contract("training split is empty"));
    }
    config.weights.validate()?;
    if bundle.spec.mode == GanMode::Conditional && dataset.attr_count() != bundle.spec.attr_count {
        return Err(Error::contract(format!(
            "dataset has {} attributes, bundle expects {}",
            dataset.attr_count(),
            bundle.spec.attr_count
        )));
    }

    let mut rng = rng_from_seed(config.seed);
    let gen_param_refs: Vec<&Tensor> = bundle
        .enc
        .param_tensors()
        .into_iter()
        .chain(bundle.dec.param_tensors())
        .collect();
    let mut gen_opt = Sgd::new(config.learning_rate, config.momentum, &gen_param_refs);
    drop(gen_param_refs);
    let critic_param_refs: Vec<&Tensor> = {
        let c = &bundle.critic;
        c.trunk
            .iter()
            .flat_map(|l| [&l.w, &l.b])
            .chain([&c.score, &c.attrs, &c.plaus].into_iter().flat_map(|l| [&l.w, &l.b]))
            .collect()
    };
    let mut critic_opt = Sgd::new(config.learning_rate, config.momentum, &critic_param_refs);
    drop(critic_param_refs);

    let attr_count = bundle.spec.attr_count;
    let mut history = Vec::with_capacity(config.epochs);
    let mut d_steps_since_g = 0usize;

    for epoch in 0..config.epochs {
        let mut order = indices.to_vec();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut g_sum = 0.0;
        let mut g_count = 0usize;
        let mut d_sum = 0.0;
        let mut d_count = 0usize;
        let mut rec_sum = 0.0;

        for chunk in order.chunks(config.batch_size) {
            let images = dataset.images_matrix(chunk)?;
            let attrs = dataset.attrs_matrix(chunk)?;

            // Critic step; the generator output is a constant here.
            let sampled = sample_attribute_matrix(&mut rng, chunk.len(), attr_count);
            let z = bundle.encode(&images)?;
            let generated = match bundle.spec.mode {
                GanMode::Conditional => bundle.decode(&z, &sampled)?,
                GanMode::NonConditional => bundle.decode(&z, &attrs)?,
            };
            let mut graph =
                critic_loss_graph(bundle, &images, &attrs, &generated, &config.weights, true)?;
            let d_loss = graph.tape.value(graph.loss).item();
            if !d_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("critic loss is {d_loss}"),
                });
            }
            graph.tape.backward(graph.loss)?;
            let grads = collect_grads(&graph.tape, &graph.params);
            critic_opt.step(critic_params_mut(bundle), &grads);
            clip_critic(bundle, config.critic_clip);
            d_sum += d_loss;
            d_count += 1;
            d_steps_since_g += 1;

            if d_steps_since_g >= config.n_critic {
                d_steps_since_g = 0;
                let sampled = sample_attribute_matrix(&mut rng, chunk.len(), attr_count);
                let mut graph =
                    generator_loss_graph(bundle, &images, &attrs, &sampled, &config.weights)?;
                let g_loss = graph.tape.value(graph.loss).item();
                if !g_loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        message: format!("generator loss is {g_loss}"),
                    });
                }
                graph.tape.backward(graph.loss)?;
                let grads = collect_grads(&graph.tape, &graph.params);
                gen_opt.step(generator_params_mut(bundle), &grads);
                g_sum += g_loss;
                rec_sum += graph.reconstruction;
                g_count += 1;
            }
        }

        history.push(EpochLosses {
            generator: if g_count > 0 { g_sum / g_count as f64 } else { 0.0 },
            critic: if d_count > 0 { d_sum / d_count as f64 } else { 0.0 },
            reconstruction: if g_count > 0 {
                rec_sum / g_count as f64
            } else {
                0.0
            },
        });
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetTrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TargetTrainConfig {
    fn default() -> Self {
        TargetTrainConfig {
            hidden: vec![32],
            epochs: 10,
            batch_size: 16,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// Train the audited classifier on the `target_train` split and report its
/// accuracy on the `target_holdout` split. The plan must be leak-free.
pub fn train_target(
    dataset: &AnnotatedDataset,
    plan: &SplitPlan,
    config: &TargetTrainConfig,
) -> Result<(TargetModel, f64)> {
    plan.validate(None)?;
    if plan.target_train.is_empty() || plan.target_holdout.is_empty() {
        return Err(Error::contract(
            "target training needs non-empty train and holdout splits",
        ));
    }

    let n_classes = dataset.class_count();
    let mut model = TargetModel::init(
        dataset.pixel_count(),
        &config.hidden,
        dataset.class_labels.clone(),
        config.seed,
    )?;
    let mut rng = rng_from_seed(crate::rng::derive_seed(config.seed, 1));
    let param_refs: Vec<&Tensor> = model.net.param_tensors();
    let mut opt = Sgd::new(config.learning_rate, config.momentum, &param_refs);
    drop(param_refs);

    for epoch in 0..config.epochs {
        let mut order = plan.target_train.clone();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(config.batch_size) {
            let images = dataset.images_matrix(chunk)?;
            let labels = dataset.labels(chunk)?;
            let mut onehot = vec![0.0; chunk.len() * n_classes];
            for (r, &label) in labels.iter().enumerate() {
                onehot[r * n_classes + label] = 1.0;
            }
            let targets = Tensor::new(vec![chunk.len(), n_classes], onehot)?;

            let mut tape = Tape::new();
            let x = tape.leaf(images);
            let params = model.net.leaves(&mut tape);
            let probs = model.net.forward_on_tape(&mut tape, x, &params)?;
            let ce = tape.xent_elem(probs, targets)?;
            let summed = tape.sum(ce);
            let loss = tape.scale(summed, 1.0 / chunk.len() as f64);
            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("classifier loss is {loss_value}"),
                });
            }
            tape.backward(loss)?;
            let grads = collect_grads(&tape, &params);
            opt.step(model.net.param_tensors_mut(), &grads);
        }
    }

    let holdout_images = dataset.images_matrix(&plan.target_holdout)?;
    let holdout_labels = dataset.labels(&plan.target_holdout)?;
    let probs = model.predict(&holdout_images)?;
    let mut correct = 0usize;
    for (r, &label) in holdout_labels.iter().enumerate() {
        let row = &probs.data()[r * n_classes..(r + 1) * n_classes];
        if argmax(row) == label {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / holdout_labels.len() as f64;
    Ok((model, accuracy))
}
