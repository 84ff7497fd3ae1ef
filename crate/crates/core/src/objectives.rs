//! The three audit objectives evaluated for a candidate perturbation against
//! a fixed anchor: plausibility gap, adversarial power, and change intensity.
//! All three are minimized; display helpers invert the first two for
//! reporting.

use crate::analysis::metrics::ssim;
use crate::error::{Error, Result};
use crate::ganstack::{AttributeVector, ModelBundle, TargetModel};
use crate::numcore::tensor::{self, Tensor};
use serde::{Deserialize, Serialize};

/// Per-component bounds of the perturbation search space.
pub const SEARCH_BOX: (f64, f64) = (-1.0, 1.0);

/// Display threshold: a counterfactual with `1 - f_gan >= 0.5` counts as
/// plausible (boundary inclusive).
pub const PLAUSIBILITY_THRESHOLD: f64 = 0.5;

/// A perturbation added to the anchor's attribute vector, componentwise
/// within the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation(Vec<f64>);

impl Perturbation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values
            .iter()
            .find(|v| !(SEARCH_BOX.0..=SEARCH_BOX.1).contains(*v))
        {
            return Err(Error::contract(format!(
                "perturbation component {v} outside [{}, {}]",
                SEARCH_BOX.0, SEARCH_BOX.1
            )));
        }
        Ok(Perturbation(values))
    }

    pub fn zeros(n: usize) -> Self {
        Perturbation(vec![0.0; n])
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
}

/// How change intensity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityMode {
    /// Euclidean norm of the perturbation vector.
    Norm,
    /// One minus the structural similarity between anchor and counterfactual.
    Ssim,
}

/// The anchor instance under audit, with cached model outputs.
#[derive(Debug, Clone)]
pub struct AnchorContext {
    /// Flattened anchor image, `[1, pixels]`.
    pub anchor_row: Tensor,
    pub image_shape: Vec<usize>,
    pub attrs: AttributeVector,
    pub anchor_class: usize,
    pub anchor_softmax: Vec<f64>,
    /// Chosen target label for targeted audits; must differ from the anchor
    /// class.
    pub target_class: Option<usize>,
    pub anchor_plausibility: f64,
    pub anchor_raw_score: f64,
}

impl AnchorContext {
    pub fn new(
        bundle: &ModelBundle,
        target: &TargetModel,
        image: &Tensor,
        attrs: AttributeVector,
        target_class: Option<usize>,
    ) -> Result<Self> {
        if attrs.len() != bundle.spec.attr_count {
            return Err(Error::contract(format!(
                "anchor has {} attributes, bundle expects {}",
                attrs.len(),
                bundle.spec.attr_count
            )));
        }
        let anchor_row = bundle.image_row(image)?;
        let (anchor_class, anchor_softmax) = target.predict_one(&anchor_row)?;
        if let Some(t) = target_class {
            if t >= target.class_count() {
                return Err(Error::contract(format!(
                    "target class {t} out of range for {} classes",
                    target.class_count()
                )));
            }
            if t == anchor_class {
                return Err(Error::contract(format!(
                    "target class {t} equals the anchor's predicted class"
                )));
            }
        }
        let anchor_plausibility = bundle.critic.plausibility(&anchor_row)?.item();
        let anchor_raw_score = bundle.critic.score(&anchor_row)?.item();
        Ok(AnchorContext {
            anchor_row,
            image_shape: bundle.spec.image_shape.clone(),
            attrs,
            anchor_class,
            anchor_softmax,
            target_class,
            anchor_plausibility,
            anchor_raw_score,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTriple {
    pub f_gan: f64,
    pub f_adv: f64,
    pub f_att: f64,
}

impl ObjectiveTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.f_gan, self.f_adv, self.f_att]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayTriple {
    pub plausibility: f64,
    pub adversarial_power: f64,
    pub change_intensity: f64,
    pub plausible: bool,
}

/// Invert plausibility and adversarial power for display: `(1 - f_gan,
/// 1 - f_adv, f_att)`, with the plausible flag at the 0.5 threshold.
pub fn display_transform(triple: &ObjectiveTriple) -> DisplayTriple {
    let plausibility = 1.0 - triple.f_gan;
    DisplayTriple {
        plausibility,
        adversarial_power: 1.0 - triple.f_adv,
        change_intensity: triple.f_att,
        plausible: plausibility >= PLAUSIBILITY_THRESHOLD,
    }
}

/// Render the counterfactual for a perturbation: the effective attribute
/// vector is `clamp(a + delta, 0, 1)` and the image is the decoder output for
/// the anchor's latent code. Returns a `[1, pixels]` row in `[0,1]`.
pub fn render(ctx: &AnchorContext, bundle: &ModelBundle, delta: &[f64]) -> Result<Tensor> {
    if delta.len() != ctx.attrs.len() {
        return Err(Error::Dimension {
            op: "render",
            lhs: vec![delta.len()],
            rhs: vec![ctx.attrs.len()],
        });
    }
    let b: Vec<f64> = ctx
        .attrs
        .values()
        .iter()
        .zip(delta)
        .map(|(a, d)| (a + d).clamp(0.0, 1.0))
        .collect();
    let b_row = Tensor::new(vec![1, b.len()], b)?;
    let z = bundle.encode(&ctx.anchor_row)?;
    bundle.decode(&z, &b_row)
}

/// Plausibility gap between the anchor and a counterfactual, both scored by
/// the bounded plausibility head. Lower is more plausible; range `[-1, 1]`.
pub fn eval_f_gan(ctx: &AnchorContext, bundle: &ModelBundle, counterfactual: &Tensor) -> Result<f64> {
    let p = bundle.critic.plausibility(counterfactual)?.item();
    Ok(plausibility_gap(ctx.anchor_plausibility, p))
}

pub fn plausibility_gap(anchor_plausibility: f64, counterfactual_plausibility: f64) -> f64 {
    anchor_plausibility - counterfactual_plausibility
}

/// Adversarial objective from the target's softmax output. Untargeted audits
/// minimize the negated cross-entropy against the anchor class (driving mass
/// away from it); targeted audits minimize the cross-entropy against the
/// chosen target class (driving mass toward it).
pub fn eval_f_adv(
    ctx: &AnchorContext,
    target: &TargetModel,
    counterfactual: &Tensor,
) -> Result<f64> {
    let (_, softmax) = target.predict_one(counterfactual)?;
    adversarial_score(&softmax, ctx.anchor_class, ctx.target_class)
}

pub fn adversarial_score(
    softmax: &[f64],
    anchor_class: usize,
    target_class: Option<usize>,
) -> Result<f64> {
    let pred = Tensor::vector(softmax.to_vec());
    match target_class {
        None => {
            let mut onehot = vec![0.0; softmax.len()];
            onehot[anchor_class] = 1.0;
            Ok(-tensor::cross_entropy(&Tensor::vector(onehot), &pred)?)
        }
        Some(t) => {
            let mut onehot = vec![0.0; softmax.len()];
            onehot[t] = 1.0;
            tensor::cross_entropy(&Tensor::vector(onehot), &pred)
        }
    }
}

/// Change intensity in norm mode: the Euclidean norm of the perturbation.
pub fn eval_f_att(delta: &[f64]) -> f64 {
    delta.iter().map(|d| d * d).sum::<f64>().sqrt()
}

/// A fully evaluated candidate, carrying report extras alongside the triple.
#[derive(Debug, Clone)]
pub struct EvaluatedCandidate {
    pub objectives: ObjectiveTriple,
    pub image_row: Tensor,
    pub predicted_class: usize,
    pub softmax: Vec<f64>,
    /// Raw-critic difference (anchor minus counterfactual), logged for
    /// inspection alongside the bounded plausibility gap.
    pub raw_critic_gap: f64,
}

/// Evaluate all three objectives for one perturbation. Pure and
/// deterministic for fixed trained models.
pub fn evaluate(
    ctx: &AnchorContext,
    bundle: &ModelBundle,
    target: &TargetModel,
    delta: &[f64],
    mode: IntensityMode,
) -> Result<EvaluatedCandidate> {
    let image_row = render(ctx, bundle, delta)?;
    let f_gan = eval_f_gan(ctx, bundle, &image_row)?;
    let (predicted_class, softmax) = target.predict_one(&image_row)?;
    let f_adv = adversarial_score(&softmax, ctx.anchor_class, ctx.target_class)?;
    let f_att = match mode {
        IntensityMode::Norm => eval_f_att(delta),
        IntensityMode::Ssim => {
            let anchor = ctx.anchor_row.reshaped(ctx.image_shape.clone())?;
            let cf = image_row.reshaped(ctx.image_shape.clone())?;
            1.0 - ssim(&anchor, &cf)?
        }
    };
    let raw_critic_gap = ctx.anchor_raw_score - bundle.critic.score(&image_row)?.item();
    Ok(EvaluatedCandidate {
        objectives: ObjectiveTriple { f_gan, f_adv, f_att },
        image_row,
        predicted_class,
        softmax,
        raw_critic_gap,
    })
}

/// Objective-only evaluation, the function the evolutionary search minimizes.
pub fn evaluate_triple(
    ctx: &AnchorContext,
    bundle: &ModelBundle,
    target: &TargetModel,
    delta: &[f64],
    mode: IntensityMode,
) -> Result<ObjectiveTriple> {
    Ok(evaluate(ctx, bundle, target, delta, mode)?.objectives)
}
