//! Procedural disc dataset with five continuous render attributes and a
//! brightness-derived class label, plus the erased-class augmentation.

use super::{AnnotatedDataset, AnnotatedInstance, BiasSpec, DatasetProvenance};
use crate::error::{Error, Result};
use crate::ganstack::mlp::quantize_f32;
use crate::ganstack::AttributeVector;
use crate::numcore::Tensor;
use crate::rng::rng_from_seed;
use rand::Rng;

pub const IMAGE_SIDE: usize = 16;
pub const ATTR_NAMES: [&str; 5] = ["hue", "brightness", "radius", "bar", "border"];

pub const ATTR_HUE: usize = 0;
pub const ATTR_BRIGHTNESS: usize = 1;
pub const ATTR_RADIUS: usize = 2;
pub const ATTR_BAR: usize = 3;
pub const ATTR_BORDER: usize = 4;

/// Fraction of labels flipped after the brightness rule is applied.
pub const LABEL_NOISE: f64 = 0.05;

/// Render one disc image from its attribute vector. Deterministic; every
/// channel is nondecreasing in the brightness attribute so luminance audits
/// stay monotone.
pub fn render_blob(attrs: &[f64]) -> Tensor {
    let (hue, brightness, radius, bar, border) = (
        attrs[ATTR_HUE],
        attrs[ATTR_BRIGHTNESS],
        attrs[ATTR_RADIUS],
        attrs[ATTR_BAR],
        attrs[ATTR_BORDER],
    );
    let side = IMAGE_SIDE as f64;
    let center = (side - 1.0) / 2.0;
    let r_disc = 3.0 + 4.0 * radius;
    let ring = 0.5 + 2.0 * border;
    let base = hue_color(hue);
    let level = 0.25 + 0.75 * brightness;
    let bg = 0.05 + 0.45 * brightness;

    let mut data = vec![0.0; IMAGE_SIDE * IMAGE_SIDE * 3];
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let dx = x as f64 - center;
            let dy = y as f64 - center;
            let dist = (dx * dx + dy * dy).sqrt();
            let mut px = [bg, bg, bg];
            if dist <= r_disc {
                for c in 0..3 {
                    px[c] = level * base[c];
                }
                if dist > r_disc - ring {
                    // Dark rim; depth scales with the border attribute.
                    let dim = 1.0 - 0.8 * border;
                    for v in &mut px {
                        *v *= dim;
                    }
                }
            }
            // Vertical bar blended toward white with the bar attribute.
            if x == IMAGE_SIDE / 2 || x == IMAGE_SIDE / 2 - 1 {
                let alpha = 0.9 * bar;
                for v in &mut px {
                    *v = *v + alpha * (1.0 - *v);
                }
            }
            for c in 0..3 {
                data[(y * IMAGE_SIDE + x) * 3 + c] = quantize_f32(px[c]);
            }
        }
    }
    Tensor::new(vec![IMAGE_SIDE, IMAGE_SIDE, 3], data).expect("blob shape")
}

fn hue_color(hue: f64) -> [f64; 3] {
    let t = std::f64::consts::TAU * hue;
    let third = std::f64::consts::TAU / 3.0;
    [
        0.5 + 0.5 * t.cos(),
        0.5 + 0.5 * (t - third).cos(),
        0.5 + 0.5 * (t - 2.0 * third).cos(),
    ]
}

/// Generate `n` annotated disc images. The class label follows the
/// brightness attribute (threshold 0.5) with a small label-noise rate; an
/// optional [`BiasSpec`] resamples one attribute so it co-occurs with the
/// chosen class at the given strength.
pub fn generate_blobs(seed: u64, n: usize, bias: Option<BiasSpec>) -> Result<AnnotatedDataset> {
    if n < 50 {
        return Err(Error::contract(format!(
            "blob dataset needs n >= 50, got {n}"
        )));
    }
    if let Some(b) = &bias {
        if b.attribute >= ATTR_NAMES.len() {
            return Err(Error::contract(format!(
                "bias attribute index {} out of range (have {})",
                b.attribute,
                ATTR_NAMES.len()
            )));
        }
        if b.class > 1 {
            return Err(Error::contract(format!(
                "bias class {} out of range for binary labels",
                b.class
            )));
        }
        if !(0.0..=1.0).contains(&b.strength) {
            return Err(Error::contract(format!(
                "bias strength {} outside [0, 1]",
                b.strength
            )));
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut instances = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attrs: Vec<f64> = (0..ATTR_NAMES.len())
            .map(|_| quantize_f32(rng.gen_range(0.0..1.0)))
            .collect();
        let mut label = usize::from(attrs[ATTR_BRIGHTNESS] > 0.5);
        if rng.gen_range(0.0..1.0) < LABEL_NOISE {
            label = 1 - label;
        }
        if let Some(b) = &bias {
            if label == b.class {
                let high = rng.gen_range(0.0..1.0) < b.strength;
                let v = if high {
                    0.5 + 0.5 * rng.gen_range(0.0..1.0)
                } else {
                    0.5 * rng.gen_range(0.0..1.0)
                };
                attrs[b.attribute] = quantize_f32(v);
            }
        }
        instances.push(AnnotatedInstance {
            image: render_blob(&attrs),
            attributes: AttributeVector::new(attrs)?,
            label,
        });
    }

    Ok(AnnotatedDataset {
        image_shape: vec![IMAGE_SIDE, IMAGE_SIDE, 3],
        attr_names: ATTR_NAMES.iter().map(|s| s.to_string()).collect(),
        class_labels: vec!["dim".into(), "bright".into()],
        instances,
        provenance: DatasetProvenance {
            source: "blobs".into(),
            seed,
            bias,
        },
    })
}

/// Append one new class whose instances are copies of every existing
/// instance with a random rectangle (25% to 50% of the image area) zeroed.
pub fn augment_with_erased_class(dataset: &AnnotatedDataset, seed: u64) -> Result<AnnotatedDataset> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot augment an empty dataset"));
    }
    let (h, w) = (dataset.image_shape[0], dataset.image_shape[1]);
    let channels = if dataset.image_shape.len() > 2 {
        dataset.image_shape[2]
    } else {
        1
    };
    let area = h * w;
    let new_label = dataset.class_count();
    let mut rng = rng_from_seed(seed);

    let mut out = dataset.clone();
    out.class_labels.push("erased".into());
    for inst in &dataset.instances {
        let (rw, rh) = loop {
            let rw = rng.gen_range(2..=w);
            let rh = rng.gen_range(2..=h);
            let a = rw * rh;
            if a * 4 >= area && a * 2 <= area {
                break (rw, rh);
            }
        };
        let x0 = rng.gen_range(0..=w - rw);
        let y0 = rng.gen_range(0..=h - rh);
        let mut image = inst.image.clone();
        for y in y0..y0 + rh {
            for x in x0..x0 + rw {
                for c in 0..channels {
                    image.data_mut()[(y * w + x) * channels + c] = 0.0;
                }
            }
        }
        out.instances.push(AnnotatedInstance {
            image,
            attributes: inst.attributes.clone(),
            label: new_label,
        });
    }
    out.provenance.source = format!("{}+erased", dataset.provenance.source);
    Ok(out)
}
