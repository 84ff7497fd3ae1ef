//! Image statistics used in the audit reports: luminance, structural
//! similarity, and per-pixel difference maps.

use crate::data::AnnotatedDataset;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Weighted RGB brightness of one pixel with channels in `[0, 255]`,
/// normalized to `[0, 1]`.
pub fn luminance(r: f64, g: f64, b: f64) -> Result<f64> {
    for (name, v) in [("R", r), ("G", g), ("B", b)] {
        if !(0.0..=255.0).contains(&v) {
            return Err(Error::contract(format!(
                "channel {name} = {v} outside [0, 255]"
            )));
        }
    }
    Ok((0.2126 * r + 0.7152 * g + 0.0722 * b) / 255.0)
}

/// Luminance for channels already in `[0, 1]`.
pub fn luminance_unit(r: f64, g: f64, b: f64) -> f64 {
    0.2126 * r + 0.7152 * g + 0.0722 * b
}

/// Convert an `[h, w, 3]` image in `[0,1]` to its `[h, w]` luminance plane.
/// Single-channel images pass through unchanged.
pub fn luminance_plane(image: &Tensor) -> Result<Tensor> {
    let shape = image.shape();
    match shape.len() {
        2 => Ok(image.clone()),
        3 if shape[2] == 1 => image.reshaped(vec![shape[0], shape[1]]),
        3 if shape[2] == 3 => {
            let (h, w) = (shape[0], shape[1]);
            let mut data = Vec::with_capacity(h * w);
            for px in image.data().chunks(3) {
                data.push(luminance_unit(px[0], px[1], px[2]));
            }
            Tensor::new(vec![h, w], data)
        }
        _ => Err(Error::contract(format!(
            "expected [h, w], [h, w, 1] or [h, w, 3] image, got {shape:?}"
        ))),
    }
}

/// Per-pixel mean luminance over every instance of one class.
pub fn class_luminance_map(dataset: &AnnotatedDataset, class: usize) -> Result<Tensor> {
    let members: Vec<&Tensor> = dataset
        .instances
        .iter()
        .filter(|i| i.label == class)
        .map(|i| &i.image)
        .collect();
    if members.is_empty() {
        return Err(Error::contract(format!(
            "class {class} has no instances"
        )));
    }
    let mut acc = luminance_plane(members[0])?;
    for img in &members[1..] {
        let plane = luminance_plane(img)?;
        for (a, v) in acc.data_mut().iter_mut().zip(plane.data()) {
            *a += v;
        }
    }
    let n = members.len() as f64;
    for a in acc.data_mut() {
        *a /= n;
    }
    Ok(acc)
}

const SSIM_C1: f64 = 1e-4; // (0.01)^2 for dynamic range 1
const SSIM_C2: f64 = 9e-4; // (0.03)^2

/// Structural similarity over a single global window. RGB inputs are reduced
/// to luminance first; symmetric, and 1 exactly when the images are equal.
pub fn ssim(x: &Tensor, y: &Tensor) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension {
            op: "ssim",
            lhs: x.shape().to_vec(),
            rhs: y.shape().to_vec(),
        });
    }
    let xp = if x.shape().len() == 3 {
        luminance_plane(x)?
    } else {
        x.clone()
    };
    let yp = if y.shape().len() == 3 {
        luminance_plane(y)?
    } else {
        y.clone()
    };

    let n = xp.numel() as f64;
    let mx: f64 = xp.data().iter().sum::<f64>() / n;
    let my: f64 = yp.data().iter().sum::<f64>() / n;
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in xp.data().iter().zip(yp.data()) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cov += (a - mx) * (b - my);
    }
    vx /= n;
    vy /= n;
    cov /= n;

    Ok(((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)))
}

/// Per-pixel mean absolute channel difference between two equally shaped RGB
/// images; the result is a single-channel `[h, w]` map.
pub fn diff_heatmap(x: &Tensor, y: &Tensor) -> Result<Tensor> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension {
            op: "diff_heatmap",
            lhs: x.shape().to_vec(),
            rhs: y.shape().to_vec(),
        });
    }
    let shape = x.shape();
    let channels = if shape.len() == 3 { shape[2] } else { 1 };
    let (h, w) = (shape[0], shape[1]);
    let mut data = Vec::with_capacity(h * w);
    for px in 0..h * w {
        let mut acc = 0.0;
        for c in 0..channels {
            let i = px * channels + c;
            acc += (x.data()[i] - y.data()[i]).abs();
        }
        data.push(acc / channels as f64);
    }
    Tensor::new(vec![h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::blobs::generate_blobs;

    #[test]
    fn luminance_reference_points() {
        assert_eq!(luminance(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!((luminance(255.0, 255.0, 255.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((luminance(255.0, 0.0, 0.0).unwrap() - 0.2126).abs() < 1e-12);
        assert!(luminance(-1.0, 0.0, 0.0).is_err());
        assert!(luminance(0.0, 256.0, 0.0).is_err());
    }

    #[test]
    fn class_map_of_constant_images() {
        let mut d = generate_blobs(1, 50, None).unwrap();
        for inst in &mut d.instances {
            inst.label = 0;
        }
        let ones = Tensor::new(vec![16, 16, 3], vec![1.0; 16 * 16 * 3]).unwrap();
        d.instances[0].image = ones;
        d.instances.truncate(1);
        let map = class_luminance_map(&d, 0).unwrap();
        assert!(map.data().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn class_map_averages_black_and_white() {
        let mut d = generate_blobs(1, 50, None).unwrap();
        d.instances.truncate(2);
        d.instances[0].image = Tensor::zeros(vec![16, 16, 3]);
        d.instances[0].label = 0;
        d.instances[1].image = Tensor::new(vec![16, 16, 3], vec![1.0; 16 * 16 * 3]).unwrap();
        d.instances[1].label = 0;
        let map = class_luminance_map(&d, 0).unwrap();
        assert!(map.data().iter().all(|&v| (v - 0.5).abs() < 1e-9));
    }

    #[test]
    fn class_map_matches_double_loop_oracle() {
        let d = generate_blobs(17, 60, None).unwrap();
        let map = class_luminance_map(&d, 1).unwrap();
        // Scalar double-loop oracle over pixels and class members.
        let members: Vec<_> = d.instances.iter().filter(|i| i.label == 1).collect();
        for y in 0..16 {
            for x in 0..16 {
                let mut acc = 0.0;
                for m in &members {
                    let px = &m.image.data()[(y * 16 + x) * 3..(y * 16 + x) * 3 + 3];
                    acc += 0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2];
                }
                let expected = acc / members.len() as f64;
                assert!((map.data()[y * 16 + x] - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn empty_class_is_a_contract_error() {
        let mut d = generate_blobs(1, 50, None).unwrap();
        for inst in &mut d.instances {
            inst.label = 0;
        }
        assert!(class_luminance_map(&d, 1).is_err());
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let d = generate_blobs(2, 52, None).unwrap();
        let a = &d.instances[0].image;
        let b = &d.instances[1].image;
        assert!((ssim(a, a).unwrap() - 1.0).abs() < 1e-12);
        assert!((ssim(a, b).unwrap() - ssim(b, a).unwrap()).abs() < 1e-12);
        assert!(ssim(a, b).unwrap() <= 1.0);
    }

    #[test]
    fn ssim_of_flat_black_vs_flat_white() {
        let black = Tensor::zeros(vec![4, 4]);
        let white = Tensor::new(vec![4, 4], vec![1.0; 16]).unwrap();
        let s = ssim(&black, &white).unwrap();
        // Zero variances and means 0/1: (C1 * C2) / ((1 + C1) * C2) = C1 / (1 + C1).
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((s - expected).abs() < 1e-12, "got {s}, expected {expected}");
        assert!((s - 1.0e-4).abs() < 1e-7);
    }

    #[test]
    fn diff_heatmap_cases() {
        let d = generate_blobs(3, 51, None).unwrap();
        let a = &d.instances[0].image;
        let b = &d.instances[1].image;
        let zero = diff_heatmap(a, a).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));

        let black = Tensor::zeros(vec![4, 4, 3]);
        let white = Tensor::new(vec![4, 4, 3], vec![1.0; 48]).unwrap();
        let full = diff_heatmap(&black, &white).unwrap();
        assert!(full.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let ab = diff_heatmap(a, b).unwrap();
        let ba = diff_heatmap(b, a).unwrap();
        assert_eq!(ab, ba);
        assert!(ab.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
