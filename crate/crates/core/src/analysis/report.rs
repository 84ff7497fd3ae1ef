//! Assembly and serialization of audit results: per-member objective data,
//! counterfactual images, the closest opposite-class exemplar, and a scatter
//! plot of the display objectives.

use super::metrics::{diff_heatmap, ssim};
use crate::data::AnnotatedDataset;
use crate::error::{Error, Result};
use crate::ganstack::format::{write_container, Container};
use crate::ganstack::{ModelBundle, TargetModel};
use crate::moea::{ParetoFront, Provenance};
use crate::numcore::Tensor;
use crate::objectives::{
    display_transform, evaluate, AnchorContext, DisplayTriple, IntensityMode, ObjectiveTriple,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberReport {
    pub delta: Vec<f64>,
    pub objectives: ObjectiveTriple,
    pub display: DisplayTriple,
    pub plausible: bool,
    pub predicted_class: usize,
    pub softmax: Vec<f64>,
    pub raw_critic_gap: f64,
    #[serde(skip)]
    pub image: Tensor,
}

/// The exemplar the report compares against: the instance of the opposite
/// (or target) class whose own-class softmax is lowest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosestAdversarial {
    pub dataset_index: usize,
    pub class: usize,
    pub own_class_softmax: f64,
    #[serde(skip)]
    pub image: Tensor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontReport {
    pub anchor_class: usize,
    pub anchor_softmax: Vec<f64>,
    pub target_class: Option<usize>,
    pub anchor_attrs: Vec<f64>,
    pub members: Vec<MemberReport>,
    pub closest_adversarial: ClosestAdversarial,
    /// Mean absolute perturbation per attribute across the front.
    pub mean_abs_delta: Vec<f64>,
    pub attr_names: Vec<String>,
    pub class_labels: Vec<String>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub anchor_image: Tensor,
}

/// Assemble the full report for a finished front. `search_indices` restricts
/// the closest-adversarial scan (pass the training split of the audited
/// model's dataset).
pub fn front_report(
    front: &ParetoFront,
    ctx: &AnchorContext,
    bundle: &ModelBundle,
    target: &TargetModel,
    dataset: &AnnotatedDataset,
    search_indices: &[usize],
    mode: IntensityMode,
) -> Result<FrontReport> {
    if front.members.is_empty() {
        return Err(Error::contract("cannot report an empty front"));
    }
    let attr_count = ctx.attrs.len();

    let mut members = Vec::with_capacity(front.members.len());
    let mut mean_abs_delta = vec![0.0; attr_count];
    for ind in &front.members {
        let cand = evaluate(ctx, bundle, target, &ind.delta, mode)?;
        let display = display_transform(&cand.objectives);
        for (acc, d) in mean_abs_delta.iter_mut().zip(&ind.delta) {
            *acc += d.abs();
        }
        members.push(MemberReport {
            delta: ind.delta.clone(),
            objectives: cand.objectives,
            display,
            plausible: display.plausible,
            predicted_class: cand.predicted_class,
            softmax: cand.softmax,
            raw_critic_gap: cand.raw_critic_gap,
            image: cand.image_row.reshaped(ctx.image_shape.clone())?,
        });
    }
    for acc in &mut mean_abs_delta {
        *acc /= front.members.len() as f64;
    }

    let closest_adversarial = closest_adversarial(ctx, target, dataset, search_indices)?;

    Ok(FrontReport {
        anchor_class: ctx.anchor_class,
        anchor_softmax: ctx.anchor_softmax.clone(),
        target_class: ctx.target_class,
        anchor_attrs: ctx.attrs.values().to_vec(),
        members,
        closest_adversarial,
        mean_abs_delta,
        attr_names: dataset.attr_names.clone(),
        class_labels: dataset.class_labels.clone(),
        provenance: front.provenance.clone(),
        anchor_image: ctx.anchor_row.reshaped(ctx.image_shape.clone())?,
    })
}

/// Worst predicted exemplar of the opposing class: among instances whose
/// label is the target class (or any class other than the anchor's), pick
/// the one with the lowest softmax mass on its own class.
fn closest_adversarial(
    ctx: &AnchorContext,
    target: &TargetModel,
    dataset: &AnnotatedDataset,
    search_indices: &[usize],
) -> Result<ClosestAdversarial> {
    let mut best: Option<(usize, f64)> = None;
    for &i in search_indices {
        let inst = dataset
            .instances
            .get(i)
            .ok_or_else(|| Error::contract(format!("index {i} out of dataset range")))?;
        let eligible = match ctx.target_class {
            Some(t) => inst.label == t,
            None => inst.label != ctx.anchor_class,
        };
        if !eligible {
            continue;
        }
        let row = inst.image.reshaped(vec![1, inst.image.numel()])?;
        let (_, softmax) = target.predict_one(&row)?;
        let own = softmax[inst.label];
        if best.map_or(true, |(_, b)| own < b) {
            best = Some((i, own));
        }
    }
    let (index, own) = best.ok_or_else(|| {
        Error::contract("no opposite-class instance available for the closest-adversarial scan")
    })?;
    Ok(ClosestAdversarial {
        dataset_index: index,
        class: dataset.instances[index].label,
        own_class_softmax: own,
        image: dataset.instances[index].image.clone(),
    })
}

impl FrontReport {
    /// One CSV row per member: perturbation components, raw and display
    /// objectives, plausible flag, predicted class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("member");
        for name in &self.attr_names {
            out.push_str(&format!(",delta_{name}"));
        }
        out.push_str(
            ",f_gan,f_adv,f_att,plausibility,adversarial_power,change_intensity,plausible,predicted_class,raw_critic_gap\n",
        );
        for (i, m) in self.members.iter().enumerate() {
            out.push_str(&i.to_string());
            for d in &m.delta {
                out.push_str(&format!(",{d:.9}"));
            }
            out.push_str(&format!(
                ",{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{},{},{:.9}\n",
                m.objectives.f_gan,
                m.objectives.f_adv,
                m.objectives.f_att,
                m.display.plausibility,
                m.display.adversarial_power,
                m.display.change_intensity,
                m.plausible,
                m.predicted_class,
                m.raw_critic_gap,
            ));
        }
        out
    }

    /// Scatter of the display triple: plausibility against adversarial
    /// power, with marker radius tracking change intensity.
    pub fn to_svg(&self) -> String {
        let (w, h, margin) = (480.0, 360.0, 48.0);
        let xs: Vec<f64> = self.members.iter().map(|m| m.display.plausibility).collect();
        let ys: Vec<f64> = self
            .members
            .iter()
            .map(|m| m.display.adversarial_power)
            .collect();
        let (x_lo, x_hi) = padded_range(&xs);
        let (y_lo, y_hi) = padded_range(&ys);
        let sx = |v: f64| margin + (v - x_lo) / (x_hi - x_lo) * (w - 2.0 * margin);
        let sy = |v: f64| h - margin - (v - y_lo) / (y_hi - y_lo) * (h - 2.0 * margin);

        let max_att = self
            .members
            .iter()
            .map(|m| m.display.change_intensity)
            .fold(0.0f64, f64::max)
            .max(1e-9);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        out.push_str(&format!(
            "  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        ));
        out.push_str(&format!(
            "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n  <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
            m = margin,
            b = h - margin,
            r = w - margin,
            t = margin
        ));
        out.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\">plausibility (1 - f_gan)</text>\n",
            w / 2.0 - 70.0,
            h - 12.0
        ));
        out.push_str(&format!(
            "  <text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\">adversarial power (1 - f_adv)</text>\n",
            h / 2.0 + 70.0,
            h / 2.0 + 70.0
        ));
        for m in &self.members {
            let r = 2.0 + 6.0 * (m.display.change_intensity / max_att);
            let color = if m.plausible { "#1a7f37" } else { "#c0392b" };
            out.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"{color}\" fill-opacity=\"0.7\"/>\n",
                sx(m.display.plausibility),
                sy(m.display.adversarial_power),
                r
            ));
        }
        out.push_str("</svg>\n");
        out
    }

    /// Write report.json, report.csv, images.cgmf and front.svg into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::contract(format!("report serialization failed: {e}")))?;
        std::fs::write(dir.join("report.json"), json)
            .map_err(|e| Error::io(dir.join("report.json").display().to_string(), e))?;
        std::fs::write(dir.join("report.csv"), self.to_csv())
            .map_err(|e| Error::io(dir.join("report.csv").display().to_string(), e))?;
        std::fs::write(dir.join("front.svg"), self.to_svg())
            .map_err(|e| Error::io(dir.join("front.svg").display().to_string(), e))?;

        let mut tensors = vec![
            ("anchor".to_string(), self.anchor_image.clone()),
            (
                "closest_adversarial".to_string(),
                self.closest_adversarial.image.clone(),
            ),
        ];
        for (i, m) in self.members.iter().enumerate() {
            tensors.push((format!("member_{i:03}"), m.image.clone()));
        }
        let container = Container {
            kind: "images".into(),
            meta: serde_json::json!({
                "anchor_class": self.anchor_class,
                "members": self.members.len(),
            }),
            tensors,
        };
        write_container(&dir.join("images.cgmf"), &container)
    }

    /// Pairwise similarity over {anchor} followed by the front members:
    /// SSIM values and mean-absolute-difference heatmaps.
    pub fn similarity_matrices(&self) -> Result<(Vec<Vec<f64>>, Vec<(usize, usize, Tensor)>)> {
        let mut images = vec![&self.anchor_image];
        images.extend(self.members.iter().map(|m| &m.image));
        let n = images.len();
        let mut ssim_matrix = vec![vec![0.0; n]; n];
        let mut heatmaps = Vec::new();
        for i in 0..n {
            for j in 0..n {
                ssim_matrix[i][j] = ssim(images[i], images[j])?;
            }
            for j in (i + 1)..n {
                heatmaps.push((i, j, diff_heatmap(images[i], images[j])?));
            }
        }
        Ok((ssim_matrix, heatmaps))
    }
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.08).max(1e-6);
    (lo - pad, hi + pad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::blobs::generate_blobs;
    use crate::data::make_split;
    use crate::ganstack::{AttributeVector, BundleSpec, ModelBundle, TargetModel};
    use crate::moea::{evolve_with, NsgaConfig};
    use crate::objectives::evaluate_triple;

    fn small_world() -> (
        AnnotatedDataset,
        ModelBundle,
        TargetModel,
        AnchorContext,
        ParetoFront,
    ) {
        let dataset = generate_blobs(3, 80, None).unwrap();
        let bundle = ModelBundle::init(BundleSpec::default(), 4).unwrap();
        let target = TargetModel::init(
            dataset.pixel_count(),
            &[8],
            dataset.class_labels.clone(),
            6,
        )
        .unwrap();
        let anchor = &dataset.instances[0];
        let ctx = AnchorContext::new(
            &bundle,
            &target,
            &anchor.image,
            anchor.attributes.clone(),
            None,
        )
        .unwrap();
        let config = NsgaConfig {
            population: 16,
            offspring: 16,
            generations: 2,
            seed: 1,
            ..NsgaConfig::default()
        };
        let (front, _) = evolve_with(
            dataset.attr_count(),
            |d| evaluate_triple(&ctx, &bundle, &target, d, IntensityMode::Norm),
            &config,
        )
        .unwrap();
        (dataset, bundle, target, ctx, front)
    }

    #[test]
    fn report_is_consistent_with_display_transform() {
        let (dataset, bundle, target, ctx, front) = small_world();
        let all: Vec<usize> = (0..dataset.len()).collect();
        let report = front_report(
            &front,
            &ctx,
            &bundle,
            &target,
            &dataset,
            &all,
            IntensityMode::Norm,
        )
        .unwrap();
        assert_eq!(report.members.len(), front.members.len());
        assert_eq!(report.mean_abs_delta.len(), dataset.attr_count());
        for m in &report.members {
            let d = display_transform(&m.objectives);
            assert_eq!(m.display, d);
            assert_eq!(m.plausible, d.plausible);
        }
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), report.members.len() + 1);
        let svg = report.to_svg();
        assert!(svg.starts_with("<svg") && svg.contains("circle"));
    }

    #[test]
    fn closest_adversarial_picks_the_weakest_own_class_softmax() {
        let (dataset, bundle, target, ctx, front) = small_world();
        let all: Vec<usize> = (0..dataset.len()).collect();
        let report = front_report(
            &front,
            &ctx,
            &bundle,
            &target,
            &dataset,
            &all,
            IntensityMode::Norm,
        )
        .unwrap();
        let chosen = &report.closest_adversarial;
        assert_ne!(chosen.class, report.anchor_class);
        for &i in &all {
            let inst = &dataset.instances[i];
            if inst.label == report.anchor_class {
                continue;
            }
            let row = inst.image.reshaped(vec![1, inst.image.numel()]).unwrap();
            let (_, sm) = target.predict_one(&row).unwrap();
            assert!(
                sm[inst.label] >= chosen.own_class_softmax - 1e-12,
                "found a weaker exemplar than the chosen one"
            );
        }
    }

    #[test]
    fn similarity_matrices_have_unit_diagonal_and_symmetry() {
        let (dataset, bundle, target, ctx, front) = small_world();
        let all: Vec<usize> = (0..dataset.len()).collect();
        let report = front_report(
            &front,
            &ctx,
            &bundle,
            &target,
            &dataset,
            &all,
            IntensityMode::Norm,
        )
        .unwrap();
        let (ssim_matrix, heatmaps) = report.similarity_matrices().unwrap();
        let n = ssim_matrix.len();
        for i in 0..n {
            assert!((ssim_matrix[i][i] - 1.0).abs() < 1e-9);
            for j in 0..n {
                assert!((ssim_matrix[i][j] - ssim_matrix[j][i]).abs() < 1e-9);
            }
        }
        assert_eq!(heatmaps.len(), n * (n - 1) / 2);
    }

    #[test]
    fn empty_front_is_rejected() {
        let (dataset, bundle, target, ctx, mut front) = small_world();
        front.members.clear();
        let all: Vec<usize> = (0..dataset.len()).collect();
        let err = front_report(
            &front,
            &ctx,
            &bundle,
            &target,
            &dataset,
            &all,
            IntensityMode::Norm,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
