//! Dataset persistence in the CGMF container convention, with the manifest
//! (seed, bias, attribute names) embedded in the JSON header.

use super::{AnnotatedDataset, AnnotatedInstance, DatasetProvenance};
use crate::error::{Error, Result};
use crate::ganstack::format::{read_container, write_container, Container};
use crate::ganstack::AttributeVector;
use crate::numcore::Tensor;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub image_shape: Vec<usize>,
    pub attr_names: Vec<String>,
    pub class_labels: Vec<String>,
    pub n: usize,
    pub provenance: DatasetProvenance,
}

impl DatasetManifest {
    pub fn of(dataset: &AnnotatedDataset) -> Self {
        DatasetManifest {
            image_shape: dataset.image_shape.clone(),
            attr_names: dataset.attr_names.clone(),
            class_labels: dataset.class_labels.clone(),
            n: dataset.len(),
            provenance: dataset.provenance.clone(),
        }
    }
}

pub fn save_dataset(path: &Path, dataset: &AnnotatedDataset) -> Result<()> {
    let n = dataset.len();
    let all: Vec<usize> = (0..n).collect();
    let images = dataset.images_matrix(&all)?;
    let attrs = dataset.attrs_matrix(&all)?;
    let labels = Tensor::new(
        vec![n],
        dataset.instances.iter().map(|i| i.label as f64).collect(),
    )?;
    let manifest = DatasetManifest::of(dataset);
    let container = Container {
        kind: "dataset".into(),
        meta: serde_json::to_value(&manifest).expect("dataset manifest"),
        tensors: vec![
            ("images".into(), images),
            ("attributes".into(), attrs),
            ("labels".into(), labels),
        ],
    };
    write_container(path, &container)
}

pub fn load_dataset(path: &Path) -> Result<AnnotatedDataset> {
    let container = read_container(path)?;
    if container.kind != "dataset" {
        return Err(Error::format(
            12,
            format!("expected kind 'dataset', found '{}'", container.kind),
        ));
    }
    let manifest: DatasetManifest = serde_json::from_value(container.meta.clone())
        .map_err(|e| Error::format(12, format!("bad dataset manifest: {e}")))?;
    let images = container.tensor("images")?;
    let attrs = container.tensor("attributes")?;
    let labels = container.tensor("labels")?;
    let pixels: usize = manifest.image_shape.iter().product();
    let attr_count = manifest.attr_names.len();
    if images.shape() != [manifest.n, pixels] {
        return Err(Error::format(
            12,
            format!(
                "images tensor shape {:?} does not match manifest ({}, {})",
                images.shape(),
                manifest.n,
                pixels
            ),
        ));
    }
    if attrs.shape() != [manifest.n, attr_count] || labels.numel() != manifest.n {
        return Err(Error::format(12, "attribute/label tensors do not match manifest"));
    }

    let mut instances = Vec::with_capacity(manifest.n);
    for i in 0..manifest.n {
        let image = Tensor::new(
            manifest.image_shape.clone(),
            images.data()[i * pixels..(i + 1) * pixels].to_vec(),
        )?;
        let attributes = AttributeVector::new(
            attrs.data()[i * attr_count..(i + 1) * attr_count].to_vec(),
        )?;
        let label = labels.data()[i] as usize;
        if label >= manifest.class_labels.len() {
            return Err(Error::format(
                12,
                format!("label {label} out of range for {} classes", manifest.class_labels.len()),
            ));
        }
        instances.push(AnnotatedInstance {
            image,
            attributes,
            label,
        });
    }
    Ok(AnnotatedDataset {
        image_shape: manifest.image_shape,
        attr_names: manifest.attr_names,
        class_labels: manifest.class_labels,
        instances,
        provenance: manifest.provenance,
    })
}
