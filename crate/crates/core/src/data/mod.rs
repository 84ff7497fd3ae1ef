//! Annotated datasets: procedural generation with plantable bias, IDX
//! ingestion, leak-free splits, and the dataset file format.

pub mod blobs;
pub mod idx;
pub mod split;
pub mod store;

use crate::error::{Error, Result};
use crate::ganstack::AttributeVector;
use crate::numcore::Tensor;
use serde::{Deserialize, Serialize};

/// Correlation planted between one attribute and one class label:
/// `P(attribute high | class) = strength` for the named class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    pub attribute: usize,
    pub class: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedInstance {
    pub image: Tensor,
    pub attributes: AttributeVector,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub source: String,
    pub seed: u64,
    pub bias: Option<BiasSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedDataset {
    pub image_shape: Vec<usize>,
    pub attr_names: Vec<String>,
    pub class_labels: Vec<String>,
    pub instances: Vec<AnnotatedInstance>,
    pub provenance: DatasetProvenance,
}

impl AnnotatedDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.image_shape.iter().product()
    }

    pub fn attr_count(&self) -> usize {
        self.attr_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_labels.len()
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count()];
        for inst in &self.instances {
            counts[inst.label] += 1;
        }
        counts
    }

    /// Flattened images of the selected instances as a `[k, pixels]` batch.
    pub fn images_matrix(&self, indices: &[usize]) -> Result<Tensor> {
        let pixels = self.pixel_count();
        let mut data = Vec::with_capacity(indices.len() * pixels);
        for &i in indices {
            let inst = self
                .instances
                .get(i)
                .ok_or_else(|| Error::contract(format!("instance index {i} out of range")))?;
            data.extend_from_slice(inst.image.data());
        }
        Tensor::new(vec![indices.len(), pixels], data)
    }

    /// Attribute rows of the selected instances as a `[k, attr_count]` batch.
    pub fn attrs_matrix(&self, indices: &[usize]) -> Result<Tensor> {
        let n = self.attr_count();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            let inst = self
                .instances
                .get(i)
                .ok_or_else(|| Error::contract(format!("instance index {i} out of range")))?;
            data.extend_from_slice(inst.attributes.values());
        }
        Tensor::new(vec![indices.len(), n], data)
    }

    pub fn labels(&self, indices: &[usize]) -> Result<Vec<usize>> {
        indices
            .iter()
            .map(|&i| {
                self.instances
                    .get(i)
                    .map(|inst| inst.label)
                    .ok_or_else(|| Error::contract(format!("instance index {i} out of range")))
            })
            .collect()
    }
}

pub use blobs::{augment_with_erased_class, generate_blobs};
pub use idx::{load_idx, save_idx};
pub use split::{make_split, SplitPlan};
pub use store::{load_dataset, save_dataset};
