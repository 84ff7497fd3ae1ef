//! IDX file ingestion (big-endian, as published for MNIST-style datasets).
//!
//! Image files carry magic `0x00000803` and labels `0x00000801`. Loaded
//! pixels are scaled to `[0,1]`; the attribute vector of each instance is the
//! one-hot encoding of its label.

use super::{AnnotatedDataset, AnnotatedInstance, DatasetProvenance};
use crate::error::{Error, Result};
use crate::ganstack::mlp::quantize_f32;
use crate::ganstack::AttributeVector;
use crate::numcore::Tensor;
use std::fs;
use std::path::Path;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    if bytes.len() < offset + 4 {
        return Err(Error::format(
            offset as u64,
            format!("file truncated while reading {what}"),
        ));
    }
    Ok(u32::from_be_bytes(
        bytes[offset..offset + 4].try_into().unwrap(),
    ))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<AnnotatedDataset> {
    let ibytes =
        fs::read(images_path).map_err(|e| Error::io(images_path.display().to_string(), e))?;
    let lbytes =
        fs::read(labels_path).map_err(|e| Error::io(labels_path.display().to_string(), e))?;

    let magic = read_be_u32(&ibytes, 0, "image magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            0,
            format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let n = read_be_u32(&ibytes, 4, "image count")? as usize;
    let rows = read_be_u32(&ibytes, 8, "row count")? as usize;
    let cols = read_be_u32(&ibytes, 12, "column count")? as usize;
    let expected = 16 + n * rows * cols;
    if ibytes.len() != expected {
        return Err(Error::format(
            16,
            format!(
                "image payload is {} bytes, header expects {}",
                ibytes.len() - 16,
                expected - 16
            ),
        ));
    }

    let lmagic = read_be_u32(&lbytes, 0, "label magic")?;
    if lmagic != LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("bad label magic {lmagic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let ln = read_be_u32(&lbytes, 4, "label count")? as usize;
    if ln != n {
        return Err(Error::format(
            4,
            format!("label count {ln} does not match image count {n}"),
        ));
    }
    if lbytes.len() != 8 + n {
        return Err(Error::format(
            8,
            format!(
                "label payload is {} bytes, header expects {}",
                lbytes.len() - 8,
                n
            ),
        ));
    }

    let labels: Vec<usize> = lbytes[8..].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().copied().max().unwrap_or(0) + 1;

    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let start = 16 + i * rows * cols;
        let data: Vec<f64> = ibytes[start..start + rows * cols]
            .iter()
            .map(|&b| quantize_f32(b as f64 / 255.0))
            .collect();
        let mut onehot = vec![0.0; class_count];
        onehot[labels[i]] = 1.0;
        instances.push(AnnotatedInstance {
            image: Tensor::new(vec![rows, cols, 1], data)?,
            attributes: AttributeVector::new(onehot)?,
            label: labels[i],
        });
    }

    Ok(AnnotatedDataset {
        image_shape: vec![rows, cols, 1],
        attr_names: (0..class_count).map(|c| format!("class_{c}")).collect(),
        class_labels: (0..class_count).map(|c| c.to_string()).collect(),
        instances,
        provenance: DatasetProvenance {
            source: format!("idx:{}", images_path.display()),
            seed: 0,
            bias: None,
        },
    })
}

/// Re-serialize a dataset to a pair of IDX files.
pub fn save_idx(dataset: &AnnotatedDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (rows, cols) = (dataset.image_shape[0], dataset.image_shape[1]);
    let n = dataset.len();
    let mut ibytes = Vec::with_capacity(16 + n * rows * cols);
    ibytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    ibytes.extend_from_slice(&(n as u32).to_be_bytes());
    ibytes.extend_from_slice(&(rows as u32).to_be_bytes());
    ibytes.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut lbytes = Vec::with_capacity(8 + n);
    lbytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lbytes.extend_from_slice(&(n as u32).to_be_bytes());
    for inst in &dataset.instances {
        for &v in inst.image.data() {
            ibytes.push((v * 255.0).round() as u8);
        }
        lbytes.push(inst.label as u8);
    }
    fs::write(images_path, ibytes).map_err(|e| Error::io(images_path.display().to_string(), e))?;
    fs::write(labels_path, lbytes).map_err(|e| Error::io(labels_path.display().to_string(), e))
}
