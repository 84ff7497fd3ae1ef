//! The CGMF container format: magic bytes, a versioned JSON header, and one
//! little-endian `f32` blob per named tensor, in header order.
//!
//! Layout: `"CGMF"` | version `u32` LE | header length `u32` LE | header JSON
//! (UTF-8) | blobs. The same container carries model bundles, target models,
//! datasets, and image packs; `kind` in the header tells them apart.

use super::bundle::{BundleSpec, GanMode, ModelBundle, TargetModel};
use super::mlp::LEAKY_ALPHA;
use crate::error::{Error, Result};
use crate::numcore::Tensor;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"CGMF";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct HeaderTensor {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: Value,
    tensors: Vec<HeaderTensor>,
}

/// A parsed CGMF container.
#[derive(Debug, Clone)]
pub struct Container {
    pub kind: String,
    pub meta: Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Container {
    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::contract(format!("container is missing tensor '{name}'")))
    }
}

pub fn write_container(path: &Path, container: &Container) -> Result<()> {
    let header = Header {
        kind: container.kind.clone(),
        meta: container.meta.clone(),
        tensors: container
            .tensors
            .iter()
            .map(|(name, t)| HeaderTensor {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::contract(format!("header serialization failed: {e}")))?;

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    for (_, t) in &container.tensors {
        for &v in t.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_container(path: &Path) -> Result<Container> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_container(&bytes)
}

pub fn parse_container(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < 12 {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file truncated: {} bytes, need at least 12", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:02x?}, expected \"CGMF\"", &bytes[0..4]),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12 + header_len;
    if bytes.len() < header_end {
        return Err(Error::format(
            12,
            format!(
                "header length {} exceeds file size {}",
                header_len,
                bytes.len()
            ),
        ));
    }
    let header: Header = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| Error::format(12, format!("header is not valid JSON: {e}")))?;

    let expected_blob: usize = header.tensors.iter().map(|t| numel(&t.shape) * 4).sum();
    let actual_blob = bytes.len() - header_end;
    if expected_blob != actual_blob {
        return Err(Error::format(
            header_end as u64,
            format!("blob length mismatch: header expects {expected_blob} bytes, file has {actual_blob}"),
        ));
    }

    let mut tensors = Vec::with_capacity(header.tensors.len());
    let mut offset = header_end;
    for ht in header.tensors {
        let n = numel(&ht.shape);
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let s = offset + i * 4;
            let v = f32::from_le_bytes(bytes[s..s + 4].try_into().unwrap());
            data.push(v as f64);
        }
        offset += n * 4;
        tensors.push((ht.name, Tensor::new(ht.shape, data)?));
    }
    Ok(Container {
        kind: header.kind,
        meta: header.meta,
        tensors,
    })
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleMeta {
    mode: GanMode,
    image_shape: Vec<usize>,
    latent_width: usize,
    attr_count: usize,
    hidden: Vec<usize>,
    hidden_activation: String,
    enc_head: String,
    dec_head: String,
    seed: u64,
}

pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let meta = BundleMeta {
        mode: bundle.spec.mode,
        image_shape: bundle.spec.image_shape.clone(),
        latent_width: bundle.spec.latent_width,
        attr_count: bundle.spec.attr_count,
        hidden: bundle.spec.hidden.clone(),
        hidden_activation: format!("leaky_relu({LEAKY_ALPHA})"),
        enc_head: "linear".into(),
        dec_head: "sigmoid".into(),
        seed: bundle.seed,
    };
    let container = Container {
        kind: "bundle".into(),
        meta: serde_json::to_value(&meta).expect("bundle meta"),
        tensors: bundle
            .named_params()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect(),
    };
    write_container(path, &container)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let container = read_container(path)?;
    if container.kind != "bundle" {
        return Err(Error::format(
            12,
            format!("expected kind 'bundle', found '{}'", container.kind),
        ));
    }
    let meta: BundleMeta = serde_json::from_value(container.meta.clone())
        .map_err(|e| Error::format(12, format!("bad bundle header: {e}")))?;
    let expected_act = format!("leaky_relu({LEAKY_ALPHA})");
    if meta.hidden_activation != expected_act
        || meta.enc_head != "linear"
        || meta.dec_head != "sigmoid"
    {
        return Err(Error::format(
            12,
            format!(
                "unsupported activation spec: {}/{}/{}",
                meta.hidden_activation, meta.enc_head, meta.dec_head
            ),
        ));
    }
    let spec = BundleSpec {
        mode: meta.mode,
        image_shape: meta.image_shape,
        latent_width: meta.latent_width,
        attr_count: meta.attr_count,
        hidden: meta.hidden,
    };
    let mut bundle = ModelBundle::init(spec, meta.seed)?;
    fill_params(&mut bundle, &container)?;
    Ok(bundle)
}

fn fill_params(bundle: &mut ModelBundle, container: &Container) -> Result<()> {
    let names: Vec<String> = bundle
        .named_params()
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let mut replacements = Vec::with_capacity(names.len());
    for name in &names {
        let t = container.tensor(name)?;
        replacements.push(t.clone());
    }
    let mut targets: Vec<&mut Tensor> = Vec::new();
    targets.extend(bundle.enc.param_tensors_mut());
    targets.extend(bundle.dec.param_tensors_mut());
    for layer in &mut bundle.critic.trunk {
        targets.push(&mut layer.w);
        targets.push(&mut layer.b);
    }
    for layer in [
        &mut bundle.critic.score,
        &mut bundle.critic.plaus,
        &mut bundle.critic.attrs,
    ] {
        targets.push(&mut layer.w);
        targets.push(&mut layer.b);
    }
    debug_assert_eq!(targets.len(), replacements.len());
    for (dst, (src, name)) in targets.into_iter().zip(replacements.into_iter().zip(names)) {
        if dst.shape() != src.shape() {
            return Err(Error::format(
                12,
                format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    src.shape(),
                    dst.shape()
                ),
            ));
        }
        *dst = src;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetMeta {
    sizes: Vec<usize>,
    labels: Vec<String>,
    seed: u64,
}

pub fn save_target(path: &Path, target: &TargetModel) -> Result<()> {
    let meta = TargetMeta {
        sizes: target.net.sizes.clone(),
        labels: target.labels.clone(),
        seed: target.seed,
    };
    let mut tensors = Vec::new();
    for (i, layer) in target.net.layers.iter().enumerate() {
        tensors.push((format!("net.w{i}"), layer.w.clone()));
        tensors.push((format!("net.b{i}"), layer.b.clone()));
    }
    let container = Container {
        kind: "target".into(),
        meta: serde_json::to_value(&meta).expect("target meta"),
        tensors,
    };
    write_container(path, &container)
}

pub fn load_target(path: &Path) -> Result<TargetModel> {
    let container = read_container(path)?;
    if container.kind != "target" {
        return Err(Error::format(
            12,
            format!("expected kind 'target', found '{}'", container.kind),
        ));
    }
    let meta: TargetMeta = serde_json::from_value(container.meta.clone())
        .map_err(|e| Error::format(12, format!("bad target header: {e}")))?;
    let hidden = &meta.sizes[1..meta.sizes.len() - 1];
    let mut target = TargetModel::init(meta.sizes[0], hidden, meta.labels, meta.seed)?;
    for (i, layer) in target.net.layers.iter_mut().enumerate() {
        let w = container.tensor(&format!("net.w{i}"))?;
        let b = container.tensor(&format!("net.b{i}"))?;
        if w.shape() != layer.w.shape() || b.shape() != layer.b.shape() {
            return Err(Error::format(12, format!("layer {i} shape mismatch")));
        }
        layer.w = w.clone();
        layer.b = b.clone();
    }
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ganstack::bundle::BundleSpec;
    use tempfile::tempdir;

    fn tiny_bundle() -> ModelBundle {
        ModelBundle::init(
            BundleSpec {
                mode: GanMode::Conditional,
                image_shape: vec![2, 2, 1],
                latent_width: 3,
                attr_count: 2,
                hidden: vec![5],
            },
            99,
        )
        .unwrap()
    }

    #[test]
    fn bundle_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bundle.cgmf");
        let bundle = tiny_bundle();
        save_bundle(&path, &bundle).unwrap();
        let loaded = load_bundle(&path).unwrap();
        assert_eq!(bundle, loaded);

        // A second save must produce identical bytes.
        let path2 = dir.path().join("bundle2.cgmf");
        save_bundle(&path2, &loaded).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bundle.cgmf");
        save_bundle(&path, &tiny_bundle()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        let err = parse_container(&bytes).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_blob_names_expected_and_actual() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bundle.cgmf");
        save_bundle(&path, &tiny_bundle()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 10);
        let err = parse_container(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expects") && msg.contains("has"), "msg: {msg}");
    }

    #[test]
    fn target_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("target.cgmf");
        let target = TargetModel::init(4, &[6], vec!["dim".into(), "bright".into()], 3).unwrap();
        save_target(&path, &target).unwrap();
        let loaded = load_target(&path).unwrap();
        assert_eq!(target, loaded);
    }
}
