//! Checkpoint file format.
//!
//! Layout: the magic line `USTR1\n`, one line of JSON header, a blank
//! line, then every trainable tensor as little-endian 64-bit reals in the
//! order the header declares. The frozen encoder is reconstructed from its
//! seed and never serialized.

use super::{Model, TransformerKind};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

const MAGIC: &[u8] = b"USTR1\n";

#[derive(Serialize, Deserialize)]
struct Header {
    transformer: String,
    widths: [usize; 4],
    num_styles: usize,
    encoder_seed: u64,
    decoder_seed: u64,
    eps: f64,
    w_s: Option<f64>,
    tensors: Vec<TensorMeta>,
}

#[derive(Serialize, Deserialize, PartialEq, Debug)]
struct TensorMeta {
    name: String,
    shape: [usize; 4],
}

fn tensor_names(model: &Model) -> Vec<String> {
    let mut names: Vec<String> = (0..model.decoder.layers.len())
        .flat_map(|i| [format!("decoder.conv{i}.weight"), format!("decoder.conv{i}.bias")])
        .collect();
    if model.cin.is_some() {
        names.push("cin.gamma".to_string());
        names.push("cin.beta".to_string());
    }
    names
}

/// Serialize the model to checkpoint bytes.
pub fn checkpoint_bytes(model: &Model) -> Vec<u8> {
    let mut tensors: Vec<(&str, &crate::tensor::Tensor)> = Vec::new();
    let names = tensor_names(model);
    let mut refs: Vec<&crate::tensor::Tensor> = model
        .decoder
        .layers
        .iter()
        .flat_map(|l| [&l.weights, &l.bias])
        .collect();
    if let Some(cin) = &model.cin {
        refs.push(&cin.gamma);
        refs.push(&cin.beta);
    }
    for (name, t) in names.iter().zip(&refs) {
        tensors.push((name, t));
    }

    let header = Header {
        transformer: model.kind.as_str().to_string(),
        widths: model.widths(),
        num_styles: model.cin.as_ref().map_or(0, |c| c.num_styles()),
        encoder_seed: model.encoder_seed,
        decoder_seed: model.decoder_seed,
        eps: model.eps,
        w_s: model.trained_w_s,
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorMeta {
                name: name.to_string(),
                shape: [t.shape.n, t.shape.c, t.shape.h, t.shape.w],
            })
            .collect(),
    };
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(serde_json::to_string(&header).expect("header serializes").as_bytes());
    out.extend_from_slice(b"\n\n");
    for (_, t) in &tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model))?;
    Ok(())
}

/// Parse checkpoint bytes back into a model.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format(
            "not a checkpoint: magic \"USTR1\" missing".to_string(),
        ));
    }
    let rest = &bytes[MAGIC.len()..];
    let header_end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("checkpoint header line unterminated".to_string()))?;
    let header: Header = serde_json::from_slice(&rest[..header_end])
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    if rest.len() <= header_end + 1 || rest[header_end + 1] != b'\n' {
        return Err(Error::Format(
            "checkpoint header must be terminated by a blank line".to_string(),
        ));
    }
    let payload = &rest[header_end + 2..];

    let kind = TransformerKind::parse(&header.transformer)
        .map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    let mut model = match kind {
        TransformerKind::Adain => {
            Model::new_adain(header.encoder_seed, header.decoder_seed, header.widths)
        }
        TransformerKind::Cin => Model::new_cin(
            header.encoder_seed,
            header.decoder_seed,
            header.widths,
            header.num_styles,
        ),
    };
    model.eps = header.eps;
    model.trained_w_s = header.w_s;

    let expected_names = tensor_names(&model);
    if header.tensors.len() != expected_names.len() {
        return Err(Error::Format(format!(
            "checkpoint declares {} tensors, architecture has {}",
            header.tensors.len(),
            expected_names.len()
        )));
    }
    let mut params = model.trainable_params();
    let mut offset = 0usize;
    for ((meta, name), param) in header
        .tensors
        .iter()
        .zip(&expected_names)
        .zip(params.iter_mut())
    {
        if &meta.name != name {
            return Err(Error::Format(format!(
                "checkpoint tensor {} where {} was expected",
                meta.name, name
            )));
        }
        let shape = param.shape;
        if meta.shape != [shape.n, shape.c, shape.h, shape.w] {
            return Err(Error::Format(format!(
                "checkpoint tensor {} has shape {:?}, architecture needs {}",
                meta.name, meta.shape, shape
            )));
        }
        let numel = param.numel();
        let need = numel * 8;
        if payload.len() < offset + need {
            return Err(Error::Format(format!(
                "checkpoint payload truncated at tensor {}",
                meta.name
            )));
        }
        for (i, chunk) in payload[offset..offset + need].chunks_exact(8).enumerate() {
            param.data[i] = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        offset += need;
    }
    if offset != payload.len() {
        return Err(Error::Format(format!(
            "checkpoint payload has {} trailing bytes",
            payload.len() - offset
        )));
    }
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}
