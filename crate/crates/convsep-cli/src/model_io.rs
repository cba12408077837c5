//! Model persistence: a one-line JSON manifest (format version, model
//! config, transform settings, tensor names and shapes) followed by the
//! tensor data as little-endian f32 blobs in manifest order.

use crate::error::{CliError, Result};
use convsep::dsp::FrameSpec;
use convsep::model::{Model, ModelConfig, ModelParams};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A model plus the transform its inputs are expected to come from.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub model: Model,
    pub stft: FrameSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    model: ModelConfig,
    stft: FrameSpec,
    tensors: Vec<TensorEntry>,
}

/// Writes `model` to `path` (manifest line + f32 blobs).
pub fn save_model(model: &Model, stft: &FrameSpec, path: &Path) -> Result<()> {
    let names = model.params.tensor_names();
    let tensors = model.params.tensors();
    let manifest = Manifest {
        format_version: MODEL_FORMAT_VERSION,
        model: model.config.clone(),
        stft: *stft,
        tensors: names
            .iter()
            .zip(&tensors)
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))?;
    let header = serde_json::to_string(&manifest)
        .map_err(|e| CliError::data(format!("manifest serialization: {e}")))?;
    file.write_all(header.as_bytes())?;
    file.write_all(b"\n")?;
    let mut buf = Vec::new();
    for t in tensors {
        buf.clear();
        buf.reserve(4 * t.len());
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        file.write_all(&buf)?;
    }
    Ok(())
}

/// Reads a model written by [`save_model`]. Version, shape, and truncation
/// problems are distinct errors, and nothing partial is ever returned.
pub fn load_model(path: &Path) -> Result<SavedModel> {
    let mut file = fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;

    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CliError::data("model file has no manifest line"))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| CliError::data(format!("malformed model manifest: {e}")))?;
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(CliError::data(format!(
            "model format version mismatch: file has {}, this build reads {}",
            manifest.format_version, MODEL_FORMAT_VERSION
        )));
    }

    let mut params = ModelParams::zeros(&manifest.model).map_err(CliError::from)?;
    let expected_names = params.tensor_names();
    if manifest.tensors.len() != expected_names.len() {
        return Err(CliError::data(format!(
            "model manifest lists {} tensors, config requires {}",
            manifest.tensors.len(),
            expected_names.len()
        )));
    }

    let mut offset = newline + 1;
    for ((entry, name), tensor) in manifest
        .tensors
        .iter()
        .zip(&expected_names)
        .zip(params.tensors_mut())
    {
        if &entry.name != name || entry.shape != tensor.shape() {
            return Err(CliError::data(format!(
                "model shape mismatch: manifest has {} {:?}, config requires {} {:?}",
                entry.name,
                entry.shape,
                name,
                tensor.shape()
            )));
        }
        let need = 4 * tensor.len();
        if offset + need > bytes.len() {
            return Err(CliError::data(format!(
                "model file truncated in tensor {}",
                entry.name
            )));
        }
        for (i, v) in tensor.data_mut().iter_mut().enumerate() {
            let o = offset + 4 * i;
            *v = f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
        }
        offset += need;
    }
    if offset != bytes.len() {
        return Err(CliError::data(format!(
            "model file has {} trailing bytes",
            bytes.len() - offset
        )));
    }

    Ok(SavedModel {
        model: Model {
            config: manifest.model,
            params,
        },
        stft: manifest.stft,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use convsep::autodiff::Tensor;
    use convsep::dsp::{MagnitudeSpectrogram, Window};
    use convsep::model::{forward, ModelConfig, Variant};
    use tempfile::tempdir;

    fn frame() -> FrameSpec {
        FrameSpec {
            frame_size: 16,
            hop: 4,
            window: Window::Hann,
            sample_rate: 16_000,
        }
    }

    fn sample_model(variant: Variant) -> Model {
        let mut cfg = ModelConfig::new(variant, 3, 4, 9);
        cfg.rnn_hidden = 2;
        cfg.train.seed = 11;
        Model::init(cfg).unwrap()
    }

    #[test]
    fn roundtrip_preserves_forward_outputs_to_f32() {
        let dir = tempdir().unwrap();
        for variant in [Variant::Ff, Variant::Ccae, Variant::Rcae] {
            let model = sample_model(variant);
            let path = dir.path().join(format!("{}.cnv", model.config.variant.as_str()));
            save_model(&model, &frame(), &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded.model.config, model.config);
            assert_eq!(loaded.stft, frame());

            let x = MagnitudeSpectrogram::new(
                Tensor::from_fn(&[9, 6], |i| (i % 7) as f64 * 0.2),
                frame(),
            )
            .unwrap();
            let (before, _) = forward(&model, &x).unwrap();
            let (after, _) = forward(&loaded.model, &x).unwrap();
            for (a, b) in before.values().data().iter().zip(after.values().data()) {
                assert!((a - b).abs() / a.abs().max(1.0) < 1e-6);
            }
        }
    }

    #[test]
    fn truncated_blob_is_a_distinct_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.cnv");
        save_model(&sample_model(Variant::Ccae), &frame(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn shape_mismatch_is_a_distinct_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.cnv");
        save_model(&sample_model(Variant::Ccae), &frame(), &path).unwrap();
        let text = fs::read(&path).unwrap();
        let edited = String::from_utf8_lossy(&text).replacen("[3,9,4]", "[3,8,4]", 1);
        fs::write(&path, edited).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("shape mismatch"), "{err}");
    }

    #[test]
    fn version_mismatch_is_a_distinct_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.cnv");
        save_model(&sample_model(Variant::Ff), &frame(), &path).unwrap();
        let text = fs::read(&path).unwrap();
        let edited = String::from_utf8_lossy(&text)
            .replacen("\"format_version\":1", "\"format_version\":9", 1);
        fs::write(&path, edited).unwrap();
        let err = load_model(&path).unwrap_err().to_string();
        assert!(err.contains("version mismatch"), "{err}");
    }
}
