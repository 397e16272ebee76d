//! Binary checkpoint format.
//!
//! Layout: 8-byte magic `PMTCKPT\0`, u32 format version, u32 header length,
//! a UTF-8 JSON header, then the tensor payload. All integers and values are
//! little-endian. Tensor offsets in the header are relative to the payload.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::transformer::{Precision, TranslationModel};
use crate::model::vocab::{TokenKind, Vocab};
use crate::numerics::{Scalar, SeededRng};

pub const MAGIC: &[u8; 8] = b"PMTCKPT\0";
pub const FORMAT_VERSION: u32 = 1;
const PREAMBLE: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    precision: Precision,
    vocab: Vec<TokenKind>,
    encoder_origins: Vec<usize>,
    decoder_origins: Vec<usize>,
    metadata: BTreeMap<String, serde_json::Value>,
    tensors: Vec<TensorEntry>,
}

/// A loaded checkpoint: the model plus free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: TranslationModel<T>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn dtype_width(dtype: &str) -> Option<usize> {
    match dtype {
        "f16" => Some(2),
        "f32" => Some(4),
        "f64" => Some(8),
        _ => None,
    }
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Checkpoint { offset: offset as u64, message: message.into() }
}

/// Serializes a model. f16-precision models store 2-byte weights; others
/// store the model's own scalar width.
pub fn checkpoint_bytes<T: Scalar>(model: &TranslationModel<T>, metadata: &BTreeMap<String, serde_json::Value>) -> Result<Vec<u8>> {
    let dtype = match model.precision() {
        Precision::F16 => "f16",
        Precision::F32 => T::DTYPE,
    };
    let width = dtype_width(dtype).ok_or_else(|| Error::invalid(format!("unsupported dtype {dtype}")))?;
    let mut payload = Vec::new();
    let mut entries = Vec::new();
    for (name, t) in model.tensors() {
        entries.push(TensorEntry { name, dtype: dtype.to_string(), shape: t.shape().to_vec(), offset: payload.len() as u64 });
        payload.reserve(t.numel() * width);
        for &v in t.data() {
            match dtype {
                "f16" => payload.extend_from_slice(&f16::from_f64(v.f64()).to_le_bytes()),
                "f32" => payload.extend_from_slice(&(v.f64() as f32).to_le_bytes()),
                _ => payload.extend_from_slice(&v.f64().to_le_bytes()),
            }
        }
    }
    let header = Header {
        config: model.config().clone(),
        precision: model.precision(),
        vocab: model.vocab().tokens().to_vec(),
        encoder_origins: model.layer_origins(crate::model::Side::Encoder),
        decoder_origins: model.layer_origins(crate::model::Side::Decoder),
        metadata: metadata.clone(),
        tensors: entries,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Parses checkpoint bytes. Errors carry the byte offset of the problem.
pub fn checkpoint_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    if bytes.len() < PREAMBLE {
        return Err(err(bytes.len(), format!("truncated preamble ({} of {PREAMBLE} bytes)", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(err(0, "bad magic; not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(err(8, format!("unsupported format version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let payload_start = PREAMBLE
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| err(12, format!("header length {header_len} runs past end of file ({} bytes)", bytes.len())))?;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..payload_start]).map_err(|e| err(PREAMBLE + e.column().saturating_sub(1), format!("malformed header: {e}")))?;
    let payload = &bytes[payload_start..];

    let config = header.config.clone();
    config.validate().map_err(|e| err(PREAMBLE, e.to_string()))?;
    if header.encoder_origins.len() != config.n_encoder_layers || header.decoder_origins.len() != config.n_decoder_layers {
        return Err(err(PREAMBLE, "layer origin lists disagree with the configured layer counts"));
    }
    let vocab = Vocab::try_from(header.vocab.clone()).map_err(|e| err(PREAMBLE, e.to_string()))?;

    let mut by_name: HashMap<&str, &TensorEntry> = HashMap::new();
    for e in &header.tensors {
        if by_name.insert(e.name.as_str(), e).is_some() {
            return Err(err(PREAMBLE, format!("duplicate tensor {}", e.name)));
        }
    }
    // A freshly shaped model whose values are all overwritten below.
    let mut model = TranslationModel::<T>::new(config.clone(), vocab, &SeededRng::new(0)).map_err(|e| err(PREAMBLE, e.to_string()))?;
    let mut failure: Option<Error> = None;
    let mut seen = 0;
    model.params_mut().visit_mut(&mut |name, t| {
        if failure.is_some() {
            return;
        }
        let Some(entry) = by_name.get(name.as_str()) else {
            failure = Some(err(PREAMBLE, format!("tensor {name} missing from directory")));
            return;
        };
        seen += 1;
        match read_tensor::<T>(entry, payload, payload_start, t.shape()) {
            Ok(values) => t.data_mut().copy_from_slice(&values),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if seen != header.tensors.len() {
        return Err(err(PREAMBLE, format!("directory lists {} tensors, model has {seen}", header.tensors.len())));
    }
    for (layer, &o) in model.params_mut().encoder.iter_mut().zip(&header.encoder_origins) {
        layer.origin = o;
    }
    for (layer, &o) in model.params_mut().decoder.iter_mut().zip(&header.decoder_origins) {
        layer.origin = o;
    }
    let (config, vocab, params, _) = model.into_parts();
    let model = TranslationModel::from_parts(config, vocab, params, header.precision).map_err(|e| err(PREAMBLE, e.to_string()))?;
    Ok(Checkpoint { model, metadata: header.metadata })
}

fn read_tensor<T: Scalar>(entry: &TensorEntry, payload: &[u8], base: usize, want: &[usize]) -> Result<Vec<T>> {
    if entry.shape != want {
        return Err(err(PREAMBLE, format!("tensor {}: shape {:?}, expected {want:?}", entry.name, entry.shape)));
    }
    let width = dtype_width(&entry.dtype).ok_or_else(|| err(PREAMBLE, format!("tensor {}: unknown dtype {}", entry.name, entry.dtype)))?;
    let n: usize = want.iter().product();
    let start = entry.offset as usize;
    let end = start + n * width;
    if end > payload.len() {
        return Err(err(base + payload.len(), format!("tensor {} needs bytes {}..{} but the file ends at {}", entry.name, base + start, base + end, base + payload.len())));
    }
    let raw = &payload[start..end];
    let mut out = Vec::with_capacity(n);
    for (i, c) in raw.chunks_exact(width).enumerate() {
        let v = match width {
            2 => f16::from_le_bytes([c[0], c[1]]).to_f64(),
            4 => f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64,
            _ => f64::from_le_bytes(c.try_into().expect("8 bytes")),
        };
        if !v.is_finite() {
            return Err(err(base + start + i * width, format!("tensor {}: non-finite value", entry.name)));
        }
        out.push(T::of(v));
    }
    Ok(out)
}

pub fn save_checkpoint<T: Scalar>(model: &TranslationModel<T>, metadata: &BTreeMap<String, serde_json::Value>, path: &Path) -> Result<String> {
    let bytes = checkpoint_bytes(model, metadata)?;
    crate::util::atomic_write(path, &bytes)?;
    Ok(fingerprint(&bytes))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}

/// Hex sha256 of a byte string.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Size of a model's weights in their storage precision.
pub fn storage_bytes<T: Scalar>(model: &TranslationModel<T>) -> usize {
    let width = match model.precision() {
        Precision::F16 => 2,
        Precision::F32 => std::mem::size_of::<T>(),
    };
    model.parameter_count() * width
}
