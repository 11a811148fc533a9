//! Checkpoint interchange format.
//!
//! A checkpoint is a JSON manifest
//!
//! ```json
//! {"version": 1, "hidden_sizes": [650, 650], "embedding_size": 650,
//!  "vocab_file": "vocab.txt",
//!  "tensors": [{"name": "embeddings", "shape": [50000, 650], "dtype": "f32",
//!               "file": "weights.bin", "byte_offset": 0}, ...]}
//! ```
//!
//! plus raw little-endian row-major blobs. Paths are relative to the manifest.
//! Required tensors: `embeddings`, `layer{l}.W_{f,i,c,o}`, `layer{l}.V_{f,i,c,o}`,
//! `layer{l}.b_{f,i,c,o}`, `decoder.weight` and `decoder.bias`. The vocabulary
//! file holds one token per line; the line number is the token id.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gate, LanguageModel, LstmLayerParams, PerGate};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use crate::vocab::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn parse(name: &str, raw: &str) -> Result<Self> {
        match raw {
            "f32" => Ok(DType::F32),
            "f64" => Ok(DType::F64),
            other => Err(Error::Dtype {
                name: name.to_string(),
                dtype: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Kept as a string so an unsupported value can be reported per tensor.
    pub dtype: String,
    pub file: PathBuf,
    pub byte_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub hidden_sizes: Vec<usize>,
    pub embedding_size: usize,
    pub vocab_file: PathBuf,
    pub tensors: Vec<TensorEntry>,
    /// Optional unknown-word token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unk_token: Option<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                message: format!("unsupported version {}", manifest.version),
            });
        }
        if manifest.hidden_sizes.is_empty() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                message: "hidden_sizes is empty".into(),
            });
        }
        Ok(manifest)
    }
}

fn gate_tensor_name(layer: usize, kind: &str, gate: Gate) -> String {
    format!("layer{layer}.{kind}_{}", gate.suffix())
}

struct TensorReader<'a> {
    base: &'a Path,
    entries: HashMap<&'a str, &'a TensorEntry>,
}

impl<'a> TensorReader<'a> {
    fn read(&self, name: &str, expected: &[usize]) -> Result<Vec<f64>> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::MissingTensor(name.to_string()))?;
        if entry.shape != expected {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: expected.to_vec(),
                found: entry.shape.clone(),
            });
        }
        let dtype = DType::parse(name, &entry.dtype)?;
        let count: usize = expected.iter().product();
        let needed = (count * dtype.size()) as u64;
        let path = self.base.join(&entry.file);
        let mut file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let available = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        if entry.byte_offset + needed > available {
            return Err(Error::Truncated {
                name: name.to_string(),
                offset: entry.byte_offset,
                needed,
                available,
            });
        }
        file.seek(SeekFrom::Start(entry.byte_offset))
            .map_err(|e| Error::io(&path, e))?;
        let mut bytes = vec![0u8; needed as usize];
        file.read_exact(&mut bytes).map_err(|e| Error::io(&path, e))?;
        Ok(match dtype {
            DType::F32 => bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect(),
            DType::F64 => bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        })
    }

    fn matrix<T: Scalar>(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix<T>> {
        let data = self.read(name, &[rows, cols])?;
        Matrix::from_vec(rows, cols, data.into_iter().map(T::lit).collect())
    }

    fn vector<T: Scalar>(&self, name: &str, len: usize) -> Result<Vec<T>> {
        Ok(self.read(name, &[len])?.into_iter().map(T::lit).collect())
    }
}

/// Loads a checkpoint, validating every tensor against the declared dimensions.
/// Stored values are converted to `T` (32-bit blobs are widened exactly to `f64`).
pub fn load_model<T: Scalar>(manifest_path: &Path) -> Result<LanguageModel<T>> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let vocab_path = base.join(&manifest.vocab_file);
    let vocab_text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let mut vocabulary = Vocabulary::from_lines(&vocab_text)?;
    if let Some(unk) = &manifest.unk_token {
        vocabulary = vocabulary.with_unk(unk)?;
    }
    let vocab = vocabulary.len();

    let reader = TensorReader {
        base,
        entries: manifest
            .tensors
            .iter()
            .map(|t| (t.name.as_str(), t))
            .collect(),
    };

    let embeddings = reader.matrix("embeddings", vocab, manifest.embedding_size)?;
    let mut layers = Vec::with_capacity(manifest.hidden_sizes.len());
    let mut input = manifest.embedding_size;
    for (l, &hidden) in manifest.hidden_sizes.iter().enumerate() {
        let w = PerGate::from_fn(|g| gate_tensor_name(l, "W", g))
            .try_map(|_, name| reader.matrix(&name, hidden, input))?;
        let v = PerGate::from_fn(|g| gate_tensor_name(l, "V", g))
            .try_map(|_, name| reader.matrix(&name, hidden, hidden))?;
        let b = PerGate::from_fn(|g| gate_tensor_name(l, "b", g))
            .try_map(|_, name| reader.vector(&name, hidden))?;
        layers.push(LstmLayerParams::new(w, v, b)?);
        input = hidden;
    }
    let decoder = reader.matrix("decoder.weight", vocab, input)?;
    let decoder_intercept = reader.vector("decoder.bias", vocab)?;
    LanguageModel::new(embeddings, layers, decoder, decoder_intercept, vocabulary)
}

/// Writes `model` as `manifest.json`, `vocab.txt` and `weights.bin` under `dir`.
/// Returns the manifest path.
pub fn save_model<T: Scalar>(model: &LanguageModel<T>, dir: &Path, dtype: DType) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let blob_name = PathBuf::from("weights.bin");
    let mut blob: Vec<u8> = Vec::new();
    let mut tensors = Vec::new();

    let mut push = |name: String, shape: Vec<usize>, values: &[T]| {
        let offset = blob.len() as u64;
        for &v in values {
            match dtype {
                DType::F32 => blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
                DType::F64 => blob.extend_from_slice(&v.as_f64().to_le_bytes()),
            }
        }
        tensors.push(TensorEntry {
            name,
            shape,
            dtype: match dtype {
                DType::F32 => "f32".into(),
                DType::F64 => "f64".into(),
            },
            file: blob_name.clone(),
            byte_offset: offset,
        });
    };

    let emb = model.embeddings();
    push("embeddings".into(), emb.shape().to_vec(), emb.as_slice());
    for (l, layer) in model.layers().iter().enumerate() {
        for gate in Gate::ALL {
            let w = layer.input_weights.get(gate);
            push(gate_tensor_name(l, "W", gate), w.shape().to_vec(), w.as_slice());
        }
        for gate in Gate::ALL {
            let v = layer.recurrent_weights.get(gate);
            push(gate_tensor_name(l, "V", gate), v.shape().to_vec(), v.as_slice());
        }
        for gate in Gate::ALL {
            let b = layer.intercepts.get(gate);
            push(gate_tensor_name(l, "b", gate), vec![b.len()], b);
        }
    }
    let dec = model.decoder();
    push("decoder.weight".into(), dec.shape().to_vec(), dec.as_slice());
    push(
        "decoder.bias".into(),
        vec![model.vocab_size()],
        model.decoder_intercept(),
    );

    let manifest = Manifest {
        version: FORMAT_VERSION,
        hidden_sizes: model.hidden_sizes(),
        embedding_size: model.embedding_size(),
        vocab_file: PathBuf::from("vocab.txt"),
        tensors,
        unk_token: model
            .vocabulary()
            .unk_id()
            .and_then(|id| model.vocabulary().token(id))
            .map(str::to_string),
    };

    let write = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    write("weights.bin", &blob)?;
    write("vocab.txt", model.vocabulary().to_lines().as_bytes())?;
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write("manifest.json", json.as_bytes())?;
    Ok(dir.join("manifest.json"))
}
