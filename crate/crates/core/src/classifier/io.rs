//! Versioned binary model files.
//!
//! ```text
//! base:     "DRCM" | version u32 | header_len u64 | header JSON
//!           | n_weights u64 | f64 * n | n_bias u64 | f64 * n
//! ensemble: "DREN" | version u32 | members u32 | (len u64 | base blob) * members
//! ```
//! Integers and floats are little-endian; floats are stored bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaseClassifier, ClassifierError, Ensemble, FeaturizerConfig, Model, TrainMeta};
use crate::label::DialectLabel;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const BASE_MAGIC: &[u8; 4] = b"DRCM";
const ENSEMBLE_MAGIC: &[u8; 4] = b"DREN";

#[derive(Serialize, Deserialize)]
struct Header {
    featurizer: FeaturizerConfig,
    labels: Vec<DialectLabel>,
    train_meta: TrainMeta,
}

fn put_floats(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn base_to_bytes(model: &BaseClassifier) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        featurizer: model.featurizer.clone(),
        labels: model.labels.clone(),
        train_meta: model.train_meta.clone(),
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(32 + header.len() + 8 * (model.weights.len() + model.bias.len()));
    out.extend_from_slice(BASE_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    put_floats(&mut out, &model.weights);
    put_floats(&mut out, &model.bias);
    out
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    match model {
        Model::Base(b) => base_to_bytes(b),
        Model::Ensemble(e) => {
            let mut out = Vec::new();
            out.extend_from_slice(ENSEMBLE_MAGIC);
            out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
            out.extend_from_slice(&(e.members().len() as u32).to_le_bytes());
            for m in e.members() {
                let blob = base_to_bytes(m);
                out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
                out.extend_from_slice(&blob);
            }
            out
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        if self.buf.len() < n {
            return Err(ClassifierError::Format("truncated model file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ClassifierError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, ClassifierError> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| ClassifierError::Format("length field exceeds file size".into()))
    }

    fn floats(&mut self) -> Result<Vec<f64>, ClassifierError> {
        let n = self.u64()? as usize;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| ClassifierError::Format("bad length".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn version(&mut self) -> Result<(), ClassifierError> {
        match self.u32()? {
            MODEL_FORMAT_VERSION => Ok(()),
            v => Err(ClassifierError::Format(format!("unsupported format version {v}"))),
        }
    }
}

fn base_from(reader: &mut Reader<'_>) -> Result<BaseClassifier, ClassifierError> {
    if reader.take(4)? != BASE_MAGIC {
        return Err(ClassifierError::Format("bad magic".into()));
    }
    reader.version()?;
    let n = reader.len()?;
    let header: Header = serde_json::from_slice(reader.take(n)?).map_err(|e| ClassifierError::Format(e.to_string()))?;
    let weights = reader.floats()?;
    let bias = reader.floats()?;
    BaseClassifier::from_parts(header.featurizer, header.labels, weights, bias, header.train_meta)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model, ClassifierError> {
    let mut reader = Reader { buf: bytes };
    let model = match bytes.get(..4) {
        Some(m) if m == BASE_MAGIC => Model::Base(base_from(&mut reader)?),
        Some(m) if m == ENSEMBLE_MAGIC => {
            reader.take(4)?;
            reader.version()?;
            let count = reader.u32()?;
            let mut members = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let n = reader.len()?;
                let mut sub = Reader { buf: reader.take(n)? };
                members.push(base_from(&mut sub)?);
            }
            Model::Ensemble(Ensemble::new(members)?)
        }
        _ => return Err(ClassifierError::Format("not a model file".into())),
    };
    if !reader.buf.is_empty() {
        return Err(ClassifierError::Format("trailing bytes".into()));
    }
    Ok(model)
}

pub fn save_model(path: &Path, model: &Model) -> Result<(), ClassifierError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, ClassifierError> {
    from_bytes(&std::fs::read(path)?)
}
