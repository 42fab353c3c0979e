//! Model bundle: one JSON file holding everything [`Model`] needs, with a
//! format version and a SHA-256 checksum of the model payload.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dissim::{PcaEmbedding, PhiTransform};
use crate::error::{Error, Result};
use crate::focalsets::{FocalScheme, FocalSets, Frame, Subset};
use crate::network::{InputKind, Model, NetworkParams, Standardizer};
use crate::ocsvm::OneClassSvm;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Payload {
    clusters: usize,
    scheme: Option<FocalScheme>,
    /// Focal sets as bit masks, in column order.
    focal_sets: Vec<u64>,
    input_kind: InputKind,
    hidden_units: Vec<usize>,
    params: NetworkParams,
    phi: PhiTransform,
    svm: Option<OneClassSvm>,
    pca: Option<PcaEmbedding>,
    scaler: Option<Standardizer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    checksum: String,
    model: serde_json::Value,
}

fn digest(model: &serde_json::Value) -> Result<String> {
    let canonical = serde_json::to_string(model)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

pub fn to_json(model: &Model) -> Result<String> {
    let payload = Payload {
        clusters: model.focal.clusters(),
        scheme: model.focal.scheme(),
        focal_sets: model.focal.subsets().iter().map(|s| s.0).collect(),
        input_kind: model.input_kind(),
        hidden_units: model.params.hidden_units(),
        params: model.params.clone(),
        phi: model.phi,
        svm: model.svm.clone(),
        pca: model.pca.clone(),
        scaler: model.scaler.clone(),
    };
    let value = serde_json::to_value(&payload)?;
    let envelope = Envelope { format_version: FORMAT_VERSION, checksum: digest(&value)?, model: value };
    Ok(serde_json::to_string_pretty(&envelope)?)
}

pub fn from_json(text: &str) -> Result<Model> {
    let envelope: Envelope = serde_json::from_str(text)?;
    if envelope.format_version != FORMAT_VERSION {
        return Err(Error::Bundle(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            envelope.format_version
        )));
    }
    if digest(&envelope.model)? != envelope.checksum {
        return Err(Error::Bundle("checksum mismatch".into()));
    }
    let p: Payload = serde_json::from_value(envelope.model)?;
    let frame = Frame::new(p.clusters)?;
    let subsets: Vec<Subset> = p.focal_sets.into_iter().map(Subset).collect();
    let focal = match p.scheme {
        Some(scheme) => FocalSets::build(frame, scheme)?,
        None => FocalSets::from_subsets(frame, subsets.clone()).map_err(|e| Error::Bundle(e.to_string()))?,
    };
    if focal.subsets() != subsets.as_slice() {
        return Err(Error::Bundle("focal sets do not match the recorded scheme".into()));
    }
    if p.params.focal_count() != focal.len() || p.params.hidden_units() != p.hidden_units {
        return Err(Error::Bundle("layer dimensions do not match the recorded architecture".into()));
    }
    let model = Model { focal, params: p.params, phi: p.phi, svm: p.svm, pca: p.pca, scaler: p.scaler };
    if model.input_kind() != p.input_kind {
        return Err(Error::Bundle("input kind does not match the stored embedding".into()));
    }
    if model.scaler.as_ref().is_some_and(|s| s.mean.len() != model.params.input_dim()) {
        return Err(Error::Bundle("scaler width does not match the network".into()));
    }
    if let Some(svm) = &model.svm {
        if svm.input_dim() != model.params.input_dim() {
            return Err(Error::Bundle("SVM input dimension does not match the network".into()));
        }
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
