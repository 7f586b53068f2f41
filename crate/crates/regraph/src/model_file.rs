//! Model persistence.
//!
//! ```json
//! {"version":1,"hyper":{"dim":64,...},"params":{"w_in":{"shape":[44,64],"data":[...]},...}}
//! ```
//!
//! Floats are written in shortest round-trip form, so a load after a save is
//! bit-exact. The bias is stored with shape `[D]`, every other tensor as
//! `[rows, cols]`.

use std::collections::BTreeMap;
use std::path::Path;

use regraph_core::linalg::Matrix;
use regraph_core::model::{GnnModel, Hyper, Params, MODEL_VERSION};
use regraph_core::vocab::NUM_FEATURES;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Serialize, Deserialize)]
struct HyperDoc {
    dim: usize,
    rounds: usize,
    embed_dim: usize,
    vocab_size: usize,
    vocab_version: u32,
    num_features: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    hyper: HyperDoc,
    params: BTreeMap<String, TensorDoc>,
}

pub fn model_to_string(model: &GnnModel) -> Result<String> {
    if !model.params.is_finite() {
        return Err(Error::Config(
            "refusing to save a model with non-finite parameters".into(),
        ));
    }
    let h = &model.hyper;
    let doc = ModelDoc {
        version: MODEL_VERSION,
        hyper: HyperDoc {
            dim: h.dim,
            rounds: h.rounds,
            embed_dim: h.embed_dim,
            vocab_size: h.vocab_size,
            vocab_version: h.vocab_version,
            num_features: NUM_FEATURES,
            seed: h.seed,
        },
        params: model
            .params
            .tensors()
            .into_iter()
            .map(|(name, m)| {
                let shape = if name == "b" {
                    vec![m.cols()]
                } else {
                    vec![m.rows(), m.cols()]
                };
                (
                    name.to_string(),
                    TensorDoc {
                        shape,
                        data: m.data().to_vec(),
                    },
                )
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&doc).expect("model serializes");
    s.push('\n');
    Ok(s)
}

pub fn parse_model(text: &str, path: &Path) -> Result<GnnModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::corrupt(path, e))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::corrupt(path, "missing version"))?;
    if version != u64::from(MODEL_VERSION) {
        return Err(Error::VersionUnknown {
            path: path.to_path_buf(),
            version,
        });
    }
    let doc: ModelDoc = serde_json::from_value(value).map_err(|e| Error::corrupt(path, e))?;
    if doc.hyper.num_features != NUM_FEATURES {
        return Err(Error::corrupt(
            path,
            format!("model expects {} node features", doc.hyper.num_features),
        ));
    }
    let hyper = Hyper {
        dim: doc.hyper.dim,
        rounds: doc.hyper.rounds,
        embed_dim: doc.hyper.embed_dim,
        vocab_size: doc.hyper.vocab_size,
        vocab_version: doc.hyper.vocab_version,
        seed: doc.hyper.seed,
    };
    let mut params = Params::zeros(&hyper);
    let mut tensors = doc.params;
    for (name, m) in params.tensors_mut() {
        let t = tensors
            .remove(name)
            .ok_or_else(|| Error::corrupt(path, format!("missing tensor `{name}`")))?;
        let expected = if name == "b" {
            vec![m.cols()]
        } else {
            vec![m.rows(), m.cols()]
        };
        if t.shape != expected || t.data.len() != m.data().len() {
            return Err(Error::corrupt(
                path,
                format!("tensor `{name}` has shape {:?}, expected {expected:?}", t.shape),
            ));
        }
        *m = Matrix::from_vec(m.rows(), m.cols(), t.data);
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::corrupt(path, format!("unexpected tensor `{extra}`")));
    }
    let model = GnnModel { hyper, params };
    if !model.params.is_finite() {
        return Err(Error::corrupt(path, "non-finite parameter"));
    }
    Ok(model)
}

pub fn save_model(model: &GnnModel, path: &Path) -> Result<()> {
    fsutil::write_file(path, model_to_string(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<GnnModel> {
    parse_model(&fsutil::read_to_string(path)?, path)
}
