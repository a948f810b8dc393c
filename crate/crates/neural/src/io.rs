//! Model parameter archives in the same zip-of-`.npy` convention as clouds.

use std::io::Cursor;
use std::path::Path;

use amptcr_core::cloudstore::{npy_bytes, parse_npy, read_member, write_atomic, zip_members};
use serde::{Deserialize, Serialize};
use zip::ZipArchive;

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, TargetScale};
use crate::params::ParamSet;
use crate::tensor::Tensor;

pub const MODEL_MEMBER: &str = "model.json";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    format_version: u32,
    config: ModelConfig,
    target: TargetScale,
    params: Vec<String>,
}

pub fn model_bytes(model: &Model) -> Result<Vec<u8>> {
    let meta = ModelMeta {
        format_version: MODEL_FORMAT_VERSION,
        config: model.config.clone(),
        target: model.target,
        params: model.params.names().to_vec(),
    };
    let names: Vec<String> = model.params.names().iter().map(|n| format!("{n}.npy")).collect();
    let mut members: Vec<(&str, Vec<u8>)> = names
        .iter()
        .zip(model.params.tensors())
        .map(|(n, t)| (n.as_str(), npy_bytes(&[t.rows, t.cols], &t.data)))
        .collect();
    members.push((MODEL_MEMBER, serde_json::to_vec_pretty(&meta)?));
    Ok(zip_members(members)?)
}

pub fn parse_model(bytes: &[u8]) -> Result<Model> {
    let mut zip = ZipArchive::new(Cursor::new(bytes))?;
    let meta: ModelMeta = serde_json::from_slice(&read_member(&mut zip, MODEL_MEMBER)?)?;
    if meta.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Archive {
            member: MODEL_MEMBER.into(),
            msg: format!("unsupported format version {}", meta.format_version),
        });
    }
    let mut params = ParamSet::new();
    for name in &meta.params {
        let member = format!("{name}.npy");
        let (shape, data) = parse_npy::<f64>(&member, &read_member(&mut zip, &member)?)?;
        let [rows, cols] = shape[..] else {
            return Err(Error::Archive {
                member,
                msg: format!("expected a 2-D array, got shape {shape:?}"),
            });
        };
        params.insert(name.clone(), Tensor::from_vec(rows, cols, data));
    }
    meta.config.validate()?;
    Ok(Model {
        config: meta.config,
        params,
        target: meta.target,
    })
}

pub fn write_model(model: &Model, path: &Path) -> Result<()> {
    Ok(write_atomic(path, &model_bytes(model)?)?)
}

pub fn read_model(path: &Path) -> Result<Model> {
    parse_model(&std::fs::read(path)?)
}
