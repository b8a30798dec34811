//! Checkpoint file: the line `xmodal-checkpoint v1` followed by a JSON
//! document holding the encoder config and every named parameter array.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_HEADER: &str = "xmodal-checkpoint v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    config: EncoderConfig,
    params: Vec<NamedArray>,
}

pub fn format_checkpoint<T: Real>(params: &EncoderParams<T>) -> String {
    let file = CheckpointFile {
        config: params.config.clone(),
        params: params
            .named_arrays()
            .into_iter()
            .map(|(name, (r, c), values)| NamedArray {
                name,
                shape: [r, c],
                values: values.into_iter().map(Real::as_f64).collect(),
            })
            .collect(),
    };
    format!(
        "{CHECKPOINT_HEADER}\n{}\n",
        serde_json::to_string_pretty(&file).expect("checkpoint serializes")
    )
}

pub fn parse_checkpoint<T: Real>(text: &str) -> Result<EncoderParams<T>> {
    let body = text
        .strip_prefix(CHECKPOINT_HEADER)
        .and_then(|rest| rest.strip_prefix('\n').or_else(|| rest.strip_prefix("\r\n")))
        .ok_or_else(|| Error::Checkpoint(format!("missing `{CHECKPOINT_HEADER}` header")))?;
    let file: CheckpointFile = serde_json::from_str(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut arrays: BTreeMap<String, NamedArray> = BTreeMap::new();
    for a in file.params {
        if a.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("{}: non-finite value", a.name)));
        }
        let name = a.name.clone();
        if arrays.insert(name.clone(), a).is_some() {
            return Err(Error::Checkpoint(format!("duplicate array {name}")));
        }
    }
    let mut params = EncoderParams::<T>::init(&file.config, 0)
        .map_err(|e| Error::Checkpoint(format!("invalid encoder config: {e}")))?;
    params.load_named(|name, shape| {
        let a = arrays
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
        if a.shape != [shape.0, shape.1] {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {:?} does not match config ({}, {})",
                a.shape, shape.0, shape.1
            )));
        }
        Ok(a.values.into_iter().map(T::lit).collect())
    })?;
    if let Some(extra) = arrays.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected array {extra}")));
    }
    Ok(params)
}

pub fn save_checkpoint<T: Real>(params: &EncoderParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<EncoderParams<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text).map_err(|e| e.context(path.display().to_string()))
}
