//! Parameter checkpoints: a JSON object mapping each parameter name to
//! `{"shape": [rows, cols], "data": [...]}` with `data` in row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Param;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    shape: [usize; 2],
    data: Vec<f64>,
}

/// Named tensors in name order.
pub type Checkpoint = BTreeMap<String, Matrix>;

pub fn checkpoint_to_json<'a>(params: impl IntoIterator<Item = &'a Param>) -> Result<String> {
    let mut map = BTreeMap::new();
    for p in params {
        let entry = Entry { shape: [p.value.rows(), p.value.cols()], data: p.value.as_slice().to_vec() };
        if map.insert(p.name.clone(), entry).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter name {:?}", p.name)));
        }
    }
    Ok(serde_json::to_string_pretty(&map)? + "\n")
}

pub fn checkpoint_from_json(text: &str) -> Result<Checkpoint> {
    let raw: BTreeMap<String, Entry> = serde_json::from_str(text)?;
    let mut out = BTreeMap::new();
    for (name, e) in raw {
        let [r, c] = e.shape;
        if r.checked_mul(c) != Some(e.data.len()) {
            return Err(Error::Checkpoint(format!(
                "{name}: shape {r}x{c} does not match {} values",
                e.data.len()
            )));
        }
        if e.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Checkpoint(format!("{name}: non-finite value")));
        }
        out.insert(name, Matrix::from_vec(r, c, e.data)?);
    }
    Ok(out)
}

pub fn save_checkpoint<'a>(params: impl IntoIterator<Item = &'a Param>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_json(params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    checkpoint_from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Removes `name` from the checkpoint, requiring the given shape.
pub(crate) fn take(ckpt: &mut Checkpoint, name: &str, shape: (usize, usize)) -> Result<Matrix> {
    let m = ckpt.remove(name).ok_or_else(|| Error::Checkpoint(format!("missing parameter {name:?}")))?;
    if m.shape() != shape {
        return Err(Error::Checkpoint(format!("{name}: expected shape {shape:?}, found {:?}", m.shape())));
    }
    Ok(m)
}
