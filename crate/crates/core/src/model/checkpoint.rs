use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GVNC";
const VERSION: u32 = 1;

/// Writes the configuration as JSON followed by every parameter block.
pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let cfg = serde_json::to_vec_pretty(&model.cfg).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for (name, v) in model.store.blocks() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(v.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(v.ncols() as u32).to_le_bytes());
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(&out).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Rebuilds the model from its stored configuration and restores every block.
pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let end = at
            .checked_add(n)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format(format!("{}: truncated checkpoint", path.display())))?;
        let s = &bytes[at..end];
        at = end;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(Error::Format(format!("{}: not a model checkpoint", path.display())));
    }
    let u32_of = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap()) as usize;
    let version = u32_of(take(4)?);
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let clen = u32_of(take(4)?);
    let cfg: ModelConfig =
        serde_json::from_slice(take(clen)?).map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let count = u32_of(take(4)?);
    let mut blocks = HashMap::new();
    for _ in 0..count {
        let nlen = u32_of(take(4)?);
        let name = std::str::from_utf8(take(nlen)?)
            .map_err(|e| Error::Format(e.to_string()))?
            .to_string();
        let rows = u32_of(take(4)?);
        let cols = u32_of(take(4)?);
        let data: Vec<f64> = take(rows * cols * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blocks.insert(name, Array2::from_shape_vec((rows, cols), data).unwrap());
    }
    if at != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let mut model = Model::new(cfg, 0, None)?;
    model.store.load_blocks(&blocks)?;
    Ok(model)
}
