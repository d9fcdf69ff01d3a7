//! Binary checkpoints.
//!
//! Layout (all integers u32 little-endian):
//!
//! ```text
//! "GCN1" version
//! layers hidden input_dim vocab_size relation_count
//! vocab_size × (len, utf-8 bytes)
//! relation_count × (len, utf-8 bytes)
//! tensors in Params::tensors_mut order: rows cols, then rows·cols f32 LE, row-major
//! ```

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{GcnConfig, GcnError, GcnModel, Params};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCN1";
const VERSION: u32 = 1;

fn err(e: impl std::fmt::Display) -> GcnError {
    GcnError::Checkpoint(e.to_string())
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<(), GcnError> {
    let v = u32::try_from(v).map_err(err)?;
    w.write_all(&v.to_le_bytes()).map_err(err)
}

fn get_u32(r: &mut impl Read) -> Result<usize, GcnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(err)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn put_str(w: &mut impl Write, s: &str) -> Result<(), GcnError> {
    put_u32(w, s.len())?;
    w.write_all(s.as_bytes()).map_err(err)
}

fn get_str(r: &mut impl Read) -> Result<String, GcnError> {
    let n = get_u32(r)?;
    let mut b = vec![0u8; n];
    r.read_exact(&mut b).map_err(err)?;
    String::from_utf8(b).map_err(err)
}

/// Row/column shape of each tensor, in `tensors_mut` order.
fn tensor_shapes(cfg: &GcnConfig) -> Vec<(usize, usize)> {
    let p = Params::zeros(cfg);
    let mut shapes = vec![p.embeddings.shape()];
    for l in &p.layers {
        for d in 0..3 {
            shapes.push(l.w[d].shape());
            shapes.push((l.b[d].len(), 1));
            shapes.push((l.gate_w[d].len(), 1));
            shapes.push((1, 1));
        }
    }
    shapes.push(p.output.shape());
    shapes
}

pub fn write_checkpoint(model: &GcnModel, w: &mut impl Write) -> Result<(), GcnError> {
    let cfg = &model.cfg;
    w.write_all(CHECKPOINT_MAGIC).map_err(err)?;
    put_u32(w, VERSION as usize)?;
    for v in [cfg.layers, cfg.hidden, cfg.input_dim, cfg.vocab.len(), cfg.relations.len()] {
        put_u32(w, v)?;
    }
    for s in cfg.vocab.iter().chain(&cfg.relations) {
        put_str(w, s)?;
    }
    let mut params = model.params.clone();
    for ((_, t), (rows, cols)) in params.tensors_mut().into_iter().zip(tensor_shapes(cfg)) {
        put_u32(w, rows)?;
        put_u32(w, cols)?;
        // stored column-major in memory
        let m = DMatrix::from_column_slice(rows, cols, t);
        for r in 0..rows {
            for c in 0..cols {
                w.write_all(&(m[(r, c)] as f32).to_le_bytes()).map_err(err)?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<GcnModel, GcnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(err)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(GcnError::Checkpoint("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION as usize {
        return Err(GcnError::Checkpoint(format!("unsupported version {version}")));
    }
    let layers = get_u32(r)?;
    let hidden = get_u32(r)?;
    let input_dim = get_u32(r)?;
    let n_vocab = get_u32(r)?;
    let n_rel = get_u32(r)?;
    let vocab = (0..n_vocab).map(|_| get_str(r)).collect::<Result<Vec<_>, _>>()?;
    let relations = (0..n_rel).map(|_| get_str(r)).collect::<Result<Vec<_>, _>>()?;
    let cfg = GcnConfig { layers, hidden, input_dim, vocab, relations };
    cfg.validate()?;
    let shapes = tensor_shapes(&cfg);
    let mut params = Params::zeros(&cfg);
    for ((_, t), (rows, cols)) in params.tensors_mut().into_iter().zip(shapes) {
        let (fr, fc) = (get_u32(r)?, get_u32(r)?);
        if (fr, fc) != (rows, cols) {
            return Err(GcnError::ShapeMismatch(format!("tensor {fr}×{fc}, expected {rows}×{cols}")));
        }
        let mut buf = vec![0u8; rows * cols * 4];
        r.read_exact(&mut buf).map_err(err)?;
        let vals: Vec<f64> = buf.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64).collect();
        let m = DMatrix::from_row_slice(rows, cols, &vals);
        t.copy_from_slice(m.as_slice());
    }
    GcnModel::new(cfg, params)
}

pub fn save_checkpoint(model: &GcnModel, path: &Path) -> Result<(), GcnError> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    std::fs::write(path, buf).map_err(err)
}

pub fn load_checkpoint(path: &Path) -> Result<GcnModel, GcnError> {
    let bytes = std::fs::read(path).map_err(err)?;
    read_checkpoint(&mut bytes.as_slice())
}
