//! Versioned binary checkpoint: run configuration text, step count, master
//! seed, all named parameters, learned inner rates, and optimizer
//! accumulators. Little-endian throughout; byte-stable across runs on the
//! same platform.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"MSYM";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file: bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, Default)]
pub struct AdamSnapshot {
    pub lr: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone)]
pub struct Checkpoint {
    /// The run configuration document, verbatim.
    pub config_text: String,
    pub step: u64,
    pub master_seed: u64,
    /// Named tensors: `layer{i}.{param}` entries plus learned rates.
    pub params: Vec<(String, Tensor)>,
    pub inner_lrs: Vec<f64>,
    pub adam: Option<AdamSnapshot>,
}

fn w_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn w_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn w_f64_slice(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    w_u64(w, v.len() as u64)?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn w_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn w_tensor(w: &mut impl Write, t: &Tensor) -> std::io::Result<()> {
    w_u64(w, t.shape().len() as u64)?;
    for &d in t.shape() {
        w_u64(w, d as u64)?;
    }
    w_f64_slice(w, t.data())
}

fn r_u32(r: &mut impl Read) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64(r: &mut impl Read) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn r_f64(r: &mut impl Read) -> Result<f64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn r_f64_vec(r: &mut impl Read) -> Result<Vec<f64>, CheckpointError> {
    let n = r_u64(r)? as usize;
    if n > (1 << 32) {
        return Err(CheckpointError::Corrupt(format!("implausible vector length {n}")));
    }
    (0..n).map(|_| r_f64(r)).collect()
}

fn r_str(r: &mut impl Read) -> Result<String, CheckpointError> {
    let n = r_u64(r)? as usize;
    if n > (1 << 32) {
        return Err(CheckpointError::Corrupt(format!("implausible string length {n}")));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CheckpointError::Corrupt(e.to_string()))
}

fn r_tensor(r: &mut impl Read) -> Result<Tensor, CheckpointError> {
    let rank = r_u64(r)? as usize;
    if rank > 8 {
        return Err(CheckpointError::Corrupt(format!("implausible tensor rank {rank}")));
    }
    let shape: Vec<usize> = (0..rank).map(|_| r_u64(r).map(|v| v as usize)).collect::<Result<_, _>>()?;
    let data = r_f64_vec(r)?;
    if data.len() != shape.iter().product::<usize>() {
        return Err(CheckpointError::Corrupt("tensor data does not match shape".into()));
    }
    Ok(Tensor::from_vec(&shape, data))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w_u32(&mut w, VERSION)?;
    w_str(&mut w, &ckpt.config_text)?;
    w_u64(&mut w, ckpt.step)?;
    w_u64(&mut w, ckpt.master_seed)?;
    w_u64(&mut w, ckpt.params.len() as u64)?;
    for (name, tensor) in &ckpt.params {
        w_str(&mut w, name)?;
        w_tensor(&mut w, tensor)?;
    }
    w_f64_slice(&mut w, &ckpt.inner_lrs)?;
    match &ckpt.adam {
        None => w_u32(&mut w, 0)?,
        Some(a) => {
            w_u32(&mut w, 1)?;
            w.write_all(&a.lr.to_le_bytes())?;
            w_u64(&mut w, a.step)?;
            w_u64(&mut w, a.m.len() as u64)?;
            for (m, v) in a.m.iter().zip(&a.v) {
                w_f64_slice(&mut w, m)?;
                w_f64_slice(&mut w, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let config_text = r_str(&mut r)?;
    let step = r_u64(&mut r)?;
    let master_seed = r_u64(&mut r)?;
    let count = r_u64(&mut r)? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r_str(&mut r)?;
        let tensor = r_tensor(&mut r)?;
        params.push((name, tensor));
    }
    let inner_lrs = r_f64_vec(&mut r)?;
    let adam = match r_u32(&mut r)? {
        0 => None,
        1 => {
            let lr = r_f64(&mut r)?;
            let astep = r_u64(&mut r)?;
            let n = r_u64(&mut r)? as usize;
            let mut m = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                m.push(r_f64_vec(&mut r)?);
                v.push(r_f64_vec(&mut r)?);
            }
            Some(AdamSnapshot { lr, step: astep, m, v })
        }
        other => return Err(CheckpointError::Corrupt(format!("bad adam tag {other}"))),
    };
    Ok(Checkpoint { config_text, step, master_seed, params, inner_lrs, adam })
}
