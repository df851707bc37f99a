//! Hash-keyed caches for eigensystems and current records.
//!
//! Eigen cache layout (little-endian, same framing as the current cache):
//!
//! ```text
//! magic        8 bytes   b"QHHGEIG\0"
//! header_len   u64
//! header       JSON (EigenCacheHeader)
//! energies     M x f64
//! vectors      M columns x dim x (re f64, im f64)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{ModelParams, SymmetrySector};
use crate::propagate::{PropagationConfig, RecordMode};
use crate::pulse::PulseParams;
use crate::spectral::EigenSystem;

const MAGIC: &[u8; 8] = b"QHHGEIG\0";
pub const EIGEN_CACHE_VERSION: u32 = 1;

/// SHA-256 of the JSON serialization, hex encoded.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

#[derive(Serialize)]
struct EigenKey<'a> {
    model: &'a ModelParams,
    sector: Option<SymmetrySector>,
}

#[derive(Serialize)]
struct CurrentKey<'a> {
    model: &'a ModelParams,
    sector: Option<SymmetrySector>,
    pulse: &'a PulseParams,
    propagation: &'a PropagationConfig,
    mode: RecordMode,
}

pub fn eigen_hash(model: &ModelParams, sector: Option<SymmetrySector>) -> Result<String> {
    content_hash(&EigenKey { model, sector })
}

pub fn current_hash(
    model: &ModelParams,
    sector: Option<SymmetrySector>,
    pulse: &PulseParams,
    propagation: &PropagationConfig,
    mode: RecordMode,
) -> Result<String> {
    content_hash(&CurrentKey { model, sector, pulse, propagation, mode })
}

pub fn eigen_cache_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("eigen-{}.bin", &hash[..16]))
}

pub fn current_cache_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("currents-{}.bin", &hash[..16]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenCacheHeader {
    pub format_version: u32,
    pub model: ModelParams,
    pub sector: Option<SymmetrySector>,
    pub dim: usize,
    pub n_states: usize,
    pub config_hash: String,
}

pub fn write_eigen_cache(path: &Path, header: &EigenCacheHeader, eig: &EigenSystem) -> Result<()> {
    if header.dim != eig.dim() || header.n_states != eig.len() {
        return Err(Error::Cache("header does not describe the eigensystem".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let json = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for e in &eig.energies {
        w.write_all(&e.to_le_bytes())?;
    }
    for v in eig.vectors.iter() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Reads an eigen cache and refuses it unless its hash is `expected_hash`.
pub fn read_eigen_cache(path: &Path, expected_hash: &str) -> Result<(EigenCacheHeader, EigenSystem)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Cache(format!("{} is not an eigen cache", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: EigenCacheHeader = serde_json::from_slice(&json)?;
    if header.format_version != EIGEN_CACHE_VERSION || header.config_hash != expected_hash {
        return Err(Error::Cache(format!(
            "{} was produced by a different configuration; rerun with --force",
            path.display()
        )));
    }
    let energies = (0..header.n_states).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let values = (0..header.dim * header.n_states)
        .map(|_| Ok(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?)))
        .collect::<Result<Vec<_>>>()?;
    let vectors = DMatrix::from_vec(header.dim, header.n_states, values);
    Ok((header, EigenSystem { energies, vectors }))
}
