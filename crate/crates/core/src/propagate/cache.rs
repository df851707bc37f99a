//! Binary current cache.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes   b"QHHGCUR\0"
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON (CurrentCacheHeader)
//! times        n_samples x f64
//! values       n_samples x (M*M | M) x (re f64, im f64), row-major per sample
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CurrentRecord, PropagationConfig, RecordMode};
use crate::error::{Error, Result};
use crate::lattice::{ModelParams, SymmetrySector};
use crate::pulse::PulseParams;

const MAGIC: &[u8; 8] = b"QHHGCUR\0";
pub const CURRENT_CACHE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentCacheHeader {
    pub format_version: u32,
    pub model: ModelParams,
    pub sector: Option<SymmetrySector>,
    pub pulse: PulseParams,
    pub propagation: PropagationConfig,
    pub mode: RecordMode,
    pub n_states: usize,
    pub n_samples: usize,
    /// Hash of the producing configuration.
    pub config_hash: String,
}

impl CurrentCacheHeader {
    /// Names of the fields in which `self` and `other` differ.
    pub fn differences(&self, other: &Self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.format_version != other.format_version {
            out.push("format_version");
        }
        if self.model != other.model {
            out.push("model");
        }
        if self.sector != other.sector {
            out.push("sector");
        }
        if self.pulse != other.pulse {
            out.push("pulse");
        }
        if self.propagation != other.propagation {
            out.push("propagation");
        }
        if self.mode != other.mode {
            out.push("mode");
        }
        if self.n_states != other.n_states {
            out.push("n_states");
        }
        if self.n_samples != other.n_samples {
            out.push("n_samples");
        }
        if self.config_hash != other.config_hash {
            out.push("config_hash");
        }
        out
    }
}

pub fn write_current_cache(path: &Path, header: &CurrentCacheHeader, record: &CurrentRecord) -> Result<()> {
    if header.n_states != record.n_states() || header.n_samples != record.n_samples() || header.mode != record.mode() {
        return Err(Error::Cache("header does not describe the record".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let json = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for t in record.times() {
        w.write_all(&t.to_le_bytes())?;
    }
    for v in record.values() {
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

/// Reads a cache file. With `expected` set, any header difference is refused.
pub fn read_current_cache(
    path: &Path,
    expected: Option<&CurrentCacheHeader>,
) -> Result<(CurrentCacheHeader, CurrentRecord)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Cache(format!("{} is not a current cache", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: CurrentCacheHeader = serde_json::from_slice(&json)?;
    if header.format_version != CURRENT_CACHE_VERSION {
        return Err(Error::Cache(format!(
            "cache format version {} (expected {CURRENT_CACHE_VERSION})",
            header.format_version
        )));
    }
    if let Some(exp) = expected {
        let diff = header.differences(exp);
        if !diff.is_empty() {
            return Err(Error::Cache(format!(
                "{} was produced by a different configuration (mismatch in {}); rerun with --force",
                path.display(),
                diff.join(", ")
            )));
        }
    }
    let per = match header.mode {
        RecordMode::Full => header.n_states * header.n_states,
        RecordMode::GroundRow => header.n_states,
    };
    let times = (0..header.n_samples).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let values = (0..per * header.n_samples)
        .map(|_| Ok(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Cache(format!("{} has {} trailing bytes", path.display(), rest.len())));
    }
    let record = CurrentRecord::from_parts(header.mode, header.n_states, times, values)?;
    Ok((header, record))
}
