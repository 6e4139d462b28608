//! `SSP1` path binary: magic, `dim: u32`, `paths: u64`, `times: u64`,
//! `stride: u64`, `dt: f64`, `side: f64`, `seed: u64`, then the unwrapped
//! positions as little-endian `f64` in `[path][time][coord]` order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::PathEnsemble;
use crate::{Error, Result};

pub const PATH_MAGIC: &[u8; 4] = b"SSP1";

pub fn write_paths_to(ens: &PathEnsemble, w: &mut impl Write) -> Result<()> {
    w.write_all(PATH_MAGIC)?;
    w.write_all(&(ens.dim as u32).to_le_bytes())?;
    w.write_all(&(ens.paths() as u64).to_le_bytes())?;
    w.write_all(&(ens.times.len() as u64).to_le_bytes())?;
    w.write_all(&(ens.stride as u64).to_le_bytes())?;
    w.write_all(&ens.dt.to_le_bytes())?;
    w.write_all(&ens.side.to_le_bytes())?;
    w.write_all(&ens.seed.to_le_bytes())?;
    for v in ens.raw() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_paths_from(r: &mut impl Read) -> Result<PathEnsemble> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PATH_MAGIC {
        return Err(Error::Format(format!("bad path magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let paths = read_u64(r)? as usize;
    let times = read_u64(r)? as usize;
    let stride = read_u64(r)? as usize;
    let dt = read_f64(r)?;
    let side = read_f64(r)?;
    let seed = read_u64(r)?;
    if !(dim == 2 || dim == 3) || stride == 0 {
        return Err(Error::Format(format!("bad path header: dim {dim}, stride {stride}")));
    }
    let count = paths
        .checked_mul(times)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| Error::Format("path header overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} bytes of positions, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let positions = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    PathEnsemble::from_parts(dim, side, dt, stride, seed, times, positions)
}

pub fn write_paths(ens: &PathEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_paths_to(ens, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_paths(path: impl AsRef<Path>) -> Result<PathEnsemble> {
    read_paths_from(&mut BufReader::new(File::open(path)?))
}
