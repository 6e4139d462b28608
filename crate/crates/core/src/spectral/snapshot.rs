//! Binary field snapshots.
//!
//! Layout (little-endian): magic `SSL1`, `dim: u32`, `N: u32`, `L: f64`,
//! then `N^dim` `f64` values in row-major order (axis 0 slowest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::field::ScalarField;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 4] = b"SSL1";

pub fn write_field_to(w: &mut impl Write, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.side().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_from(r: &mut impl Read) -> Result<ScalarField> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected SSL1")));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let side = f64::from_le_bytes(b8);
    let grid = TorusGrid::new(dim, n, side)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    ScalarField::new(grid, values)
}

pub fn write_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    read_field_from(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_and_header() {
        let g = TorusGrid::new(2, 8, 2.5).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] - 2.0 * x[1]).unwrap();
        let mut buf = Vec::new();
        write_field_to(&mut buf, &f).unwrap();
        assert_eq!(&buf[..4], b"SSL1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 2.5);
        assert_eq!(buf.len(), 20 + 64 * 8);
        let back = read_field_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"XXXX\0\0\0\0".to_vec();
        assert!(read_field_from(&mut buf.as_slice()).is_err());
    }
}
