//! Binary field snapshots and trajectory persistence.
//!
//! Snapshot layout: 24-byte header (8-byte magic `MIXFLD01`, 4-byte LE nx,
//! 4-byte LE ny, 8 reserved bytes) followed by `nx * ny` little-endian f64
//! values, row-major with x fastest.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"MIXFLD01";

/// Write a raw nx × ny array in the snapshot format.
pub fn write_array(path: &Path, nx: usize, ny: usize, values: &[f64]) -> Result<()> {
    assert_eq!(values.len(), nx * ny);
    let mut f = File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&(nx as u32).to_le_bytes())?;
    f.write_all(&(ny as u32).to_le_bytes())?;
    f.write_all(&[0u8; 8])?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf)?;
    Ok(())
}

/// Read a raw array in the snapshot format, returning (nx, ny, values).
pub fn read_array(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut f = File::open(path)?;
    let mut header = [0u8; 24];
    f.read_exact(&mut header)?;
    if &header[0..8] != MAGIC {
        return Err(Error::SnapshotFormat(format!(
            "bad magic in {}",
            path.display()
        )));
    }
    let nx = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.len() != nx * ny * 8 {
        return Err(Error::SnapshotFormat(format!(
            "payload size {} does not match {}x{} f64",
            buf.len(),
            nx,
            ny
        )));
    }
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((nx, ny, values))
}

pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    write_array(path, f.grid.nx, f.grid.ny, &f.values)
}

pub fn read_scalar(path: &Path, grid: Grid) -> Result<ScalarField> {
    let (nx, ny, values) = read_array(path)?;
    if nx != grid.nx || ny != grid.ny {
        return Err(Error::SnapshotFormat(format!(
            "snapshot is {nx}x{ny}, expected {}x{}",
            grid.nx, grid.ny
        )));
    }
    Ok(ScalarField { grid, values })
}

pub fn write_velocity(dir: &Path, stem: &str, v: &VectorField) -> Result<()> {
    write_array(
        &dir.join(format!("{stem}_u.fld")),
        v.grid.nx,
        v.grid.ny,
        &v.u,
    )?;
    write_array(
        &dir.join(format!("{stem}_vy.fld")),
        v.grid.nx,
        v.grid.ny + 1,
        &v.vy,
    )
}

pub fn read_velocity(dir: &Path, stem: &str, grid: Grid) -> Result<VectorField> {
    let (nx, ny, u) = read_array(&dir.join(format!("{stem}_u.fld")))?;
    if nx != grid.nx || ny != grid.ny {
        return Err(Error::SnapshotFormat("velocity u shape mismatch".into()));
    }
    let (nx2, ny2, vy) = read_array(&dir.join(format!("{stem}_vy.fld")))?;
    if nx2 != grid.nx || ny2 != grid.ny + 1 {
        return Err(Error::SnapshotFormat("velocity vy shape mismatch".into()));
    }
    Ok(VectorField { grid, u, vy })
}

/// JSON manifest written next to trajectory snapshot directories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub nt: usize,
    pub dt: f64,
    pub k: f64,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

pub fn write_manifest(path: &Path, m: &TrajectoryManifest) -> Result<()> {
    let f = File::create(path)?;
    serde_json::to_writer_pretty(f, m)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_exactly_24_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fld");
        write_array(&p, 4, 5, &vec![1.5; 20]).unwrap();
        let len = std::fs::metadata(&p).unwrap().len();
        assert_eq!(len, 24 + 20 * 8);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..8], b"MIXFLD01");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.fld");
        std::fs::write(&p, b"NOTMAGIC________________________").unwrap();
        assert!(read_array(&p).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_bits(values in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("rt.fld");
            write_array(&p, 4, 3, &values).unwrap();
            let (nx, ny, back) = read_array(&p).unwrap();
            prop_assert_eq!((nx, ny), (4, 3));
            prop_assert_eq!(back, values);
        }
    }
}
