//! Binary field snapshots: "VTRS" magic, version, dims, rank, time, then
//! little-endian f64 physical values in y₁-fastest order, components
//! consecutive.

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::grid::Grid;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"VTRS";
const VERSION: u32 = 1;

fn rank_code(rank: Rank) -> u32 {
    match rank {
        Rank::Scalar => 0,
        Rank::Vector => 1,
        Rank::Tensor => 2,
    }
}

fn rank_from_code(code: u32) -> Result<Rank> {
    match code {
        0 => Ok(Rank::Scalar),
        1 => Ok(Rank::Vector),
        2 => Ok(Rank::Tensor),
        c => Err(Error::Format(format!("unknown rank code {c}"))),
    }
}

pub fn write_field(path: &Path, field: &Field, time: f64) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let g = field.grid;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for n in [g.n1, g.n2, g.n3] {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    w.write_all(&rank_code(field.rank).to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    let p = field.to_physical();
    for c in 0..p.ncomp() {
        for &v in p.phys(c) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n1 = read_u32(&mut r)? as usize;
    let n2 = read_u32(&mut r)? as usize;
    let n3 = read_u32(&mut r)? as usize;
    let rank = rank_from_code(read_u32(&mut r)?)?;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let time = f64::from_le_bytes(f64buf);
    let grid = Grid::new(n1, n2, n3, Default::default())?;
    let mut comps = Vec::with_capacity(rank.ncomp());
    for _ in 0..rank.ncomp() {
        let mut v = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut f64buf)?;
            v.push(f64::from_le_bytes(f64buf));
        }
        comps.push(v);
    }
    Ok((Field::from_physical(grid, rank, comps), time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::l2_norm;

    #[test]
    fn round_trip_preserves_field_and_time() {
        let grid = Grid::cubic(8).unwrap();
        let f = Field::from_fn(grid, Rank::Vector, |y1, y2, y3, c| {
            (y1 + 2.0 * y2).sin() * (y3.cos() + c as f64)
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtrs");
        write_field(&path, &f, 1.25).unwrap();
        let (g, t) = read_field(&path).unwrap();
        assert_eq!(t, 1.25);
        assert_eq!(g.rank, Rank::Vector);
        assert!(l2_norm(&g.sub(&f)) < 1e-13);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vtrs");
        std::fs::write(&path, b"NOTAVALIDFILE").unwrap();
        assert!(read_field(&path).is_err());
    }
}
