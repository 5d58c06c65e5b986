//! VXF1 binary field snapshots.
//!
//! Layout (all little-endian): magic `VXF1`, `u32` kind (0 scalar, 1 vector,
//! 2 complex), `u32` nx, `u32` ny, `f64` lx, `f64` ly, then the samples in
//! row-major order. Vector fields are component-major (all `x` components,
//! then all `y`); complex fields interleave `re, im` per node.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField, VectorField};

pub const MAGIC: &[u8; 4] = b"VXF1";

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Scalar(ScalarField),
    Vector(VectorField),
    Complex(ComplexField),
}

impl Snapshot {
    pub fn kind(&self) -> u32 {
        match self {
            Snapshot::Scalar(_) => 0,
            Snapshot::Vector(_) => 1,
            Snapshot::Complex(_) => 2,
        }
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Snapshot::Scalar(f) => f.grid(),
            Snapshot::Vector(f) => f.grid(),
            Snapshot::Complex(f) => f.grid(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        w.write_all(MAGIC)?;
        w.write_all(&self.kind().to_le_bytes())?;
        w.write_all(&(g.nx() as u32).to_le_bytes())?;
        w.write_all(&(g.ny() as u32).to_le_bytes())?;
        w.write_all(&g.lx().to_le_bytes())?;
        w.write_all(&g.ly().to_le_bytes())?;
        let mut put = |v: f64| w.write_all(&v.to_le_bytes());
        match self {
            Snapshot::Scalar(f) => f.data().iter().try_for_each(|&v| put(v))?,
            Snapshot::Vector(f) => f.xs().iter().chain(f.ys()).try_for_each(|&v| put(v))?,
            Snapshot::Complex(f) => f.data().iter().try_for_each(|z| {
                put(z.re)?;
                put(z.im)
            })?,
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let kind = read_u32(&mut r)?;
        let nx = read_u32(&mut r)? as usize;
        let ny = read_u32(&mut r)? as usize;
        let lx = read_f64(&mut r)?;
        let ly = read_f64(&mut r)?;
        let grid = Grid::new(nx, ny, lx, ly)?;
        let n = grid.len();
        let mut values = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        match kind {
            0 => Ok(Snapshot::Scalar(ScalarField::from_vec(grid, values(n)?)?)),
            1 => {
                let mut all = values(2 * n)?;
                let ys = all.split_off(n);
                Ok(Snapshot::Vector(VectorField::from_vecs(grid, all, ys)?))
            }
            2 => {
                let all = values(2 * n)?;
                let data = all
                    .chunks_exact(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect();
                Ok(Snapshot::Complex(ComplexField::from_vec(grid, data)?))
            }
            k => Err(Error::Format(format!("unknown field kind {k}"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

impl From<ScalarField> for Snapshot {
    fn from(f: ScalarField) -> Self {
        Snapshot::Scalar(f)
    }
}

impl From<VectorField> for Snapshot {
    fn from(f: VectorField) -> Self {
        Snapshot::Vector(f)
    }
}

impl From<ComplexField> for Snapshot {
    fn from(f: ComplexField) -> Self {
        Snapshot::Complex(f)
    }
}
