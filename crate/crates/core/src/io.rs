//! Binary grid files and CSV export.
//!
//! Binary layout (all little-endian): the magic `HGL1`, `nx` and `ny` as
//! `u64`, `h`, `origin.x`, `origin.y` as `f64`, the component count as `u64`,
//! then `nx·ny·components` `f64` values, row-major with components interleaved
//! per node. Periodicity is not stored; readers supply it.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::Grid2D;

pub const MAGIC: &[u8; 4] = b"HGL1";
const HEADER_LEN: usize = 4 + 8 + 8 + 8 + 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    pub components: usize,
    pub data: Vec<f64>,
}

impl FieldFile {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let expected = self.nx * self.ny * self.components;
        if self.data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: self.data.len() });
        }
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * expected);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.nx as u64).to_le_bytes());
        out.extend_from_slice(&(self.ny as u64).to_le_bytes());
        out.extend_from_slice(&self.h.to_le_bytes());
        out.extend_from_slice(&self.origin[0].to_le_bytes());
        out.extend_from_slice(&self.origin[1].to_le_bytes());
        out.extend_from_slice(&(self.components as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Malformed(format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Malformed("bad magic".into()));
        }
        let word = |at: usize| -> [u8; 8] { bytes[at..at + 8].try_into().expect("8-byte slice") };
        let nx = u64::from_le_bytes(word(4)) as usize;
        let ny = u64::from_le_bytes(word(12)) as usize;
        let h = f64::from_le_bytes(word(20));
        let origin = [f64::from_le_bytes(word(28)), f64::from_le_bytes(word(36))];
        let components = u64::from_le_bytes(word(44)) as usize;
        if components == 0 || nx == 0 || ny == 0 {
            return Err(Error::Malformed(format!("degenerate header {nx}x{ny}x{components}")));
        }
        let expected = nx.checked_mul(ny).and_then(|n| n.checked_mul(components))
            .ok_or_else(|| Error::Malformed("header sizes overflow".into()))?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != 8 * expected {
            return Err(Error::DimensionMismatch { expected, found: payload.len() / 8 });
        }
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Ok(FieldFile { nx, ny, h, origin, components, data })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.encode()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        FieldFile::decode(&bytes)
    }

    /// Grid with the stored metadata and the given periodicity.
    pub fn grid(&self, periodic: [bool; 2]) -> Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.origin, self.h, periodic)
    }

    pub fn into_scalar(self, periodic: [bool; 2]) -> Result<ScalarField> {
        if self.components != 1 {
            return Err(Error::Malformed(format!("expected 1 component, found {}", self.components)));
        }
        let grid = self.grid(periodic)?;
        ScalarField::new(grid, self.data)
    }

    /// Complex field on a (non-periodic) domain grid; the boundary mask is the grid boundary.
    pub fn into_complex(self) -> Result<ComplexField> {
        if self.components != 2 {
            return Err(Error::Malformed(format!("expected 2 components, found {}", self.components)));
        }
        let grid = self.grid([false, false])?;
        let values = self.data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        ComplexField::new(grid, values, grid.boundary_mask())
    }
}

impl From<&ScalarField> for FieldFile {
    fn from(f: &ScalarField) -> Self {
        FieldFile { nx: f.grid.nx, ny: f.grid.ny, h: f.grid.h, origin: f.grid.origin, components: 1, data: f.values.clone() }
    }
}

impl From<&ComplexField> for FieldFile {
    fn from(f: &ComplexField) -> Self {
        let data = f.values.iter().flat_map(|z| [z.re, z.im]).collect();
        FieldFile { nx: f.grid.nx, ny: f.grid.ny, h: f.grid.h, origin: f.grid.origin, components: 2, data }
    }
}

pub fn write_field(field: impl Into<FieldFile>, path: impl AsRef<Path>) -> Result<()> {
    field.into().write(path)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<FieldFile> {
    FieldFile::read(path)
}

/// `x,y,re,im`, one node per row, row-major.
pub fn complex_csv(f: &ComplexField) -> String {
    let mut s = String::from("x,y,re,im\n");
    for (k, z) in f.values.iter().enumerate() {
        let p = f.grid.point_of(k);
        s.push_str(&format!("{},{},{},{}\n", p[0], p[1], z.re, z.im));
    }
    s
}

/// `x,y,v`, one node per row, row-major.
pub fn scalar_csv(f: &ScalarField) -> String {
    let mut s = String::from("x,y,v\n");
    for (k, v) in f.values.iter().enumerate() {
        let p = f.grid.point_of(k);
        s.push_str(&format!("{},{},{}\n", p[0], p[1], v));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field(n: usize, seed: f64) -> ComplexField {
        let g = Grid2D::square_domain(n).unwrap();
        ComplexField::from_fn(g, |x| Complex64::new((seed * x[0]).sin() * 1e-7, x[1].exp() + seed))
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_exact(n in 3usize..20, seed in -1e3f64..1e3) {
            let f = field(n, seed);
            let back = FieldFile::decode(&FieldFile::from(&f).encode().unwrap()).unwrap().into_complex().unwrap();
            prop_assert_eq!(back.grid, f.grid);
            for (a, b) in back.values.iter().zip(&f.values) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn file_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.hgl");
        let f = field(9, 0.3);
        write_field(&f, &path).unwrap();
        let back = read_field(&path).unwrap().into_complex().unwrap();
        assert_eq!(back, f);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_field(&path), Err(Error::DimensionMismatch { .. })));
        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(read_field(&path), Err(Error::Malformed(_))));
    }

    #[test]
    fn header_layout() {
        let f = field(3, 0.0);
        let bytes = FieldFile::from(&f).encode().unwrap();
        assert_eq!(&bytes[..4], b"HGL1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1.0);
        assert_eq!(u64::from_le_bytes(bytes[44..52].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 52 + 9 * 2 * 8);
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let f = field(5, 1.0);
        let csv = complex_csv(&f);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,y,re,im"));
        assert_eq!(lines.count(), 25);
        let s = ScalarField::from_fn(f.grid, |x| x[0]);
        assert_eq!(scalar_csv(&s).lines().count(), 26);
    }
}
