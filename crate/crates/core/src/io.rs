//! Field serialization: a flat little-endian binary format and CSV for small grids.
//!
//! Binary layout:
//!
//! ```text
//! b"PAMF"  u32 version  u32 d  u64 n  f64 r  f64 epsilon (NaN if absent)
//! u32 kernel_len  kernel block (UTF-8, `key = value` lines)
//! n^d × f64 values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::{KernelSpec, MollifiedKernelSpec};

const MAGIC: &[u8; 4] = b"PAMF";
const VERSION: u32 = 1;

/// Metadata stored alongside a field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldHeader {
    pub kernel: Option<KernelSpec>,
    pub epsilon: Option<f64>,
}

impl FieldHeader {
    pub fn from_kernel(k: &MollifiedKernelSpec) -> Self {
        Self { kernel: Some(k.base.clone()), epsilon: Some(k.epsilon) }
    }
}

pub fn write_field_to(mut w: impl Write, field: &Field, header: &FieldHeader) -> Result<()> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_dim() as u64).to_le_bytes())?;
    w.write_all(&g.radius().to_le_bytes())?;
    w.write_all(&header.epsilon.unwrap_or(f64::NAN).to_le_bytes())?;
    let block = header.kernel.as_ref().map(crate::config::kernel_block).unwrap_or_default();
    w.write_all(&(block.len() as u32).to_le_bytes())?;
    w.write_all(block.as_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_from(mut r: impl Read) -> Result<(Field, FieldHeader)> {
    let bad = |m: &str| Error::InvalidParameter(format!("malformed field file: {m}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("wrong magic"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let radius = read_f64(&mut r)?;
    let eps = read_f64(&mut r)?;
    let len = read_u32(&mut r)? as usize;
    let mut block = vec![0u8; len];
    r.read_exact(&mut block)?;
    let block = String::from_utf8(block).map_err(|_| bad("kernel block is not UTF-8"))?;
    let kernel = if block.is_empty() { None } else { Some(crate::config::parse_kernel_block(&block)?) };
    let grid = Grid::new(d, n, radius)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(read_f64(&mut r)?);
    }
    let field = Field::new(grid, values)?;
    Ok((field, FieldHeader { kernel, epsilon: if eps.is_nan() { None } else { Some(eps) } }))
}

pub fn write_field(path: impl AsRef<Path>, field: &Field, header: &FieldHeader) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field_to(&mut w, field, header)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<(Field, FieldHeader)> {
    read_field_from(BufReader::new(File::open(path)?))
}

/// CSV with columns `x0[,x1[,x2]],value`.
pub fn field_to_csv(field: &Field) -> String {
    let g = field.grid();
    let d = g.dim();
    let mut out = String::new();
    for a in 0..d {
        out.push_str(&format!("x{a},"));
    }
    out.push_str("value\n");
    for (k, v) in field.values().iter().enumerate() {
        let x = g.point(k);
        for c in &x[..d] {
            out.push_str(&format!("{c:e},"));
        }
        out.push_str(&format!("{v:e}\n"));
    }
    out
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = Grid::new(2, 4, 1.5).unwrap();
        let f = Field::from_fn(g, |x| x[0] - 2.0 * x[1]);
        let k = MollifiedKernelSpec::new(KernelSpec::fractional(1.2, vec![0.3, 0.4]).unwrap(), 0.5).unwrap();
        let header = FieldHeader::from_kernel(&k);
        let mut buf = Vec::new();
        write_field_to(&mut buf, &f, &header).unwrap();
        let (back, h) = read_field_from(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert_eq!(h, header);

        let mut buf = Vec::new();
        write_field_to(&mut buf, &f, &FieldHeader::default()).unwrap();
        let (_, h) = read_field_from(buf.as_slice()).unwrap();
        assert_eq!(h, FieldHeader::default());
        buf[0] = b'X';
        assert!(read_field_from(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::new(1, 3, 1.0).unwrap();
        let csv = field_to_csv(&Field::constant(g, 2.0));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x0,value");
        assert_eq!(lines.len(), 4);
    }
}
