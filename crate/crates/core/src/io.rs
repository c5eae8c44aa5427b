//! Field files.
//!
//! Binary layout, little endian: a 32-byte header
//!
//! | bytes  | content                         |
//! |--------|---------------------------------|
//! | 0..8   | magic `GLPFIELD`                |
//! | 8..16  | `n` as u64                      |
//! | 16..24 | half width `L` as f64           |
//! | 24..28 | dtype: 1 = real, 2 = complex    |
//! | 28..32 | reserved, zero                  |
//!
//! followed by `n * n` f64 values (real) or `(re, im)` pairs (complex),
//! row-major with `x` fastest. The CSV fallback has columns `x,y,value` or
//! `x,y,re,im`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{GlError, Result};
use crate::grid::{ComplexField, Grid2D, RealField};

pub const MAGIC: &[u8; 8] = b"GLPFIELD";
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Real(RealField),
    Complex(ComplexField),
}

impl Field {
    pub fn grid(&self) -> Grid2D {
        match self {
            Field::Real(f) => f.grid,
            Field::Complex(f) => f.grid,
        }
    }

    fn dtype(&self) -> u32 {
        match self {
            Field::Real(_) => 1,
            Field::Complex(_) => 2,
        }
    }

    pub fn into_complex(self) -> ComplexField {
        match self {
            Field::Real(f) => ComplexField {
                grid: f.grid,
                values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            },
            Field::Complex(f) => f,
        }
    }
}

pub fn encode_binary(field: &Field) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.n() as u64).to_le_bytes());
    out.extend_from_slice(&grid.half_width().to_le_bytes());
    out.extend_from_slice(&field.dtype().to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    match field {
        Field::Real(f) => {
            for v in &f.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Field::Complex(f) => {
            for v in &f.values {
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<Field> {
    let bad = |msg: &str| GlError::Format(msg.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(bad("not a field file (bad magic)"));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let n = usize::try_from(u64_at(8)).map_err(|_| bad("node count overflows"))?;
    let grid = Grid2D::new(f64_at(16), n)?;
    let dtype = u32::from_le_bytes(bytes[24..28].try_into().unwrap());
    let width = match dtype {
        1 => 1,
        2 => 2,
        d => return Err(GlError::Format(format!("unknown dtype {d}"))),
    };
    let expected = HEADER_LEN + 8 * width * grid.len();
    if bytes.len() != expected {
        return Err(GlError::Format(format!(
            "payload length {} does not match header (expected {expected})",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = (0..width * grid.len()).map(|i| f64_at(HEADER_LEN + 8 * i)).collect();
    Ok(if width == 1 {
        Field::Real(RealField::from_values(grid, vals)?)
    } else {
        let values = vals.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Field::Complex(ComplexField::from_values(grid, values)?)
    })
}

pub fn write_binary(path: &Path, field: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_binary(field))?;
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<Field> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_binary(&bytes)
}

pub fn write_csv(path: &Path, field: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let grid = field.grid();
    match field {
        Field::Real(f) => {
            writeln!(w, "x,y,value")?;
            for (m, v) in f.values.iter().enumerate() {
                let (x, y) = grid.xy(m);
                writeln!(w, "{x:e},{y:e},{v:e}")?;
            }
        }
        Field::Complex(f) => {
            writeln!(w, "x,y,re,im")?;
            for (m, v) in f.values.iter().enumerate() {
                let (x, y) = grid.xy(m);
                writeln!(w, "{x:e},{y:e},{:e},{:e}", v.re, v.im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows must be in the node order written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Field> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| GlError::Format("empty csv".into()))??;
    let cols = header.split(',').count();
    if !(cols == 3 || cols == 4) {
        return Err(GlError::Format(format!("unexpected csv header `{header}`")));
    }
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| GlError::Format(format!("csv line {}: {e}", ln + 2)))?;
        if parts.len() != cols {
            return Err(GlError::Format(format!("csv line {}: expected {cols} columns", ln + 2)));
        }
        xs.push(parts[0]);
        vals.push(Complex64::new(parts[2], if cols == 4 { parts[3] } else { 0.0 }));
    }
    let n = (vals.len() as f64).sqrt().round() as usize;
    if n * n != vals.len() {
        return Err(GlError::Format(format!("{} rows is not a square grid", vals.len())));
    }
    let grid = Grid2D::new(xs[n - 1], n)?;
    for (m, x) in xs.iter().enumerate() {
        if (x - grid.xy(m).0).abs() > 1e-9 * grid.half_width() {
            return Err(GlError::Format(format!("csv row {m} is out of node order")));
        }
    }
    Ok(if cols == 3 {
        Field::Real(RealField::from_values(grid, vals.iter().map(|v| v.re).collect())?)
    } else {
        Field::Complex(ComplexField::from_values(grid, vals)?)
    })
}

/// Dispatch on the extension: `.csv` or binary otherwise.
pub fn read_field(path: &Path) -> Result<Field> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(path),
        _ => read_binary(path),
    }
}
