//! Gram matrix files.
//!
//! Binary layout, all integers little-endian:
//!
//! | bytes | field                         |
//! |-------|-------------------------------|
//! | 8     | magic `RNTKGRAM`              |
//! | 4     | `u32` version (1)             |
//! | 4     | `u32` rows                    |
//! | 4     | `u32` columns                 |
//! | 1     | `u8` kind (0 = CK, 1 = NTK)   |
//! | 1     | `u8` variant code             |
//! | 2     | `u16` reserved (0)            |
//!
//! followed by `rows * columns` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::gram::KernelKind;
use super::params::Variant;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 8] = b"RNTKGRAM";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GramHeader {
    pub rows: u32,
    pub cols: u32,
    pub kind: KernelKind,
    pub variant: Variant,
}

pub fn write_gram<W: Write>(mut w: W, matrix: &Matrix, kind: KernelKind, variant: Variant) -> Result<()> {
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds u32")))
    };
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&dim(matrix.rows())?.to_le_bytes());
    header.extend_from_slice(&dim(matrix.cols())?.to_le_bytes());
    header.push(kind.code());
    header.push(variant.code());
    header.extend_from_slice(&0u16.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(matrix.as_slice().len() * 8);
    for v in matrix.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_gram<R: Read>(mut r: R) -> Result<(GramHeader, Matrix)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if &header[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap());
    let version = word(8);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = word(12);
    let cols = word(16);
    let kind = KernelKind::from_code(header[20])?;
    let variant = Variant::from_code(header[21])?;

    let count = rows as usize * cols as usize;
    let mut body = vec![0u8; count * 8];
    r.read_exact(&mut body)
        .map_err(|e| Error::Format(format!("truncated body: {e}")))?;
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let matrix = Matrix::from_vec(rows as usize, cols as usize, data)?;
    Ok((GramHeader { rows, cols, kind, variant }, matrix))
}

pub fn save_gram(path: &Path, matrix: &Matrix, kind: KernelKind, variant: Variant) -> Result<()> {
    write_gram(BufWriter::new(File::create(path)?), matrix, kind, variant)
}

pub fn load_gram(path: &Path) -> Result<(GramHeader, Matrix)> {
    read_gram(BufReader::new(File::open(path)?))
}

/// Plain comma-separated rows, full round-trip precision.
pub fn write_csv<W: Write>(mut w: W, matrix: &Matrix) -> Result<()> {
    for row in matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
