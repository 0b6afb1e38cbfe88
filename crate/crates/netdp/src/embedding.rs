//! Dense per-node embedding tables and their on-disk format: a binary
//! header plus 32-bit float rows, with a text sidecar mapping dense ids
//! back to raw ids.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::binio::*;
use crate::error::{Error, Result};
use crate::graph::NodeId;

const MAGIC: &[u8; 4] = b"NDPE";
const VERSION: u32 = 1;

/// N rows of d-dimensional vectors, indexed by dense node id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(n: usize, dim: usize) -> EmbeddingTable {
        EmbeddingTable {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Result<EmbeddingTable> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding table"));
        }
        Ok(EmbeddingTable { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, v: NodeId) -> &[f64] {
        let i = v.index() * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn row_mut(&mut self, v: NodeId) -> &mut [f64] {
        let i = v.index() * self.dim;
        &mut self.data[i..i + self.dim]
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".idx");
        PathBuf::from(p)
    }

    /// Writes the table as f32 rows plus a `<path>.idx` sidecar listing
    /// `dense_id<TAB>raw_id` lines.
    pub fn save<P: AsRef<Path>>(&self, path: P, raw_ids: &[String]) -> Result<()> {
        let path = path.as_ref();
        if raw_ids.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: raw_ids.len(),
            });
        }
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, MAGIC, VERSION)?;
        write_u64(&mut w, self.len() as u64)?;
        write_u32(&mut w, self.dim as u32)?;
        for x in &self.data {
            write_f32(&mut w, *x as f32)?;
        }
        w.flush()?;

        let mut idx = BufWriter::new(File::create(Self::sidecar_path(path))?);
        for (i, raw) in raw_ids.iter().enumerate() {
            writeln!(idx, "{i}\t{raw}")?;
        }
        idx.flush()?;
        Ok(())
    }

    /// Loads a table and its sidecar; returns (table, raw ids by dense id).
    pub fn load<P: AsRef<Path>>(path: P) -> Result<(EmbeddingTable, Vec<String>)> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let mut r = BufReader::new(File::open(path)?);
        expect_header(&mut r, MAGIC, VERSION, &path_str)?;
        let n = read_u64(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n * dim {
            data.push(read_f32(&mut r)? as f64);
        }

        let idx_path = Self::sidecar_path(path);
        let mut raw_ids = Vec::with_capacity(n);
        for line in BufReader::new(File::open(&idx_path)?).lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (dense, raw) = line.split_once('\t').ok_or_else(|| Error::Format {
                path: idx_path.display().to_string(),
                reason: format!("bad sidecar line {line:?}"),
            })?;
            if dense.parse::<usize>().ok() != Some(raw_ids.len()) {
                return Err(Error::Format {
                    path: idx_path.display().to_string(),
                    reason: format!("sidecar ids out of order at {line:?}"),
                });
            }
            raw_ids.push(raw.to_string());
        }
        if raw_ids.len() != n {
            return Err(Error::Format {
                path: idx_path.display().to_string(),
                reason: format!("sidecar holds {} ids, table has {n}", raw_ids.len()),
            });
        }
        Ok((EmbeddingTable { dim, data }, raw_ids))
    }
}
