use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridFunction, GridSpec};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    n: usize,
    period: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

impl GridFunction {
    /// CSV with columns `index,value` (row-major flat index).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{v:e}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian f64 dump plus a JSON sidecar `{dim, n, period}` next to it.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes)?;
        let meta = Sidecar { dim: self.grid.dim, n: self.grid.n, period: self.grid.period };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let meta: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let grid = GridSpec::new(meta.dim, meta.n, meta.period)?;
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * grid.len() {
            return Err(Error::GridMismatch(format!(
                "raw dump holds {} bytes, sidecar implies {}",
                bytes.len(),
                8 * grid.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        GridFunction::new(grid, values)
    }
}
