//! Plain binary matrix dumps: magic `R2SMEL1`, u32 rows, u32 cols, then
//! row-major f32 data, all little-endian.

use std::path::Path;

use super::MelSpectrogram;
use crate::error::{Error, Result};

pub const MEL_DUMP_MAGIC: &[u8; 7] = b"R2SMEL1";

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDump {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl MatrixDump {
    pub fn from_mel(m: &MelSpectrogram) -> Self {
        MatrixDump {
            rows: m.n_bands(),
            cols: m.n_frames(),
            data: m.values().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_mel(&self, normalized: bool) -> Result<MelSpectrogram> {
        MelSpectrogram::new(
            self.data.iter().map(|&v| v as f64).collect(),
            self.cols,
            normalized,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(15 + 4 * self.data.len());
        out.extend_from_slice(MEL_DUMP_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let malformed = |offset: usize, reason: String| Error::Malformed {
            what: "matrix dump",
            offset: offset as u64,
            reason,
        };
        if bytes.len() < MEL_DUMP_MAGIC.len() || &bytes[..7] != MEL_DUMP_MAGIC {
            return Err(malformed(0, "bad magic".into()));
        }
        if bytes.len() < 15 {
            return Err(malformed(bytes.len(), "truncated header".into()));
        }
        let rows = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
        if rows == 0 || cols == 0 {
            return Err(malformed(7, format!("empty matrix {rows}x{cols}")));
        }
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(15))
            .ok_or_else(|| malformed(7, "dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(malformed(
                bytes.len().min(expected),
                format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        let data = bytes[15..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(malformed(15 + 4 * i, "non-finite value".into()));
        }
        Ok(MatrixDump { rows, cols, data })
    }
}

pub fn write_matrix_dump(path: &Path, dump: &MatrixDump) -> Result<()> {
    std::fs::write(path, dump.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_dump(path: &Path) -> Result<MatrixDump> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    MatrixDump::from_bytes(&bytes)
}
