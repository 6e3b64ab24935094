//! Binary field snapshots: `"DKPP"`, version `u32`, `N` and `M` as `u64`,
//! `L` and `T` as `f64`, then `(M+1)·N` samples time-major. All little-endian.

use std::io::{Read, Write};
use std::path::Path;

use dkpp_core::{Grid, SpaceTimeField, TimeWindow};

use crate::CliError;

pub const MAGIC: &[u8; 4] = b"DKPP";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_points: usize,
    pub steps: usize,
    pub half_width: f64,
    pub horizon: f64,
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn new(grid: &Grid, window: &TimeWindow, field: &SpaceTimeField) -> Self {
        Self {
            n_points: grid.n_points(),
            steps: window.steps(),
            half_width: grid.half_width(),
            horizon: window.horizon(),
            data: field.data().to_vec(),
        }
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + 2.0 * self.half_width * j as f64 / self.n_points as f64
    }

    pub fn t(&self, m: usize) -> f64 {
        if m == self.steps {
            self.horizon
        } else {
            self.horizon * m as f64 / self.steps as f64
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_points as u64).to_le_bytes());
        out.extend_from_slice(&(self.steps as u64).to_le_bytes());
        out.extend_from_slice(&self.half_width.to_le_bytes());
        out.extend_from_slice(&self.horizon.to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err(format!("snapshot truncated: {} bytes, header needs {HEADER_LEN}", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err("not a DKPP snapshot (bad magic)".into());
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(format!("unsupported snapshot version {version}"));
        }
        let n_points = u64_at(8) as usize;
        let steps = u64_at(16) as usize;
        let half_width = f64_at(24);
        let horizon = f64_at(32);
        let count = n_points
            .checked_mul(steps + 1)
            .ok_or_else(|| "snapshot dimensions overflow".to_string())?;
        let expected = HEADER_LEN + 8 * count;
        if bytes.len() != expected {
            return Err(format!("snapshot has {} bytes, expected {expected}", bytes.len()));
        }
        let data = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { n_points, steps, half_width, horizon, data })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| CliError::Validation(format!("{}: {m}", path.display())))
    }
}
